"""Reference simulator for the stdio protocol: returns ``theta . x``.

Run as ``python -m kocal.echo_sim``. With ``--domain-max T`` it answers
``ERR domain`` whenever any parameter exceeds ``T``.
"""
import argparse
import sys


def serve(stdin, stdout, domain_max=None):
    dim = n_params = None
    for line in stdin:
        parts = line.split()
        if not parts:
            continue
        cmd, args = parts[0], parts[1:]
        if cmd == "HELLO":
            dim, n_params = int(args[0]), int(args[1])
            reply = "READY"
        elif cmd == "EVAL":
            if dim is None:
                reply = "ERR no handshake"
            elif len(args) != dim + n_params:
                reply = f"ERR expected {dim + n_params} numbers"
            elif dim != n_params:
                reply = "ERR dimension"
            else:
                vals = [float(a) for a in args]
                x, theta = vals[:dim], vals[dim:]
                if domain_max is not None and max(theta) > domain_max:
                    reply = "ERR domain"
                else:
                    reply = "OK " + repr(sum(a * b for a, b in zip(x, theta)))
        else:
            reply = f"ERR unknown command {cmd}"
        stdout.write(reply + "\n")
        stdout.flush()


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--domain-max", type=float, default=None)
    args = parser.parse_args(argv)
    serve(sys.stdin, sys.stdout, args.domain_max)


if __name__ == "__main__":
    main()
