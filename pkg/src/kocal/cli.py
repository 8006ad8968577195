"""Command-line front end: ``kocal {calibrate,predict,mcmc,rates,selftest}``.

Configuration is a flat INI file; ``--set section.key=value`` and the
shortcut flags override it. Every run writes the fully
resolved configuration to ``<command>.manifest.ini``, which can be fed back
through ``--config``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import configparser
import copy
import csv
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import bayes, experiments, regress
from .errors import NUMERICAL_ERRORS, ConfigError, DataError, InputError, KocalError, TheoryDomainError
from .kernel import Design, MaternKernel
from .models import ExternalSimulator, dot_model

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

DEFAULTS = {
    "run": {"seed": "", "out": "kocal-out"},
    "data": {"file": "", "domain": ""},
    "model": {"name": "trig", "command": "", "n_params": "1", "theta_domain": "",
              "theta0": "0.5", "slope": "1.0"},
    "kernel": {"upsilon": "1.0", "gamma": "1.0", "jitter": "1e-8"},
    "calibrate": {"lambda": "", "c": "1.0", "exponent": "", "grid_size": "64", "refine_steps": "2"},
    "predict": {"fit": "", "query": ""},
    "mcmc": {"n_samples": "2000", "burn_in": "500", "thin": "1", "tau2": "", "gamma": "0.1 10",
             "sigma2": "flat", "theta_step": "0.1", "gamma_step": "0.2", "log_tau2_step": "0.5",
             "log_sigma2_step": "0.5", "query": "", "interval": "0.9"},
    "rates": {"study": "noiseless", "problem": "translate", "dim": "1", "sizes": "", "replicates": "",
              "sigma0_sq": "0.0025", "c": "", "exponent": "", "tolerance": "0.15", "slack": "0.35",
              "theta_points": "", "design": "", "query_size": "4096", "jitter": "", "lambda": "1e-6"},
}

DEFAULT_THETA_DOMAINS = {"translate": "-2 2", "trig": "-3 3", "perfect": "-1 2"}

# flag -> (section, key)
SHORTCUTS = {
    "data": ("data", "file"),
    "fit": ("predict", "fit"),
    "query": ("predict", "query"),
    "lam": ("calibrate", "lambda"),
    "study": ("rates", "study"),
    "sizes": ("rates", "sizes"),
    "replicates": ("rates", "replicates"),
}


# ---------------------------------------------------------------- config


def load_config(path=None, overrides=(), flags=None) -> dict:
    """Merge defaults, the INI file, ``--set`` overrides and shortcut flags (in that order)."""
    cfg = copy.deepcopy(DEFAULTS)
    if path:
        parser = configparser.ConfigParser(interpolation=None)
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from None
        for section in parser.sections():
            if section not in cfg:
                raise ConfigError(f"unknown config section [{section}]")
            for key, value in parser.items(section):
                _assign(cfg, section, key, value)
    for item in overrides:
        target, sep, value = item.partition("=")
        section, dot, key = target.partition(".")
        if not sep or not dot:
            raise ConfigError(f"--set expects section.key=value, got {item!r}")
        _assign(cfg, section.strip(), key.strip(), value.strip())
    for flag, value in (flags or {}).items():
        if value is not None:
            section, key = SHORTCUTS[flag]
            _assign(cfg, section, key, str(value))
    return cfg


def _assign(cfg, section, key, value):
    if section not in cfg or key not in cfg[section]:
        raise ConfigError(f"unknown config key {section}.{key}")
    cfg[section][key] = value


def resolve_seed(cfg, flag_seed=None) -> int:
    """Flag, then config file, then ``KO_SEED``, then 0."""
    for source, raw in (("--seed", flag_seed), ("run.seed", cfg["run"]["seed"]),
                        ("KO_SEED", os.environ.get("KO_SEED"))):
        if raw is None or str(raw).strip() == "":
            continue
        try:
            seed = int(raw)
        except ValueError:
            raise ConfigError(f"{source} must be an integer, got {raw!r}") from None
        if seed < 0:
            raise ConfigError(f"{source} must be nonnegative")
        return seed
    return 0


def write_manifest(cfg, out: Path, command: str):
    """Write ``<command>.manifest.ini``, loadable again through ``--config``."""
    parser = configparser.ConfigParser(interpolation=None)
    for section in sorted(cfg):
        parser[section] = {k: cfg[section][k] for k in sorted(cfg[section])}
    with open(out / f"{command}.manifest.ini", "w") as fh:
        parser.write(fh)


def _float(cfg, section, key, positive=False, allow_empty=False):
    raw = cfg[section][key].strip()
    if raw == "" and allow_empty:
        return None
    try:
        value = float(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key} must be a number, got {raw!r}") from None
    if not np.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"{section}.{key} must be {'positive' if positive else 'finite'}, got {raw!r}")
    return value


def _int(cfg, section, key, minimum=None, allow_empty=False):
    raw = cfg[section][key].strip()
    if raw == "" and allow_empty:
        return None
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key} must be an integer, got {raw!r}") from None
    if minimum is not None and value < minimum:
        raise ConfigError(f"{section}.{key} must be at least {minimum}")
    return value


def _floats(cfg, section, key, count=None):
    raw = cfg[section][key].replace(",", " ").split()
    try:
        values = [float(v) for v in raw]
    except ValueError:
        raise ConfigError(f"{section}.{key} must be a list of numbers, got {cfg[section][key]!r}") from None
    if count is not None and len(values) != count:
        raise ConfigError(f"{section}.{key} needs {count} numbers, got {len(values)}")
    return values


# ---------------------------------------------------------------- files


def read_table(path, columns=None, dim=None):
    """Read a headed CSV into ``(header, array)``; schema problems raise :class:`DataError`."""
    if not path:
        raise DataError("no file given")
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        if dim is None:
            raise DataError(f"{path} is empty")
        return [f"x{i + 1}" for i in range(dim)], np.zeros((0, dim))
    header = [h.strip() for h in rows[0]]
    if columns is not None and header != columns:
        raise DataError(f"{path}: expected columns {','.join(columns)}, got {','.join(header)}")
    try:
        data = np.array([[float(c) for c in r] for r in rows[1:]], dtype=float).reshape(-1, len(header))
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric or ragged row ({exc})") from None
    if not np.all(np.isfinite(data)):
        raise DataError(f"{path}: non-finite values")
    return header, data


def read_design_data(path, domain_spec=""):
    """Physical data file with columns ``x1..xd, yp``."""
    header, data = read_table(path)
    d = len(header) - 1
    expected = [f"x{i + 1}" for i in range(d)] + ["yp"]
    if d < 1 or header != expected:
        raise DataError(f"{path}: expected header x1..xd,yp, got {','.join(header)}")
    if data.shape[0] == 0:
        raise DataError(f"{path}: no data rows")
    x, y = data[:, :d], data[:, d]
    try:
        domain = None
        if domain_spec.strip():
            vals = [float(v) for v in domain_spec.replace(",", " ").split()]
            domain = np.array(vals).reshape(d, 2)
        design = Design(x, domain)
    except (InputError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from None
    return design, y


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


# ---------------------------------------------------------------- model building


def model_spec(cfg, dim) -> dict:
    m = cfg["model"]
    spec = {"dim": dim}
    if m["command"].strip():
        spec.update(kind="external", command=m["command"].strip(),
                    n_params=_int(cfg, "model", "n_params", 1))
        default_dom = None
    else:
        name = m["name"].strip()
        if name not in ("translate", "trig", "perfect", "dot"):
            raise ConfigError(f"unknown built-in model {name!r}; choose translate, trig, perfect or dot")
        spec.update(kind="builtin", name=name)
        if name == "perfect":
            spec.update(theta0=_float(cfg, "model", "theta0"), slope=_float(cfg, "model", "slope"))
        spec["n_params"] = dim if name == "dot" else 1
        default_dom = DEFAULT_THETA_DOMAINS.get(name)
    dom_raw = m["theta_domain"].strip() or default_dom
    if not dom_raw:
        raise ConfigError("model.theta_domain is required for this model")
    vals = _floats({"model": {"theta_domain": dom_raw}}, "model", "theta_domain")
    if len(vals) != 2 * spec["n_params"]:
        raise ConfigError(f"model.theta_domain needs {2 * spec['n_params']} numbers")
    box = np.array(vals).reshape(-1, 2)
    if np.any(box[:, 0] > box[:, 1]):
        raise ConfigError("model.theta_domain has lo > hi")
    spec["theta_domain"] = box.tolist()
    return spec


def build_model(spec, kernel: MaternKernel):
    """Instantiate the model described by ``spec`` (external models must be closed by the caller)."""
    if spec["kind"] == "external":
        return ExternalSimulator(spec["command"], spec["dim"], spec["n_params"])
    name = spec["name"]
    if name == "dot":
        return dot_model(spec["dim"])
    if name == "perfect":
        return experiments.perfect_problem(spec["dim"], theta0=spec["theta0"], slope=spec["slope"]).model
    return experiments.make_problem(name, kernel).model


def kernel_from(cfg, dim) -> MaternKernel:
    try:
        return MaternKernel(_float(cfg, "kernel", "upsilon", True), _float(cfg, "kernel", "gamma", True), dim)
    except InputError as exc:
        raise ConfigError(str(exc)) from None


def _close(model):
    if isinstance(model, ExternalSimulator):
        model.close()


def _outdir(cfg) -> Path:
    out = Path(cfg["run"]["out"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc.strerror}") from None
    return out


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------- subcommands


def cmd_calibrate(cfg, seed) -> int:
    data_path = cfg["data"]["file"]
    design, yp = read_design_data(data_path, cfg["data"]["domain"])
    if data_path:
        cfg["data"]["file"] = str(Path(data_path).resolve())
    kernel = kernel_from(cfg, design.dim)
    jitter = _float(cfg, "kernel", "jitter")
    spec = model_spec(cfg, design.dim)
    lam = _float(cfg, "calibrate", "lambda", positive=True, allow_empty=True)
    if lam is None:
        lam = regress.smoothing_schedule(design.n, kernel, _float(cfg, "calibrate", "c", positive=True),
                                         _float(cfg, "calibrate", "exponent", allow_empty=True))
    grid_size = _int(cfg, "calibrate", "grid_size", 1)
    refine = _int(cfg, "calibrate", "refine_steps", 0)
    out = _outdir(cfg)
    write_manifest(cfg, out, "calibrate")
    model = build_model(spec, kernel)
    try:
        problem = regress.CalibrationProblem(design, yp, model, spec["theta_domain"], kernel, lam, jitter)
        fit = regress.calibrate(problem, grid_size=grid_size, refine_steps=refine)
        ys = model(design.points, fit.theta_hat)
    finally:
        _close(model)
    doc = {
        "created": _now(),
        "seed": seed,
        "theta_hat": fit.theta_hat.tolist(),
        "lambda": fit.lam,
        "sigma2_hat": fit.sigma2_hat,
        "tau2_hat": fit.tau2_hat,
        "objective": fit.objective,
        "alpha": fit.alpha.tolist(),
        "delta_hat": fit.delta_hat.tolist(),
        "grid_cell": fit.grid_cell.tolist(),
        "evaluations": fit.evaluations,
        "design": design.points.tolist(),
        "domain": design.domain.tolist(),
        "yp": problem.yp.tolist(),
        "kernel": {"upsilon": kernel.upsilon, "gamma": kernel.gamma, "dim": kernel.dim, "jitter": jitter},
        "model": spec,
    }
    write_json(out / "fit.json", doc)
    header = [f"x{i + 1}" for i in range(design.dim)] + ["yp", "ys", "delta"]
    write_csv(out / "discrepancy.csv", header,
              np.column_stack([design.points, problem.yp, ys, fit.delta_hat]))
    print(f"theta_hat={fit.theta_hat.tolist()} sigma2_hat={fit.sigma2_hat!r} lambda={fit.lam!r}")
    return EXIT_OK


def load_fit(path):
    """Rebuild the calibration problem and fit recorded by ``calibrate``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read fit file {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise DataError(f"fit file {path} is not JSON: {exc}") from None
    try:
        k = doc["kernel"]
        kernel = MaternKernel(k["upsilon"], k["gamma"], k["dim"])
        design = Design(doc["design"], doc["domain"])
        spec = doc["model"]
        model = build_model(spec, kernel)
        problem = regress.CalibrationProblem(design, doc["yp"], model, spec["theta_domain"], kernel,
                                             doc["lambda"], k["jitter"])
        fit = regress.CalibrationFit(
            theta_hat=np.array(doc["theta_hat"], dtype=float),
            alpha=np.array(doc["alpha"], dtype=float),
            lam=float(doc["lambda"]),
            sigma2_hat=float(doc["sigma2_hat"]),
            objective=float(doc["objective"]),
            delta_hat=np.array(doc["delta_hat"], dtype=float),
            grid_cell=np.array(doc["grid_cell"], dtype=float),
            evaluations=int(doc.get("evaluations", 0)),
        )
    except (KeyError, TypeError, InputError, ConfigError) as exc:
        raise DataError(f"fit file {path} has the wrong schema: {exc}") from None
    if fit.alpha.shape != (design.n,):
        raise DataError(f"fit file {path}: alpha length does not match the design")
    return problem, fit


def cmd_predict(cfg, seed) -> int:
    problem, fit = load_fit(cfg["predict"]["fit"])
    d = problem.kernel.dim
    cols = [f"x{i + 1}" for i in range(d)]
    _, query = read_table(cfg["predict"]["query"], cols, dim=d)
    out = _outdir(cfg)
    write_manifest(cfg, out, "predict")
    try:
        mean, var = regress.predict(fit, problem, query)
    finally:
        _close(problem.model)
    write_csv(out / "predictions.csv", cols + ["mean", "variance"],
              np.column_stack([query, mean, var]) if len(query) else [])
    return EXIT_OK


def _support(cfg, key):
    raw = cfg["mcmc"][key].strip()
    if key == "sigma2" and raw.lower() == "flat":
        return None
    vals = _floats(cfg, "mcmc", key, 2)
    return tuple(vals)


def cmd_mcmc(cfg, seed) -> int:
    data_path = cfg["data"]["file"]
    design, yp = read_design_data(data_path, cfg["data"]["domain"])
    if data_path:
        cfg["data"]["file"] = str(Path(data_path).resolve())
    kernel = kernel_from(cfg, design.dim)
    jitter = _float(cfg, "kernel", "jitter")
    spec = model_spec(cfg, design.dim)
    config = bayes.MCMCConfig(
        n_samples=_int(cfg, "mcmc", "n_samples"),
        burn_in=_int(cfg, "mcmc", "burn_in"),
        thin=_int(cfg, "mcmc", "thin"),
        theta_step=_float(cfg, "mcmc", "theta_step"),
        gamma_step=_float(cfg, "mcmc", "gamma_step"),
        log_tau2_step=_float(cfg, "mcmc", "log_tau2_step"),
        log_sigma2_step=_float(cfg, "mcmc", "log_sigma2_step"),
        seed=seed,
    )
    try:
        config.validate()
    except InputError as exc:
        raise ConfigError(str(exc)) from None
    try:
        tau2 = _support(cfg, "tau2") if cfg["mcmc"]["tau2"].strip() else None
        default = bayes.PriorSpec.default(spec["theta_domain"], yp)
        prior = bayes.PriorSpec(theta=spec["theta_domain"], tau2=tau2 or default.tau2,
                                gamma=_support(cfg, "gamma"), sigma2=_support(cfg, "sigma2"))
    except InputError as exc:
        raise ConfigError(str(exc)) from None
    interval = _float(cfg, "mcmc", "interval")
    if not 0 < interval < 1:
        raise ConfigError("mcmc.interval must lie in (0, 1)")
    query = None
    if cfg["mcmc"]["query"].strip():
        _, query = read_table(cfg["mcmc"]["query"], [f"x{i + 1}" for i in range(design.dim)], dim=design.dim)
    out = _outdir(cfg)
    write_manifest(cfg, out, "mcmc")
    model = build_model(spec, kernel)
    try:
        data = bayes.KOData(design, yp, model, kernel.upsilon, jitter)
        chain = bayes.run_mcmc(data, prior, config)
        chain.write(out / "chain.csv", out / "chain.json")
        if query is not None:
            rows = predictive_summary(chain, data, query, seed, interval)
            cols = [f"x{i + 1}" for i in range(design.dim)]
            write_csv(out / "predictive.csv", cols + ["mean", "rb_mean", "lower", "upper"], rows)
    finally:
        _close(model)
    print(" ".join(f"accept[{b}]={r:.3f}" for b, r in sorted(chain.acceptance.items())))
    for w in chain.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return EXIT_OK


def predictive_summary(chain, data, query, seed, interval=0.9):
    """Per query point: mean of predictive draws, mean of conditional means, central interval."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    draws = np.empty((len(chain), len(query)))
    means = np.empty_like(draws)
    for i, sample in enumerate(chain.samples):
        m, v = bayes.predictive_moments(sample, data, query)
        means[i] = m
        draws[i] = m + np.sqrt(v) * rng.standard_normal(m.shape)
    tail = 0.5 * (1.0 - interval)
    lo, hi = np.quantile(draws, [tail, 1.0 - tail], axis=0)
    return np.column_stack([query, draws.mean(axis=0), means.mean(axis=0), lo, hi])


def cmd_rates(cfg, seed) -> int:
    r = cfg["rates"]
    study = r["study"].strip()
    if study not in ("noiseless", "noisy", "theta_limit"):
        raise ConfigError(f"rates.study must be noiseless, noisy or theta_limit, got {study!r}")
    dim = _int(cfg, "rates", "dim", 1)
    kernel = kernel_from(cfg, dim)
    try:
        kernel.require_theory()
    except TheoryDomainError as exc:
        raise ConfigError(str(exc)) from None
    sizes = [int(v) for v in _floats(cfg, "rates", "sizes")] or None
    replicates = _int(cfg, "rates", "replicates", 1, allow_empty=True)
    # the noiseless and theta-limit studies run on exact data
    sigma0_sq = _float(cfg, "rates", "sigma0_sq") if study == "noisy" else 0.0
    try:
        problem = experiments.make_problem(r["problem"].strip(), kernel, sigma0_sq=sigma0_sq)
    except InputError as exc:
        raise ConfigError(str(exc)) from None
    theta_points = _int(cfg, "rates", "theta_points", 2, allow_empty=True)
    out = _outdir(cfg)
    write_manifest(cfg, out, "rates")
    kw = {"seed": seed}
    if sizes:
        kw["sizes"] = sizes
    if study == "noiseless":
        if theta_points:
            lo, hi = problem.theta_domain[0]
            kw["theta_grid"] = np.linspace(lo, hi, theta_points)
        if replicates:
            kw["replicates"] = replicates
        if r["design"].strip():
            kw["design_kind"] = r["design"].strip()
        if r["jitter"].strip():
            kw["jitter"] = _float(cfg, "rates", "jitter")
        kw["query"] = experiments.query_grid(problem.domain, _int(cfg, "rates", "query_size", 2))
        report = experiments.run_rate_study_noiseless(problem, kernel, slack=_float(cfg, "rates", "slack"), **kw)
    elif study == "noisy":
        if replicates:
            kw["replicates"] = replicates
        if r["jitter"].strip():
            kw["jitter"] = _float(cfg, "rates", "jitter")
        report = experiments.run_rate_study_noisy(
            problem, kernel, c=_float(cfg, "rates", "c", True, allow_empty=True),
            exponent=_float(cfg, "rates", "exponent", allow_empty=True),
            query_size=_int(cfg, "rates", "query_size", 2), tol=_float(cfg, "rates", "tolerance"), **kw)
    else:
        if theta_points:
            lo, hi = problem.theta_domain[0]
            kw["theta_grid"] = np.linspace(lo, hi, theta_points)
        if r["design"].strip():
            kw["design_kind"] = r["design"].strip()
        result = experiments.run_theta_limit_study(problem, kernel, lam=_float(cfg, "rates", "lambda", True), **kw)
        write_json(out / "rates.json", result)
        last = result["rows"][-1]
        ok = last["error_cells"] <= 3.0
        print(f"{'PASS' if ok else 'FAIL'} theta_limit.abs_error: |theta_hat - theta'| = {last['abs_error']:.3e} "
              f"({last['error_cells']:.2f} cells) at n={last['n']}")
        return EXIT_OK
    (out / "rates.json").write_text(report.to_json() + "\n")
    (out / "rates.csv").write_text(report.to_csv())
    for flag in report.flags:
        print(f"flag: {flag}", file=sys.stderr)
    for line in report.summary_lines():
        print(line)
    return EXIT_OK


def cmd_selftest(cfg, seed) -> int:
    from .selftest import run_selftest

    return EXIT_OK if run_selftest(seed) else 1


COMMANDS = {
    "calibrate": cmd_calibrate,
    "predict": cmd_predict,
    "mcmc": cmd_mcmc,
    "rates": cmd_rates,
    "selftest": cmd_selftest,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI configuration file")
    common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    common.add_argument("--seed", help="master seed (falls back to run.seed, then KO_SEED)")
    common.add_argument("--out", help="output directory")
    parser = argparse.ArgumentParser(prog="kocal", description="Computer-model calibration toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("calibrate", parents=[common], help="penalized least-squares calibration")
    p.add_argument("--data")
    p.add_argument("--lambda", dest="lam")
    p = sub.add_parser("predict", parents=[common], help="predict from a fit file")
    p.add_argument("--fit")
    p.add_argument("--query")
    p = sub.add_parser("mcmc", parents=[common], help="posterior sampling")
    p.add_argument("--data")
    p = sub.add_parser("rates", parents=[common], help="convergence-rate studies")
    p.add_argument("--study")
    p.add_argument("--sizes")
    p.add_argument("--replicates")
    sub.add_parser("selftest", parents=[common], help="run the invariant checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        flags = {k: getattr(args, k, None) for k in SHORTCUTS}
        cfg = load_config(args.config, args.overrides, flags)
        if args.out:
            cfg["run"]["out"] = args.out
        seed = resolve_seed(cfg, args.seed)
        cfg["run"]["seed"] = str(seed)
        return COMMANDS[args.command](cfg, seed)
    except (ConfigError, TheoryDomainError) as exc:
        code, exc_ = EXIT_CONFIG, exc
    except DataError as exc:
        code, exc_ = EXIT_DATA, exc
    except NUMERICAL_ERRORS as exc:
        code, exc_ = EXIT_NUMERICAL, exc
    except InputError as exc:
        code, exc_ = EXIT_CONFIG, exc
    except KocalError as exc:
        code, exc_ = EXIT_NUMERICAL, exc
    print(f"kocal {args.command}: error: {exc_}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
