"""Computer-model evaluators: built-in analytic models and the stdio simulator client.

A model is any callable ``model(x, theta) -> values`` where ``x`` is an
``(m, d)`` array of control inputs and ``theta`` a length-``p`` parameter
vector. Built-ins carry ``dim`` and ``n_params`` attributes.
"""
from __future__ import annotations

import shlex
import subprocess

import numpy as np

from .errors import ConfigError, InputError, SimulatorError
from .kernel import MaternKernel, as_points
from .native import NativeElement


class ModelEvaluationError(SimulatorError):
    """A model produced unusable output (non-finite or misshapen) at one parameter value."""


class AnalyticModel:
    """Vectorized closed-form model ``f(x, theta)``."""

    concurrency_safe = True

    def __init__(self, name, func, dim, n_params, params=None):
        self.name = name
        self.func = func
        self.dim = dim
        self.n_params = n_params
        self.params = dict(params or {})

    def __call__(self, x, theta):
        x = as_points(x, self.dim)
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.n_params,):
            raise InputError(f"{self.name} takes {self.n_params} parameter(s), got {theta.shape}")
        return np.asarray(self.func(x, theta), dtype=float).reshape(x.shape[0])

    def __repr__(self):
        return f"AnalyticModel({self.name!r}, dim={self.dim}, n_params={self.n_params})"


class CachedModel:
    """Memoizes evaluations keyed on the exact bytes of ``(x, theta)``."""

    def __init__(self, model):
        self.model = model
        self.dim = getattr(model, "dim", None)
        self.n_params = getattr(model, "n_params", None)
        self.calls = 0
        self._cache = {}

    def __call__(self, x, theta):
        x = np.ascontiguousarray(as_points(x, self.dim))
        theta = np.ascontiguousarray(np.atleast_1d(np.asarray(theta, dtype=float)))
        key = (x.shape, x.tobytes(), theta.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            self.calls += 1
            hit = np.asarray(self.model(x, theta), dtype=float)
            self._cache[key] = hit
        return hit.copy()


def kernel_expansion(kernel: MaternKernel, centers, coefs) -> NativeElement:
    return NativeElement(kernel, centers, coefs)


def scaled_model(g, dim, name="scaled") -> AnalyticModel:
    """``y(x, theta) = theta * g(x)``: the linear-in-parameter model."""
    return AnalyticModel(name, lambda x, th: th[0] * g(x), dim, 1)


def dot_model(dim) -> AnalyticModel:
    """``y(x, theta) = sum_k theta_k x_k`` (needs ``len(theta) == dim``)."""
    return AnalyticModel("dot", lambda x, th: x @ th, dim, dim)


def trig_truth(x):
    """Smooth trigonometric true process on the unit cube."""
    x = np.asarray(x, dtype=float)
    return np.sum(np.sin(2.0 * np.pi * x), axis=1) + 0.5 * np.cos(np.pi * np.sum(x, axis=1))


def trig_linear_model(dim) -> AnalyticModel:
    """Deliberately biased simplification of :func:`trig_truth`: a straight line."""
    return AnalyticModel("trig_linear", lambda x, th: th[0] * (np.sum(x, axis=1) - 0.5 * dim), dim, 1)


def perfect_model(truth, g, theta0, slope, dim) -> AnalyticModel:
    """``y(x, theta) = truth(x) + slope * (theta - theta0) * g(x)``.

    With ``slope == 0`` the parameter is unidentified.
    """
    return AnalyticModel(
        "perfect",
        lambda x, th: truth(x) + slope * (th[0] - theta0) * g(x),
        dim,
        1,
        {"theta0": theta0, "slope": slope},
    )


class ExternalSimulator:
    """Client for a simulator speaking the line protocol on stdin/stdout.

    Handshake ``HELLO d p`` -> ``READY``; each evaluation sends
    ``EVAL x1 .. xd t1 .. tp`` and expects ``OK value`` or ``ERR message``.
    One request is outstanding at a time.
    """

    concurrency_safe = False

    def __init__(self, command, dim, n_params, timeout=30.0):
        self.command = command
        self.dim = int(dim)
        self.n_params = int(n_params)
        self.timeout = timeout
        self._proc = None

    def start(self):
        if self._proc is not None:
            return
        argv = shlex.split(self.command) if isinstance(self.command, str) else list(self.command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ConfigError(f"cannot launch simulator {self.command!r}: {exc}") from exc
        reply = self._request(f"HELLO {self.dim} {self.n_params}")
        if reply != "READY":
            self.close()
            raise SimulatorError(f"bad handshake reply: {reply!r}")

    def _request(self, line):
        proc = self._proc
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            reply = proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise SimulatorError(f"simulator exited while sending {line!r}") from exc
        if not reply:
            code = proc.poll()
            raise SimulatorError(f"simulator exited (code {code}) after request {line!r}")
        return reply.rstrip("\r\n")

    def evaluate(self, x, theta) -> float:
        self.start()
        fields = [repr(float(v)) for v in np.concatenate([x, theta])]
        reply = self._request("EVAL " + " ".join(fields))
        head, _, rest = reply.partition(" ")
        if head == "OK":
            try:
                value = float(rest)
            except ValueError:
                raise SimulatorError(f"malformed simulator reply: {reply!r}") from None
            return value
        if head == "ERR":
            # an ERR reply aborts the run rather than skipping this theta
            raise SimulatorError(f"simulator replied {reply!r} to EVAL request")
        raise SimulatorError(f"malformed simulator reply: {reply!r}")

    def __call__(self, x, theta):
        x = as_points(x, self.dim)
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.n_params,):
            raise InputError(f"simulator takes {self.n_params} parameter(s)")
        return np.array([self.evaluate(row, theta) for row in x])

    def close(self):
        proc, self._proc = self._proc, None
        if proc is None:
            return
        try:
            proc.stdin.close()
        except OSError:
            pass
        try:
            proc.wait(timeout=self.timeout)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
        proc.stdout.close()

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, *exc):
        self.close()
