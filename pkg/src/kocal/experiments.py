"""Synthetic problems, designs and empirical convergence-rate studies."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import ConditioningError, InputError, SlopeFitError
from .kernel import Design, MaternKernel, as_points, cross_cov, gram
from .models import AnalyticModel, perfect_model, scaled_model, trig_linear_model, trig_truth
from .native import NativeElement, fill_distance, inner_product, power_function
from .regress import CalibrationProblem, calibrate, predict, smoothing_schedule

NOISELESS_SIZES = (8, 16, 32, 64, 128, 256)
NOISY_SIZES = (32, 64, 128, 256, 512, 1024)
NOISELESS_SLACK = 0.35
NOISY_TOL = 0.15
SIGMA2_MAX_SLOPE = -0.2


@dataclass(frozen=True, eq=False)
class SyntheticProblem:
    """Analytic true process, computer model, and noise level."""

    name: str
    zeta: object
    model: AnalyticModel
    sigma0_sq: float
    theta_domain: np.ndarray
    domain: np.ndarray
    params: dict = field(default_factory=dict)
    theta_prime: float | None = None

    @property
    def dim(self):
        return self.domain.shape[0]

    def observe(self, design: Design, rng) -> np.ndarray:
        z = self.zeta(design.points)
        if self.sigma0_sq > 0:
            z = z + math.sqrt(self.sigma0_sq) * rng.standard_normal(design.n)
        return z


def _unit_box(dim):
    return np.tile([0.0, 1.0], (dim, 1))


def _default_centers(dim, count, seed):
    return np.random.default_rng(seed).uniform(0.0, 1.0, (count, dim))


def translate_problem(kernel: MaternKernel, sigma0_sq: float = 0.0, centers=None, coefs=None,
                      g_centers=None, g_coefs=None, theta_domain=((-2.0, 2.0),)) -> SyntheticProblem:
    """Truth and model direction are both finite kernel expansions.

    ``zeta = sum_j c_j C(s_j, .)`` and ``y_s(x, theta) = theta * g(x)`` with
    ``g = sum_k b_k C(t_k, .)``. Both lie in the kernel's native space, so the
    norm-minimizing parameter is ``<zeta, g> / <g, g>`` exactly.
    """
    d = kernel.dim
    if centers is None:
        centers = [[0.13], [0.47], [0.71], [0.94]] if d == 1 else _default_centers(d, 4, 11)
        coefs = [1.0, -0.8, 0.6, 0.5]
    if g_centers is None:
        g_centers = [[0.05], [0.35], [0.9]] if d == 1 else _default_centers(d, 3, 12)
        g_coefs = [0.7, 0.4, -0.5]
    zeta = NativeElement(kernel, centers, coefs)
    g = NativeElement(kernel, g_centers, g_coefs)
    dom = np.asarray(theta_domain, dtype=float).reshape(-1, 2)
    theta_prime = inner_product(zeta, g) / inner_product(g, g)
    return SyntheticProblem(
        name="translate",
        zeta=zeta,
        model=scaled_model(g, d, name="translate"),
        sigma0_sq=float(sigma0_sq),
        theta_domain=dom,
        domain=_unit_box(d),
        params={
            "upsilon": kernel.upsilon, "gamma": kernel.gamma,
            "centers": np.asarray(zeta.centers).tolist(), "coefs": zeta.coefficients.tolist(),
            "g_centers": np.asarray(g.centers).tolist(), "g_coefs": g.coefficients.tolist(),
        },
        theta_prime=float(theta_prime),
    )


def trig_problem(dim: int = 1, sigma0_sq: float = 0.0, theta_domain=((-3.0, 3.0),)) -> SyntheticProblem:
    """Smooth trigonometric truth against a straight-line model (nonzero discrepancy)."""
    return SyntheticProblem(
        name="trig",
        zeta=trig_truth,
        model=trig_linear_model(dim),
        sigma0_sq=float(sigma0_sq),
        theta_domain=np.asarray(theta_domain, dtype=float).reshape(-1, 2),
        domain=_unit_box(dim),
        params={"dim": dim},
    )


def perfect_problem(dim: int = 1, sigma0_sq: float = 0.0, theta0: float = 0.5, slope: float = 1.0,
                    theta_domain=((-1.0, 2.0),)) -> SyntheticProblem:
    """Model equals the truth at ``theta0``; ``slope = 0`` makes theta unidentified."""

    def g(x):
        return 1.0 + np.sum(x, axis=1)

    return SyntheticProblem(
        name="perfect",
        zeta=trig_truth,
        model=perfect_model(trig_truth, g, theta0, slope, dim),
        sigma0_sq=float(sigma0_sq),
        theta_domain=np.asarray(theta_domain, dtype=float).reshape(-1, 2),
        domain=_unit_box(dim),
        params={"dim": dim, "theta0": theta0, "slope": slope},
        theta_prime=float(theta0) if slope != 0 else None,
    )


def make_problem(name: str, kernel: MaternKernel, **params) -> SyntheticProblem:
    if name == "translate":
        return translate_problem(kernel, **params)
    if name == "trig":
        return trig_problem(kernel.dim, **params)
    if name == "perfect":
        return perfect_problem(kernel.dim, **params)
    raise InputError(f"unknown problem {name!r}; choose translate, trig or perfect")


def make_design(kind: str, n: int, domain, seed=None) -> Design:
    """Design of ``n`` points: ``uniform`` random, endpoint-inclusive ``grid``, or ``stratified`` random."""
    if n < 1:
        raise InputError("n must be at least 1")
    domain = np.asarray(domain, dtype=float).reshape(-1, 2)
    d = domain.shape[0]
    lo, hi = domain[:, 0], domain[:, 1]
    if kind == "uniform":
        rng = np.random.default_rng(seed)
        pts = lo + (hi - lo) * rng.uniform(0.0, 1.0, (n, d))
    elif kind == "grid":
        m = max(1, math.ceil(round(n ** (1.0 / d), 12)))
        axes = [np.linspace(a, b, m) for a, b in zip(lo, hi)]
        pts = np.array(list(itertools.product(*axes)))[:n]
    elif kind == "stratified":
        # one point per occupied grid cell, kept off the cell edges so the
        # separation stays at least half a cell width
        rng = np.random.default_rng(seed)
        m = max(1, math.ceil(round(n ** (1.0 / d), 12)))
        cells = np.array(list(itertools.product(range(m), repeat=d)))
        cells = cells[np.sort(rng.choice(len(cells), n, replace=False))]
        unit = (cells + 0.25 + 0.5 * rng.uniform(0.0, 1.0, (n, d))) / m
        pts = lo + (hi - lo) * unit
    else:
        raise InputError(f"unknown design kind {kind!r}")
    return Design(pts, domain)


def query_grid(domain, size: int) -> np.ndarray:
    domain = np.asarray(domain, dtype=float).reshape(-1, 2)
    d = domain.shape[0]
    m = max(2, math.ceil(size ** (1.0 / d)))
    axes = [np.linspace(a, b, m) for a, b in domain]
    return np.array(list(itertools.product(*axes)))


def _trapezoid_weights(domain, grid_pts):
    """Product trapezoid weights for a regular grid produced by :func:`query_grid`."""
    domain = np.asarray(domain, dtype=float).reshape(-1, 2)
    d = domain.shape[0]
    m = round(len(grid_pts) ** (1.0 / d))
    w1 = []
    for a, b in domain:
        w = np.full(m, (b - a) / (m - 1))
        w[0] *= 0.5
        w[-1] *= 0.5
        w1.append(w)
    out = w1[0]
    for w in w1[1:]:
        out = np.outer(out, w).ravel()
    return out


def seed_for(master, *keys) -> np.random.SeedSequence:
    """Independent stream keyed on values, not positions, so reordering is harmless."""
    return np.random.SeedSequence([int(master), *[int(k) for k in keys]])


def target_exponents(upsilon: float, d: int) -> dict:
    """Theoretical exponents for each tracked metric.

    Noiseless metrics are in powers of the fill distance ``h``; noisy metrics
    in powers of ``n`` (negative).
    """
    denom = 2.0 * upsilon + 2.0 * d
    return {
        "mean_sup": upsilon,
        "var_sup": upsilon,
        "emp_mse": -(2.0 * upsilon + d) / denom,
        "emp_l2": -(upsilon + d / 2.0) / denom,
        "grid_l2": -(upsilon + d / 2.0) / denom,
        "grid_linf": -upsilon / denom,
        "sigma2_err": -(upsilon + d / 2.0) / denom,
        "var_sup_err": -(upsilon + d / 2.0) / denom,
    }


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    stderr: float
    dropped: tuple = ()


def fit_loglog_slope(sizes, errors) -> SlopeFit:
    """Least-squares line through ``(log size, log error)``.

    Points with nonpositive error are dropped (indices reported); fewer than
    three remaining points raise :class:`SlopeFitError`.
    """
    sizes = np.asarray(sizes, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = (errors > 0) & np.isfinite(errors) & (sizes > 0)
    dropped = tuple(int(i) for i in np.flatnonzero(~keep))
    if keep.sum() < 3:
        raise SlopeFitError(f"need at least 3 positive points for a slope, have {int(keep.sum())}")
    lx, ly = np.log(sizes[keep]), np.log(errors[keep])
    if np.ptp(ly) == 0:
        return SlopeFit(0.0, float(ly[0]), 0.0, dropped)
    res = stats.linregress(lx, ly)
    return SlopeFit(float(res.slope), float(res.intercept), float(res.stderr), dropped)


@dataclass
class RateReport:
    """Per-size metrics, replicate values, fitted slopes and pass/fail verdicts."""

    study: str
    size_kind: str
    sizes: list
    replicates: int
    metrics: dict
    medians: dict
    abscissa: dict
    slopes: dict
    targets: dict
    checks: dict
    flags: list
    config: dict
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "study": self.study, "size_kind": self.size_kind, "sizes": self.sizes,
            "replicates": self.replicates, "metrics": self.metrics, "medians": self.medians,
            "abscissa": self.abscissa, "slopes": self.slopes, "targets": self.targets,
            "checks": self.checks, "flags": self.flags, "config": self.config, "extra": self.extra,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["size", "replicate", "metric", "value"])
        for metric in sorted(self.metrics):
            for size, reps in zip(self.sizes, self.metrics[metric]):
                for r, v in enumerate(reps):
                    w.writerow([size, r, metric, repr(float(v))])
        return buf.getvalue()

    def summary_lines(self):
        lines = []
        for name in sorted(self.checks):
            c = self.checks[name]
            lines.append(f"{'PASS' if c['pass'] else 'FAIL'} {self.study}.{name}: {c['detail']}")
        return lines

    @property
    def passed(self):
        return all(c["pass"] for c in self.checks.values())


def _medians(metrics):
    return {k: [float(np.median(v)) for v in vals] for k, vals in metrics.items()}


def run_rate_study_noiseless(problem: SyntheticProblem, kernel: MaternKernel, sizes=NOISELESS_SIZES,
                             theta_grid=None, query=None, replicates: int = 1, seed: int = 0,
                             design_kind: str = "grid", jitter: float = 1e-12, tau0_sq: float = 1.0,
                             slack: float = NOISELESS_SLACK) -> RateReport:
    """Worst-case predictive mean error (over theta and x) and predictive variance vs fill distance."""
    kernel.require_theory()
    if problem.sigma0_sq != 0:
        raise InputError("the noiseless study needs sigma0_sq == 0")
    if theta_grid is None:
        lo, hi = problem.theta_domain[0]
        theta_grid = np.linspace(lo, hi, 11)
    thetas = np.asarray(theta_grid, dtype=float).reshape(len(theta_grid), -1)
    q = as_points(query_grid(problem.domain, 4096) if query is None else query, kernel.dim)
    zeta_q = problem.zeta(q)
    ys_q = np.column_stack([problem.model(q, th) for th in thetas])
    metrics = {"mean_sup": [], "var_sup": []}
    fills, kept, flags = [], [], []
    for n in sizes:
        per = {"mean_sup": [], "var_sup": []}
        hs = []
        try:
            for rep in range(replicates):
                design = make_design(design_kind, n, problem.domain, seed_for(seed, n, rep))
                g = gram(design, kernel, jitter)
                zx = problem.zeta(design.points)
                R = np.column_stack([zx - problem.model(design.points, th) for th in thetas])
                s1 = cross_cov(design, q, kernel)
                pred = ys_q + s1.T @ g.solve(R)
                per["mean_sup"].append(float(np.max(np.abs(pred - zeta_q[:, None]))))
                per["var_sup"].append(float(tau0_sq * power_function(design, kernel, q, gram_matrix=g).max()))
                hs.append(fill_distance(design))
        except ConditioningError as exc:
            flags.append(f"size {n} dropped: {exc}")
            continue
        kept.append(int(n))
        fills.append(float(np.median(hs)))
        for k in metrics:
            metrics[k].append(per[k])
    medians = _medians(metrics)
    targets = {k: target_exponents(kernel.upsilon, kernel.dim)[k] for k in metrics}
    slopes, checks = {}, {}
    for k in metrics:
        fit = fit_loglog_slope(fills, medians[k])
        slopes[k] = {"slope": fit.slope, "intercept": fit.intercept, "stderr": fit.stderr, "dropped": list(fit.dropped)}
        ok = fit.slope >= targets[k] - slack
        checks[k] = {"pass": bool(ok), "slope": fit.slope, "threshold": targets[k] - slack,
                     "detail": f"slope {fit.slope:.3f} >= {targets[k] - slack:.3f} (target {targets[k]:g})"}
    return RateReport(
        study="noiseless", size_kind="h", sizes=kept, replicates=replicates, metrics=metrics,
        medians=medians, abscissa={"h": fills}, slopes=slopes, targets=targets, checks=checks,
        flags=flags,
        config={"problem": problem.name, "params": problem.params, "upsilon": kernel.upsilon,
                "gamma": kernel.gamma, "seed": seed, "design_kind": design_kind, "jitter": jitter,
                "n_theta": len(thetas), "n_query": len(q), "tau0_sq": tau0_sq},
    )


def run_rate_study_noisy(problem: SyntheticProblem, kernel: MaternKernel, sizes=NOISY_SIZES,
                         replicates: int = 20, seed: int = 0, c: float | None = None,
                         exponent: float | None = None, grid_size: int = 64, query_size: int = 4096,
                         jitter: float = 1e-8, tol: float = NOISY_TOL) -> RateReport:
    """Calibrate and predict on uniform-random designs of growing size.

    The smoothing constant ``c`` defaults to ``sigma0_sq`` (that is,
    ``lam = sigma^2 / tau^2`` with unit process variance, scaled by the schedule).
    """
    kernel.require_theory()
    if c is None:
        if problem.sigma0_sq <= 0:
            raise InputError("pass c explicitly when sigma0_sq == 0")
        c = problem.sigma0_sq
    q = query_grid(problem.domain, query_size)
    wq = _trapezoid_weights(problem.domain, q)
    zeta_q = problem.zeta(q)
    names = ("emp_mse", "emp_l2", "grid_l2", "grid_linf", "sigma2_err", "var_sup_err")
    metrics = {k: [] for k in names}
    kept, flags, lams = [], [], []
    for n in sizes:
        lam = smoothing_schedule(n, kernel, c, exponent)
        per = {k: [] for k in names}
        try:
            for rep in range(replicates):
                rng = np.random.default_rng(seed_for(seed, n, rep))
                design = make_design("uniform", n, problem.domain, rng)
                yp = problem.observe(design, rng)
                prob = CalibrationProblem(design, yp, problem.model, problem.theta_domain, kernel, lam, jitter)
                fit = calibrate(prob, grid_size=grid_size)
                zhat_x = problem.model(design.points, fit.theta_hat) + fit.delta_hat
                mse = float(np.mean((zhat_x - problem.zeta(design.points)) ** 2))
                mean_q, var_q = predict(fit, prob, q)
                e = mean_q - zeta_q
                per["emp_mse"].append(mse)
                per["emp_l2"].append(math.sqrt(mse))
                per["grid_l2"].append(math.sqrt(float(wq @ (e * e))))
                per["grid_linf"].append(float(np.max(np.abs(e))))
                per["sigma2_err"].append(abs(fit.sigma2_hat - problem.sigma0_sq))
                per["var_sup_err"].append(float(np.max(np.abs(var_q - problem.sigma0_sq))))
        except ConditioningError as exc:
            flags.append(f"size {n} dropped: {exc}")
            continue
        kept.append(int(n))
        lams.append(lam)
        for k in names:
            metrics[k].append(per[k])
    medians = _medians(metrics)
    targets = {k: target_exponents(kernel.upsilon, kernel.dim)[k] for k in names}
    slopes, checks = {}, {}
    for k in names:
        fit = fit_loglog_slope(kept, medians[k])
        slopes[k] = {"slope": fit.slope, "intercept": fit.intercept, "stderr": fit.stderr, "dropped": list(fit.dropped)}
    for k in ("emp_l2", "grid_l2", "grid_linf"):
        s, t = slopes[k]["slope"], targets[k]
        checks[k] = {"pass": bool(abs(s - t) <= tol), "slope": s,
                     "detail": f"slope {s:.3f} within {tol} of {t:.3f}"}
    for k in ("sigma2_err", "var_sup_err"):
        s, med = slopes[k]["slope"], medians[k]
        mono = len(med) >= 3 and med[-3] > med[-2] > med[-1]
        ok = mono and s <= SIGMA2_MAX_SLOPE
        checks[k] = {"pass": bool(ok), "slope": s, "monotone_tail": bool(mono),
                     "detail": f"slope {s:.3f} <= {SIGMA2_MAX_SLOPE}, last medians decreasing: {mono}"}
    return RateReport(
        study="noisy", size_kind="n", sizes=kept, replicates=replicates, metrics=metrics,
        medians=medians, abscissa={"n": kept, "lambda": lams}, slopes=slopes, targets=targets,
        checks=checks, flags=flags,
        config={"problem": problem.name, "params": problem.params, "upsilon": kernel.upsilon,
                "gamma": kernel.gamma, "seed": seed, "sigma0_sq": problem.sigma0_sq, "c": c,
                "exponent": exponent, "grid_size": grid_size, "query_size": len(q), "jitter": jitter},
    )


def run_theta_limit_study(problem: SyntheticProblem, kernel: MaternKernel, sizes=(64, 128, 256, 512),
                          theta_grid=None, seed: int = 0, lam: float = 1e-6, design_kind: str = "uniform",
                          dense_n: int = 512, jitter: float = 1e-8) -> dict:
    """Track the calibrated parameter against the native-norm minimizer as ``n`` grows.

    The reference is the exact minimizer when the problem knows it, otherwise
    the grid minimizer of the interpolant norm on a dense grid design.
    """
    from .regress import theta_star_oracle

    if theta_grid is None:
        lo, hi = problem.theta_domain[0]
        theta_grid = np.linspace(lo, hi, 64)
    theta_grid = np.asarray(theta_grid, dtype=float)
    cell = float(theta_grid[1] - theta_grid[0]) if len(theta_grid) > 1 else 0.0
    dense = make_design("grid", dense_n, problem.domain)
    theta_dense = float(np.atleast_1d(theta_star_oracle(problem.model, problem.zeta, kernel, dense, theta_grid, jitter))[0])
    reference = problem.theta_prime if problem.theta_prime is not None else theta_dense
    rows = []
    for n in sizes:
        rng = np.random.default_rng(seed_for(seed, n))
        design = make_design(design_kind, n, problem.domain, rng)
        yp = problem.observe(design, rng)
        prob = CalibrationProblem(design, yp, problem.model, [[theta_grid[0], theta_grid[-1]]], kernel, lam, jitter)
        fit = calibrate(prob, grid_size=len(theta_grid))
        th = float(fit.theta_hat[0])
        rows.append({"n": int(n), "theta_hat": th, "abs_error": abs(th - reference),
                     "error_cells": abs(th - reference) / cell if cell else 0.0})
    return {
        "theta_prime": reference,
        "theta_prime_dense_grid": theta_dense,
        "theta_cell": cell,
        "rows": rows,
        "config": {"problem": problem.name, "seed": seed, "lam": lam, "design_kind": design_kind,
                   "dense_n": dense_n, "upsilon": kernel.upsilon, "gamma": kernel.gamma},
    }
