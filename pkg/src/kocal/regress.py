"""Calibration as penalized least squares, and the resulting predictors.

For fixed smoothing parameter ``lam`` the estimator solves

    min_{theta, f}  sum_i (y_i - y_s(x_i, theta) - f(x_i))^2 + lam * ||f||^2

over the native space of the kernel. The inner minimum is a kernel ridge fit
of the residuals, so ``theta`` is found by minimizing the profile
``lam * r^T (Sigma + lam I)^{-1} r`` with ``r = y - y_s(x, theta)``.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize

from .errors import CalibrationError, InputError
from .kernel import DEFAULT_JITTER, Design, GramMatrix, MaternKernel, as_points, cholesky, cross_cov, gram
from .models import CachedModel, ModelEvaluationError
from .native import power_function

DEFAULT_GRID = 64


@dataclass(frozen=True, eq=False)
class CalibrationProblem:
    """Physical data, a computer model and the fixed kernel / smoothing settings."""

    design: Design
    yp: np.ndarray
    model: object
    theta_domain: np.ndarray
    kernel: MaternKernel
    lam: float
    jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        yp = np.asarray(self.yp, dtype=float).reshape(-1)
        if yp.shape[0] != self.design.n:
            raise InputError(f"{yp.shape[0]} responses for {self.design.n} design points")
        if not np.all(np.isfinite(yp)):
            raise InputError("responses must be finite")
        dom = np.asarray(self.theta_domain, dtype=float).reshape(-1, 2)
        if dom.shape[0] < 1 or np.any(dom[:, 0] > dom[:, 1]) or not np.all(np.isfinite(dom)):
            raise InputError("theta_domain must be a nonempty finite box")
        if not (self.lam > 0 and np.isfinite(self.lam)):
            raise InputError(f"lambda must be positive, got {self.lam!r}")
        if self.design.dim != self.kernel.dim:
            raise InputError("design and kernel dimensions differ")
        yp.setflags(write=False)
        dom.setflags(write=False)
        object.__setattr__(self, "yp", yp)
        object.__setattr__(self, "theta_domain", dom)

    @property
    def n(self) -> int:
        return self.design.n

    @functools.cached_property
    def gram(self) -> GramMatrix:
        return gram(self.design, self.kernel, self.jitter)

    @functools.cached_property
    def ridge_factor(self) -> np.ndarray:
        return _ridge_factor(self.gram, self.lam)

    def residuals(self, theta) -> np.ndarray:
        ys = np.asarray(self.model(self.design.points, np.atleast_1d(theta)), dtype=float)
        if ys.shape != (self.n,) or not np.all(np.isfinite(ys)):
            raise ModelEvaluationError(f"model returned non-finite or misshapen output at theta={theta}")
        return self.yp - ys


@dataclass(frozen=True, eq=False)
class CalibrationFit:
    theta_hat: np.ndarray
    alpha: np.ndarray
    lam: float
    sigma2_hat: float
    objective: float
    delta_hat: np.ndarray
    grid_cell: np.ndarray
    evaluations: int = 0

    @property
    def tau2_hat(self) -> float:
        """Process variance implied by ``lam = sigma^2 / tau^2``."""
        return self.sigma2_hat / self.lam


def _ridge_factor(g: GramMatrix, lam):
    m = np.array(g.entries, dtype=float)
    m[np.diag_indices_from(m)] += lam
    return cholesky(m, g.jitter)


def _ridge_solve(factor, b):
    return linalg.cho_solve((factor, True), b)


def kernel_ridge(residuals, g: GramMatrix, lam: float) -> np.ndarray:
    """Coefficients ``alpha = (Sigma + lam I)^{-1} r``; fitted values are ``Sigma alpha``."""
    if not lam > 0:
        raise InputError(f"lambda must be positive, got {lam!r}")
    r = np.asarray(residuals, dtype=float)
    return _ridge_solve(_ridge_factor(g, lam), r)


def profile_objective(theta, problem: CalibrationProblem) -> float:
    """Penalized objective minimized over the discrepancy at fixed ``theta``."""
    r = problem.residuals(theta)
    return float(_profile_from_residuals(r, problem))


def _profile_from_residuals(r, problem):
    w = _ridge_solve(problem.ridge_factor, r)
    return problem.lam * np.einsum("i...,i...->...", r, w)


def theta_grid(domain, size: int = DEFAULT_GRID):
    """Axis grids (inclusive of endpoints) and their cell widths."""
    domain = np.asarray(domain, dtype=float).reshape(-1, 2)
    axes, cells = [], []
    for lo, hi in domain:
        k = 1 if hi == lo else size
        axes.append(np.linspace(lo, hi, k))
        cells.append((hi - lo) / (k - 1) if k > 1 else 0.0)
    return axes, np.array(cells)


def calibrate(problem: CalibrationProblem, grid_size: int = DEFAULT_GRID, refine_steps: int = 2,
              xtol: float = 1e-10) -> CalibrationFit:
    """Grid search of the profile objective followed by coordinate refinement.

    Ties on the grid go to the smallest index (the lexicographically first
    point). Refinement runs a bounded scalar search within one grid cell of
    the incumbent along each coordinate and only replaces it on strict
    improvement, so a flat objective returns the first grid point.
    """
    model = CachedModel(problem.model)
    cached = CalibrationProblem(
        problem.design, problem.yp, model, problem.theta_domain, problem.kernel, problem.lam, problem.jitter
    )
    # reuse factorizations already computed on the caller's problem
    for attr in ("gram", "ridge_factor"):
        if attr in problem.__dict__:
            cached.__dict__[attr] = problem.__dict__[attr]
    domain = cached.theta_domain
    axes, cells = theta_grid(domain, grid_size)
    grid = np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T

    failures = []
    resid, ok = [], []
    for i, th in enumerate(grid):
        try:
            resid.append(cached.residuals(th))
            ok.append(i)
        except ModelEvaluationError as exc:
            failures.append(str(exc))
    if not ok:
        raise CalibrationError(f"all model evaluations failed; first error: {failures[0]}")
    R = np.column_stack(resid)
    values = _profile_from_residuals(R, cached)
    j = int(np.argmin(values))
    best_theta, best_val = grid[ok[j]].copy(), float(values[j])

    def objective(th):
        try:
            return profile_objective(th, cached)
        except ModelEvaluationError:
            return np.inf

    for _ in range(refine_steps if any(cells > 0) else 0):
        improved = False
        for k in range(len(axes)):
            if cells[k] == 0:
                continue
            lo = max(domain[k, 0], best_theta[k] - cells[k])
            hi = min(domain[k, 1], best_theta[k] + cells[k])

            def along(t, k=k):
                th = best_theta.copy()
                th[k] = t
                return objective(th)

            res = optimize.minimize_scalar(
                along, bounds=(lo, hi), method="bounded",
                options={"xatol": xtol * max(hi - lo, 1e-300), "maxiter": 500},
            )
            if np.isfinite(res.fun) and res.fun < best_val:
                best_theta[k], best_val = float(res.x), float(res.fun)
                improved = True
        if not improved:
            break

    r = cached.residuals(best_theta)
    alpha = _ridge_solve(cached.ridge_factor, r)
    delta = cached.gram.entries @ alpha
    s2 = float(np.sum((r - delta) ** 2) / cached.n)
    return CalibrationFit(
        theta_hat=best_theta,
        alpha=alpha,
        lam=float(cached.lam),
        sigma2_hat=s2,
        objective=float(best_val),
        delta_hat=delta,
        grid_cell=cells,
        evaluations=model.calls,
    )


def sigma2_hat(fit: CalibrationFit, problem: CalibrationProblem) -> float:
    """Posterior mode of the noise variance: mean squared residual after the discrepancy fit."""
    r = problem.residuals(fit.theta_hat)
    delta = problem.gram.entries @ fit.alpha
    return float(np.sum((r - delta) ** 2) / problem.n)


def smoothing_exponent(kernel: MaternKernel) -> float:
    d = kernel.dim
    return d / (2.0 * kernel.upsilon + 2.0 * d)


def smoothing_schedule(n: int, kernel: MaternKernel, c: float = 1.0, exponent_override: float | None = None) -> float:
    """Smoothing parameter ``c * n**e`` with default ``e = d / (2 upsilon + 2 d)``."""
    if n < 1:
        raise InputError("n must be at least 1")
    if not c > 0:
        raise InputError("c must be positive")
    e = smoothing_exponent(kernel) if exponent_override is None else float(exponent_override)
    return float(c * n**e)


def predict(fit: CalibrationFit, problem: CalibrationProblem, x_new):
    """Predictive mean and variance at ``x_new``.

    mean = y_s(x, theta_hat) + Sigma_1^T alpha
    var  = (sigma2_hat / lam) * power(x) + sigma2_hat
    """
    x_new = as_points(x_new, problem.kernel.dim)
    if x_new.shape[0] == 0:
        return np.zeros(0), np.zeros(0)
    s1 = cross_cov(problem.design, x_new, problem.kernel)
    mean = np.asarray(problem.model(x_new, fit.theta_hat), dtype=float) + s1.T @ fit.alpha
    p = power_function(problem.design, problem.kernel, x_new, gram_matrix=problem.gram)
    var = fit.tau2_hat * p + fit.sigma2_hat
    return mean, var


def noiseless_predict(design: Design, yp, model, theta, kernel: MaternKernel, x_new,
                      jitter: float = DEFAULT_JITTER, gram_matrix: GramMatrix | None = None) -> np.ndarray:
    """Interpolating predictor ``y_s(x, theta) + Sigma_1^T Sigma^{-1} (y - y_s(X, theta))``."""
    g = gram_matrix if gram_matrix is not None else gram(design, kernel, jitter)
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    r = np.asarray(yp, dtype=float) - model(design.points, theta)
    x_new = as_points(x_new, kernel.dim)
    return model(x_new, theta) + cross_cov(design, x_new, kernel).T @ g.solve(r)


def noiseless_variance(tau2: float, design: Design, kernel: MaternKernel, x_new,
                       jitter: float = DEFAULT_JITTER) -> np.ndarray:
    if tau2 < 0:
        raise InputError("tau2 must be nonnegative")
    return tau2 * power_function(design, kernel, x_new, jitter)


def interpolant_norms(model, zeta, kernel: MaternKernel, design: Design, thetas,
                      jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """``r^T Sigma^{-1} r`` for ``r = zeta - y_s(., theta)`` on ``design``, per theta."""
    g = gram(design, kernel, jitter)
    z = zeta(design.points)
    thetas = np.asarray(thetas, dtype=float).reshape(len(thetas), -1)
    R = np.column_stack([z - model(design.points, th) for th in thetas])
    return np.einsum("ij,ij->j", R, g.solve(R))


def theta_star_oracle(model, zeta, kernel: MaternKernel, dense_design: Design, theta_grid,
                      jitter: float = DEFAULT_JITTER):
    """Grid minimizer of the (interpolant lower bound on the) native norm of ``zeta - y_s``.

    Returns the minimizing grid entry; ties go to the smallest index.
    """
    thetas = np.asarray(theta_grid, dtype=float)
    if thetas.size == 0:
        raise InputError("theta grid is empty")
    norms = interpolant_norms(model, zeta, kernel, dense_design, thetas, jitter)
    return thetas[int(np.argmin(norms))]
