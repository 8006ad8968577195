"""Kernel interpolation in the native space of a Matérn kernel."""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .errors import InputError
from .kernel import (
    DEFAULT_JITTER,
    Design,
    GramMatrix,
    MaternKernel,
    as_points,
    cross_cov,
    gram,
)

DEFAULT_FILL_RESOLUTION = 256


@dataclass(frozen=True, eq=False)
class Interpolant:
    """``s(x) = sum_i u_i C(x_i, x)`` matching ``values`` at ``centers``.

    ``coefficients_lo`` holds the rounding remainder of the coefficients, so
    ``coefficients + coefficients_lo`` is the solution to roughly twice working
    precision; evaluation uses both.
    """

    kernel: MaternKernel
    centers: Design
    coefficients: np.ndarray
    values: np.ndarray
    gram: GramMatrix
    coefficients_lo: np.ndarray | None = None

    def __call__(self, query):
        return eval_interpolant(self, query)

    def as_element(self) -> "NativeElement":
        return NativeElement(self.kernel, self.centers.points, self.coefficients)


@dataclass(frozen=True, eq=False)
class NativeElement:
    """Finite kernel expansion ``sum_i alpha_i C(s_i, .)``."""

    kernel: MaternKernel
    centers: np.ndarray
    coefficients: np.ndarray

    def __post_init__(self):
        c = as_points(self.centers, self.kernel.dim)
        a = np.atleast_1d(np.asarray(self.coefficients, dtype=float))
        if a.shape != (c.shape[0],):
            raise InputError("need one coefficient per center")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "coefficients", a)

    def __call__(self, x):
        x = as_points(x, self.kernel.dim)
        if len(self.coefficients) == 0:
            return np.zeros(x.shape[0])
        return self.kernel(x, self.centers) @ self.coefficients

    def __add__(self, other: "NativeElement") -> "NativeElement":
        _same_kernel(self, other)
        return NativeElement(
            self.kernel,
            np.vstack([self.centers, other.centers]),
            np.concatenate([self.coefficients, other.coefficients]),
        )

    def __neg__(self):
        return NativeElement(self.kernel, self.centers, -self.coefficients)

    def __sub__(self, other):
        return self + (-other)

    def __rmul__(self, scalar):
        return NativeElement(self.kernel, self.centers, float(scalar) * self.coefficients)

    def norm_sq(self) -> float:
        return inner_product(self, self)


def _same_kernel(a, b):
    if a.kernel != b.kernel:
        raise InputError("native-space elements use different kernels")


def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = 134217729.0 * a  # 2**27 + 1
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def compensated_matvec(K, hi, lo=None, offset=None):
    """``offset - K @ (hi + lo)`` (or ``K @ (hi + lo)``) accumulated in double-double.

    Error-free transformations keep the result accurate to about the
    rounding of the final sum, even when the terms cancel heavily.
    """
    K = np.asarray(K, dtype=float)
    sign = 1.0 if offset is None else -1.0
    s = np.zeros(K.shape[0]) if offset is None else np.array(offset, dtype=float)
    c = np.zeros(K.shape[0])
    for j in range(K.shape[1]):
        p, e = _two_prod(K[:, j], sign * hi[j])
        s, q = _two_sum(s, p)
        c += q + e
        if lo is not None:
            c += sign * K[:, j] * lo[j]
    return s + c


def interpolate(design: Design, y, kernel: MaternKernel, jitter: float = DEFAULT_JITTER,
                max_refine: int = 50) -> Interpolant:
    """Solve ``Sigma u = y`` and return the kernel interpolant.

    The jittered Cholesky factor gives a first solve; iterative refinement
    against the un-jittered matrix then removes the jitter bias. Residuals are
    accumulated in double-double and the coefficients carried as a
    ``(hi, lo)`` pair, which keeps the node values accurate even when the
    coefficients are large and cancel. Refinement stops once the residual no
    longer shrinks. ``max_refine=0`` keeps the plain jittered solution.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != design.n:
        raise InputError(f"got {y.shape[0]} values for {design.n} design points")
    if not np.all(np.isfinite(y)):
        raise InputError("data values must be finite")
    g = gram(design, kernel, jitter)
    u = g.solve(y)
    lo = None
    if jitter > 0 and max_refine > 0:
        exact = kernel(design.points)
        lo = np.zeros_like(u)
        resid = compensated_matvec(exact, u, lo, offset=y)
        err = np.max(np.abs(resid))
        floor = np.finfo(float).eps * max(np.max(np.abs(y)), np.finfo(float).tiny)
        for _ in range(max_refine):
            if err <= floor:
                break
            step = g.solve(resid)
            hi_c, lo_c = _two_sum(u, step)
            lo_c = lo_c + lo
            cand, cand_lo = _two_sum(hi_c, lo_c)
            cand_resid = compensated_matvec(exact, cand, cand_lo, offset=y)
            cand_err = np.max(np.abs(cand_resid))
            if not cand_err < err:
                break
            u, lo, resid, err = cand, cand_lo, cand_resid, cand_err
        lo.setflags(write=False)
    y = y.copy()
    y.setflags(write=False)
    u.setflags(write=False)
    return Interpolant(kernel, design, u, y, g, lo)


def eval_interpolant(s: Interpolant, query) -> np.ndarray:
    K = cross_cov(s.centers, query, s.kernel).T
    if s.coefficients_lo is None:
        return K @ s.coefficients
    return compensated_matvec(K, s.coefficients, s.coefficients_lo)


def inner_product(a: NativeElement, b: NativeElement) -> float:
    """Native-space inner product of two finite kernel expansions."""
    _same_kernel(a, b)
    if len(a.coefficients) == 0 or len(b.coefficients) == 0:
        return 0.0
    return float(a.coefficients @ a.kernel(a.centers, b.centers) @ b.coefficients)


def native_norm_sq(s: Interpolant) -> float:
    """Squared native norm ``u^T Sigma u`` of an interpolant (equals ``u^T y``)."""
    return max(float(s.coefficients @ s.values), 0.0)


def fill_distance(design: Design, resolution: int = DEFAULT_FILL_RESOLUTION) -> float:
    """Largest distance from a domain point to its nearest design point.

    Exact in one dimension. In higher dimensions the supremum is taken over a
    regular grid with ``resolution`` points per axis.
    """
    if resolution < 2:
        raise InputError("resolution must be at least 2")
    lo, hi = design.domain[:, 0], design.domain[:, 1]
    if design.dim == 1:
        x = np.sort(design.points[:, 0])
        gaps = np.diff(x) / 2.0
        edges = [x[0] - lo[0], hi[0] - x[-1]]
        return float(max(edges + ([gaps.max()] if len(gaps) else [])))
    axes = [np.linspace(a, b, resolution) for a, b in zip(lo, hi)]
    tree = cKDTree(design.points)
    best = 0.0
    # chunk over the first axis to bound memory
    rest = np.array(list(itertools.product(*axes[1:])))
    for x0 in axes[0]:
        grid = np.column_stack([np.full(len(rest), x0), rest])
        dist, _ = tree.query(grid)
        best = max(best, float(dist.max()))
    return best


def power_function(design: Design, kernel: MaternKernel, x_new, jitter: float = DEFAULT_JITTER,
                   gram_matrix: GramMatrix | None = None) -> np.ndarray:
    """``C(x, x) - Sigma_1^T Sigma^{-1} Sigma_1`` at each query point.

    Round-off negatives are clamped to 0; values below ``-10 * jitter`` also
    emit a warning.
    """
    g = gram_matrix if gram_matrix is not None else gram(design, kernel, jitter)
    s1 = cross_cov(design, x_new, kernel)
    if s1.shape[1] == 0:
        return np.zeros(0)
    w = g.solve(s1)
    p = 1.0 - np.einsum("ij,ij->j", s1, w)
    tol = 10.0 * max(g.jitter, np.finfo(float).eps)
    if np.any(p < -tol):
        warnings.warn(f"power function below -{tol:g} ({p.min():.3e}); clamped", RuntimeWarning)
    return np.clip(p, 0.0, 1.0)
