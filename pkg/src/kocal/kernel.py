"""Matérn correlation functions, Gram matrices and spectral densities.

The correlation with smoothness ``upsilon`` and scale ``gamma`` is

.. math::
    C(s, t) = \\frac{(2\\sqrt{\\upsilon}\\gamma r)^\\upsilon
              K_\\upsilon(2\\sqrt{\\upsilon}\\gamma r)}{\\Gamma(\\upsilon) 2^{\\upsilon-1}},
    \\qquad r = \\|s - t\\|,

normalized so that ``C(s, s) = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, special
from scipy.spatial.distance import cdist

from .errors import ConditioningError, InputError, TheoryDomainError

DEFAULT_JITTER = 1e-8
SMALL_ARG = 1e-10


@dataclass(frozen=True)
class MaternKernel:
    """Isotropic Matérn correlation on ``R^dim``."""

    upsilon: float
    gamma: float
    dim: int = 1

    def __post_init__(self):
        for name in ("upsilon", "gamma"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise InputError(f"{name} must be a positive finite number, got {v!r}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise InputError(f"dim must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "upsilon", float(self.upsilon))
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def rate(self) -> float:
        """Multiplier of the distance inside the Bessel function."""
        return 2.0 * np.sqrt(self.upsilon) * self.gamma

    def with_gamma(self, gamma: float) -> "MaternKernel":
        return MaternKernel(self.upsilon, gamma, self.dim)

    def require_theory(self):
        """Raise unless the smoothness satisfies ``upsilon >= 1``."""
        if self.upsilon < 1:
            raise TheoryDomainError(
                f"rate and bound results need upsilon >= 1, got {self.upsilon}"
            )

    def __call__(self, a, b=None):
        """Correlation matrix between two point sets (rows are points)."""
        a = as_points(a, self.dim)
        b = a if b is None else as_points(b, self.dim)
        return correlation(cdist(a, b), self)


def correlation(r, kernel: MaternKernel) -> np.ndarray:
    """Matérn correlation as a function of distance ``r`` (any shape)."""
    r = np.asarray(r, dtype=float)
    if not np.all(np.isfinite(r)):
        raise InputError("distances must be finite")
    z = kernel.rate * r
    out = np.ones_like(z)
    mask = z > SMALL_ARG
    zm = z[mask]
    nu = kernel.upsilon
    # half-integer orders reduce to exp * polynomial
    if nu == 0.5:
        out[mask] = np.exp(-zm)
    elif nu == 1.5:
        out[mask] = (1.0 + zm) * np.exp(-zm)
    elif nu == 2.5:
        out[mask] = (1.0 + zm + zm * zm / 3.0) * np.exp(-zm)
    else:
        if nu == 1.0:
            bessel = special.k1(zm)
        elif nu in (2.0, 3.0):
            bessel = special.kn(int(nu), zm)
        else:
            bessel = special.kv(nu, zm)
        scale = 1.0 / (special.gamma(nu) * 2.0 ** (nu - 1.0))
        with np.errstate(invalid="ignore", over="ignore"):
            vals = scale * zm**nu * bessel
        # kv underflows to 0 for very large arguments; 0 * inf -> nan
        vals[~np.isfinite(vals)] = 0.0
        out[mask] = vals
    return out


def matern(s, t, kernel: MaternKernel) -> float:
    """Correlation between two single points."""
    s = np.atleast_1d(np.asarray(s, dtype=float))
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if s.shape != (kernel.dim,) or t.shape != (kernel.dim,):
        raise InputError(f"points must have {kernel.dim} coordinates")
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(t))):
        raise InputError("point coordinates must be finite")
    return float(correlation(np.linalg.norm(s - t), kernel))


def as_points(x, dim: int | None = None) -> np.ndarray:
    """Coerce ``x`` to an ``(m, d)`` float array of finite coordinates."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if (dim is None or dim == 1) else x.reshape(1, -1)
    if x.ndim != 2:
        raise InputError(f"points must be a 2-d array, got shape {x.shape}")
    if dim is not None and x.shape[1] != dim and x.shape[0] > 0:
        raise InputError(f"expected {dim}-dimensional points, got {x.shape[1]}")
    if not np.all(np.isfinite(x)):
        raise InputError("point coordinates must be finite")
    return x


@dataclass(frozen=True, eq=False)
class Design:
    """Distinct points inside an axis-aligned box.

    ``domain`` has shape ``(d, 2)`` with rows ``(lower, upper)``; it defaults
    to the unit cube.
    """

    points: np.ndarray
    domain: np.ndarray = None

    def __post_init__(self):
        pts = as_points(self.points)
        if pts.shape[0] < 1:
            raise InputError("a design needs at least one point")
        d = pts.shape[1]
        dom = self.domain
        if dom is None:
            dom = np.tile([0.0, 1.0], (d, 1))
        dom = np.asarray(dom, dtype=float).reshape(-1, 2)
        if dom.shape[0] != d:
            raise InputError(f"domain has {dom.shape[0]} rows for {d}-d points")
        if np.any(dom[:, 0] > dom[:, 1]):
            raise InputError("domain lower bounds must not exceed upper bounds")
        tol = 1e-12 * max(1.0, float(np.abs(dom).max()))
        if np.any(pts < dom[:, 0] - tol) or np.any(pts > dom[:, 1] + tol):
            raise InputError("design points must lie inside the domain")
        if pts.shape[0] > 1 and np.min(_pairwise_min(pts)) <= 0:
            raise InputError("design points must be distinct")
        pts.setflags(write=False)
        dom.setflags(write=False)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "domain", dom)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx) -> "Design":
        return Design(self.points[idx], self.domain)

    def union(self, other: "Design") -> "Design":
        return Design(np.vstack([self.points, other.points]), self.domain)


def _pairwise_min(pts):
    if pts.shape[1] == 1:
        s = np.sort(pts[:, 0])
        return np.diff(s)
    dist = cdist(pts, pts)
    return dist[np.triu_indices(len(pts), 1)]


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Correlation matrix over a design with its lower Cholesky factor."""

    entries: np.ndarray
    jitter: float
    factor: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def solve(self, b):
        return linalg.cho_solve((self.factor, True), b)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.factor))))


def cholesky(matrix, jitter: float | None = None) -> np.ndarray:
    """Lower Cholesky factor, raising :class:`ConditioningError` on failure.

    The error names the first non-positive pivot of the elimination.
    """
    a = np.asarray(matrix, dtype=float)
    c, info = linalg.lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        k = info - 1
        pivot = a[k, k] - float(np.dot(c[k, :k], c[k, :k]))
        raise ConditioningError(
            f"Cholesky failed at order {info} with pivot {pivot:.3e}"
            + (f" (jitter {jitter:g})" if jitter is not None else ""),
            pivot=pivot,
            order=info,
            jitter=jitter,
        )
    if info < 0:
        raise InputError(f"invalid matrix passed to Cholesky (info={info})")
    return c


def gram(design: Design, kernel: MaternKernel, jitter: float = DEFAULT_JITTER) -> GramMatrix:
    """Gram matrix ``C(x_i, x_j) + jitter * I`` and its Cholesky factor."""
    if jitter < 0 or not np.isfinite(jitter):
        raise InputError("jitter must be a nonnegative finite number")
    if design.dim != kernel.dim:
        raise InputError(f"design is {design.dim}-d but kernel is {kernel.dim}-d")
    entries = kernel(design.points)
    entries[np.diag_indices_from(entries)] = 1.0 + jitter
    entries.setflags(write=False)
    factor = cholesky(entries, jitter)
    return GramMatrix(entries, float(jitter), factor)


def cross_cov(design: Design, query, kernel: MaternKernel) -> np.ndarray:
    """``n x m`` matrix of correlations between design and query points."""
    if design.dim != kernel.dim:
        raise InputError(f"design is {design.dim}-d but kernel is {kernel.dim}-d")
    query = as_points(query, kernel.dim)
    if query.shape[0] == 0:
        return np.zeros((design.n, 0))
    return kernel(design.points, query)


def _spectral_prefactor(upsilon, d):
    return 2.0 ** (d / 2.0) * np.exp(special.gammaln(upsilon + d / 2.0) - special.gammaln(upsilon))


def spectral_density(omega, kernel: MaternKernel) -> float:
    """Fourier transform of the correlation at frequency ``omega``.

    Uses the unitary convention ``(2 pi)^(-d/2) int f(x) exp(-i w.x) dx``.
    """
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    if omega.shape[-1] != kernel.dim:
        raise InputError(f"frequency must have {kernel.dim} components")
    if not np.all(np.isfinite(omega)):
        raise InputError("frequency must be finite")
    nu, d = kernel.upsilon, kernel.dim
    a = 4.0 * nu * kernel.gamma**2
    w2 = np.sum(omega * omega, axis=-1)
    val = _spectral_prefactor(nu, d) * a**nu * (a + w2) ** (-(nu + d / 2.0))
    return float(val) if np.ndim(val) == 0 else val


def spectral_bounds(upsilon: float, gamma_lo: float, gamma_hi: float, d: int) -> tuple[float, float]:
    """Constants ``(C1, C2)`` sandwiching the spectral density.

    For every ``gamma`` in ``[gamma_lo, gamma_hi]`` and every ``omega``::

        C2 (1+|w|^2)^-(u+d/2) <= density(w) <= C1 (1+|w|^2)^-(u+d/2)
    """
    if upsilon < 1:
        raise TheoryDomainError(f"spectral bounds need upsilon >= 1, got {upsilon}")
    if not (0 < gamma_lo <= gamma_hi):
        raise InputError(f"need 0 < gamma_lo <= gamma_hi, got [{gamma_lo}, {gamma_hi}]")
    pre = _spectral_prefactor(upsilon, d)
    a_lo = 4.0 * upsilon * gamma_lo**2
    a_hi = 4.0 * upsilon * gamma_hi**2
    c1 = pre * max(a_hi**upsilon, a_lo ** (-d / 2.0))
    c2 = pre * min(a_lo**upsilon, a_hi ** (-d / 2.0))
    return float(c1), float(c2)
