"""Posterior densities and MCMC for the calibration model with a cheap simulator.

Model: ``y_i = y_s(x_i, theta) + delta(x_i) + e_i`` with
``delta ~ GP(0, tau2 * C_gamma)`` and ``e_i ~ N(0, sigma2)``. The discrepancy
at the design points is sampled explicitly (data augmentation), so every
conditional is cheap once the Gram factor for the current ``gamma`` is known.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg

from .errors import ConditioningError, InputError
from .kernel import DEFAULT_JITTER, Design, GramMatrix, MaternKernel, as_points, cholesky, cross_cov, gram
from .native import power_function

NEG_INF = -np.inf


@dataclass(frozen=True)
class PriorSpec:
    """Separable box-uniform prior.

    ``tau2`` and ``gamma`` are ``(lo, hi)`` supports; ``sigma2`` is either a
    box or ``None`` for the flat improper prior on ``(0, inf)``. A support with
    ``lo == hi`` pins the value and the sampler skips that block.
    """

    theta: tuple
    tau2: tuple
    gamma: tuple = (0.1, 10.0)
    sigma2: tuple | None = None

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float).reshape(-1, 2)
        if np.any(th[:, 0] > th[:, 1]):
            raise InputError("theta prior box is empty")
        object.__setattr__(self, "theta", tuple(map(tuple, th.tolist())))
        for name in ("tau2", "gamma", "sigma2"):
            box = getattr(self, name)
            if box is None:
                continue
            lo, hi = map(float, box)
            if not (0 <= lo <= hi) or not math.isfinite(hi):
                raise InputError(f"bad {name} support {box!r}")
            if name == "gamma" and lo <= 0:
                raise InputError("gamma support must be bounded away from 0")
            object.__setattr__(self, name, (lo, hi))

    @classmethod
    def default(cls, theta_domain, yp) -> "PriorSpec":
        """Artifact defaults: ``tau0^2 = 100 var(y)``, ``gamma in [0.1, 10]``, flat ``sigma2``."""
        v = float(np.var(yp)) if len(yp) > 1 else 1.0
        return cls(theta=theta_domain, tau2=(0.0, 100.0 * max(v, 1e-12)))

    @property
    def theta_box(self) -> np.ndarray:
        return np.asarray(self.theta, dtype=float)

    def fixed(self, name) -> bool:
        if name == "theta":
            return bool(np.all(self.theta_box[:, 0] == self.theta_box[:, 1]))
        box = getattr(self, name)
        return box is not None and box[0] == box[1]

    def log_density(self, theta, tau2, sigma2, gamma) -> float:
        th = np.atleast_1d(np.asarray(theta, dtype=float))
        box = self.theta_box
        if th.shape[0] != box.shape[0] or np.any(th < box[:, 0]) or np.any(th > box[:, 1]):
            return NEG_INF
        out = 0.0
        for lo, hi in box:
            if hi > lo:
                out -= math.log(hi - lo)
        for name, value in (("tau2", tau2), ("gamma", gamma), ("sigma2", sigma2)):
            if name == "sigma2" and value is None:
                continue
            box_ = getattr(self, name)
            if box_ is None:
                if not value > 0:
                    return NEG_INF
                continue
            lo, hi = box_
            if lo == hi:
                if value != lo:
                    return NEG_INF
                continue
            # variance supports exclude 0 itself
            if value < lo or value > hi or (lo == 0 and name != "gamma" and not value > 0):
                return NEG_INF
            out -= math.log(hi - lo)
        return out


@dataclass(frozen=True, eq=False)
class KOData:
    """Physical data plus the cheap computer model and the fixed smoothness."""

    design: Design
    yp: np.ndarray
    model: object
    upsilon: float
    jitter: float = DEFAULT_JITTER

    def __post_init__(self):
        yp = np.asarray(self.yp, dtype=float).reshape(-1)
        if yp.shape[0] != self.design.n:
            raise InputError("one response per design point required")
        object.__setattr__(self, "yp", yp)

    @property
    def n(self):
        return self.design.n

    def kernel(self, gamma) -> MaternKernel:
        return MaternKernel(self.upsilon, gamma, self.design.dim)

    def residuals(self, theta):
        return self.yp - np.asarray(self.model(self.design.points, np.atleast_1d(theta)), dtype=float)


class _GramCache:
    """Small memo of Gram factors keyed by ``gamma``."""

    def __init__(self, data: KOData, size=8):
        self.data = data
        self.size = size
        self._store = {}

    def __call__(self, gamma) -> GramMatrix:
        g = self._store.get(gamma)
        if g is None:
            g = gram(self.data.design, self.data.kernel(gamma), self.data.jitter)
            if len(self._store) >= self.size:
                self._store.pop(next(iter(self._store)))
            self._store[gamma] = g
        return g


def _gram_for(data, gamma, cache):
    return cache(gamma) if cache is not None else gram(data.design, data.kernel(gamma), data.jitter)


def log_posterior_cheap(theta, delta, tau2, sigma2, gamma, data: KOData, prior: PriorSpec,
                        cache=None) -> float:
    """Unnormalized log posterior of ``(theta, delta(x), tau2, sigma2, gamma)``.

    Uses ``(sigma2)^(-n/2)`` and ``(tau2)^(-n/2)`` normalizations. Returns
    ``-inf`` outside the prior support.
    """
    lp = prior.log_density(theta, tau2, sigma2, gamma)
    if lp == NEG_INF or not (sigma2 > 0 and tau2 > 0):
        return NEG_INF
    n = data.n
    delta = np.asarray(delta, dtype=float)
    resid = data.residuals(theta) - delta
    g = _gram_for(data, gamma, cache)
    quad = float(delta @ g.solve(delta))
    return float(
        -0.5 * (resid @ resid) / sigma2
        - 0.5 * n * math.log(sigma2)
        - 0.5 * quad / tau2
        - 0.5 * n * math.log(tau2)
        - 0.5 * g.logdet()
        + lp
    )


def log_posterior_noiseless(theta, tau2, gamma, data: KOData, prior: PriorSpec, cache=None) -> float:
    """Log posterior of ``(theta, tau2, gamma)`` when the data carry no noise."""
    lp = prior.log_density(theta, tau2, None, gamma)
    if lp == NEG_INF or not tau2 > 0:
        return NEG_INF
    r = data.residuals(theta)
    g = _gram_for(data, gamma, cache)
    return float(-0.5 * g.logdet() - 0.5 * float(r @ g.solve(r)) / tau2 - 0.5 * data.n * math.log(tau2) + lp)


def gibbs_delta(theta, tau2, sigma2, gamma, data: KOData, cache=None):
    """Full conditional of ``delta(x)``: ``N(A r / sigma2, A)``, ``A = (Sigma^-1/tau2 + I/sigma2)^-1``.

    Computed as the GP posterior ``K - K (K + sigma2 I)^-1 K`` with ``K = tau2 Sigma``.
    """
    if not (tau2 > 0 and sigma2 > 0):
        raise InputError("tau2 and sigma2 must be positive")
    r = data.residuals(theta)
    K = tau2 * np.asarray(_gram_for(data, gamma, cache).entries)
    M = K.copy()
    M[np.diag_indices_from(M)] += sigma2
    L = cholesky(M)
    KMinv = linalg.cho_solve((L, True), K).T
    mean = KMinv @ r
    cov = K - KMinv @ K
    cov = 0.5 * (cov + cov.T)
    return mean, cov


def _sqrt_psd(cov):
    scale = max(float(np.mean(np.diag(cov))), 1e-300)
    try:
        return linalg.cholesky(cov + 1e-12 * scale * np.eye(len(cov)), lower=True)
    except linalg.LinAlgError:
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False)
class PosteriorSample:
    theta: np.ndarray
    delta_at_design: np.ndarray
    tau2: float
    sigma2: float
    gamma: float
    log_density: float


@dataclass
class MCMCConfig:
    n_samples: int = 2000
    burn_in: int = 500
    thin: int = 1
    theta_step: float = 0.1
    gamma_step: float = 0.2
    log_tau2_step: float = 0.5
    log_sigma2_step: float = 0.5
    adapt_every: int = 50
    seed: int = 0
    record_transitions: bool = False

    def validate(self):
        if self.n_samples < 1:
            raise InputError("n_samples must be at least 1 post-burn-in iteration")
        if self.burn_in < 0 or self.thin < 1 or self.adapt_every < 1:
            raise InputError("burn_in >= 0, thin >= 1 and adapt_every >= 1 required")
        for name in ("theta_step", "gamma_step", "log_tau2_step", "log_sigma2_step"):
            if not getattr(self, name) > 0:
                raise InputError(f"{name} must be positive")


@dataclass
class PosteriorChain:
    samples: list
    acceptance: dict
    seed: int
    config: MCMCConfig
    final_steps: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    transitions: list = field(default_factory=list)

    def __len__(self):
        return len(self.samples)

    def array(self, name) -> np.ndarray:
        attr = "delta_at_design" if name == "delta" else name
        return np.array([getattr(s, attr) for s in self.samples])

    def columns(self):
        p = len(self.samples[0].theta) if self.samples else 0
        n = len(self.samples[0].delta_at_design) if self.samples else 0
        return ([f"theta{i + 1}" for i in range(p)] + ["tau2", "sigma2", "gamma", "log_density"]
                + [f"delta{i + 1}" for i in range(n)])

    def rows(self):
        for s in self.samples:
            yield [*s.theta, s.tau2, s.sigma2, s.gamma, s.log_density, *s.delta_at_design]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns())
            for row in self.rows():
                w.writerow([repr(float(v)) for v in row])

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "config": asdict(self.config),
            "acceptance": self.acceptance,
            "final_steps": self.final_steps,
            "n_retained": len(self.samples),
            "warnings": self.warnings,
        }

    def write(self, csv_path, json_path):
        self.to_csv(csv_path)
        with open(json_path, "w") as fh:
            json.dump(self.metadata(), fh, indent=2, sort_keys=True)


def _initial_state(data: KOData, prior: PriorSpec):
    box = prior.theta_box
    theta = 0.5 * (box[:, 0] + box[:, 1])
    gamma = 0.5 * (prior.gamma[0] + prior.gamma[1])
    tau2 = 0.5 * (prior.tau2[0] + prior.tau2[1])
    if prior.sigma2 is None:
        v = float(np.var(data.yp)) if data.n > 1 else 1.0
        sigma2 = 0.1 * v if v > 0 else 1.0
    else:
        sigma2 = 0.5 * (prior.sigma2[0] + prior.sigma2[1])
    if prior.fixed("tau2"):
        tau2 = prior.tau2[0]
    if prior.fixed("gamma"):
        gamma = prior.gamma[0]
    return {"theta": theta, "delta": np.zeros(data.n), "tau2": tau2, "sigma2": sigma2, "gamma": gamma}


def run_mcmc(data: KOData, prior: PriorSpec, config: MCMCConfig | None = None, init: dict | None = None) -> PosteriorChain:
    """Metropolis-within-Gibbs sampler.

    Each sweep draws ``delta(x)`` exactly from its conditional, then applies
    Gaussian random-walk Metropolis steps to ``theta``, ``gamma``,
    ``log tau2`` and ``log sigma2``. Step sizes adapt toward 30-45 %
    acceptance during burn-in only.
    """
    config = config or MCMCConfig()
    config.validate()
    rng = np.random.default_rng(config.seed)
    cache = _GramCache(data)
    state = _initial_state(data, prior)
    if init:
        state.update({k: (np.array(v, dtype=float) if k in ("theta", "delta") else float(v)) for k, v in init.items()})

    def logpost(st):
        return log_posterior_cheap(st["theta"], st["delta"], st["tau2"], st["sigma2"], st["gamma"], data, prior, cache)

    blocks = []
    if not prior.fixed("theta"):
        blocks.append("theta")
    if not prior.fixed("gamma"):
        blocks.append("gamma")
    if not prior.fixed("tau2"):
        blocks.append("tau2")
    if prior.sigma2 is None or not prior.fixed("sigma2"):
        blocks.append("sigma2")
    steps = {
        "theta": config.theta_step * np.maximum(prior.theta_box[:, 1] - prior.theta_box[:, 0], 1e-12),
        "gamma": config.gamma_step,
        "tau2": config.log_tau2_step,
        "sigma2": config.log_sigma2_step,
    }
    window = {b: 0 for b in blocks}
    accepted = {b: 0 for b in blocks}
    tried = {b: 0 for b in blocks}
    post_acc = {b: 0 for b in blocks}
    post_tried = {b: 0 for b in blocks}
    chain = PosteriorChain([], {}, config.seed, config)

    cond_key, cond = None, None
    total = config.burn_in + config.n_samples
    current = logpost(state)
    if current == NEG_INF:
        raise InputError("initial state lies outside the prior support")
    for it in range(total):
        burning = it < config.burn_in
        key = (state["theta"].tobytes(), state["tau2"], state["sigma2"], state["gamma"])
        if key != cond_key:
            mean, cov = gibbs_delta(state["theta"], state["tau2"], state["sigma2"], state["gamma"], data, cache)
            cond_key, cond = key, (mean, _sqrt_psd(cov))
        state["delta"] = cond[0] + cond[1] @ rng.standard_normal(data.n)
        current = logpost(state)

        for b in blocks:
            prop = dict(state)
            z = rng.standard_normal(len(state["theta"])) if b == "theta" else rng.standard_normal()
            jac = 0.0
            if b == "theta":
                prop["theta"] = state["theta"] + steps["theta"] * z
            elif b == "gamma":
                prop["gamma"] = state["gamma"] + steps["gamma"] * z
            else:
                # random walk on the log scale with its Jacobian
                step = steps[b] * z
                prop[b] = state[b] * math.exp(step)
                jac = step
            proposed = logpost(prop) if prop[b] is not None else NEG_INF
            log_ratio = proposed - current + jac if proposed != NEG_INF else NEG_INF
            accept = math.log(rng.uniform()) < log_ratio
            if config.record_transitions:
                chain.transitions.append({
                    "block": b,
                    "current": _copy_state(state),
                    "proposed": _copy_state(prop),
                    "log_ratio": log_ratio,
                    "log_jacobian": jac,
                    "accepted": bool(accept),
                })
            tried[b] += 1
            if accept:
                state, current = prop, proposed
                accepted[b] += 1
                window[b] += 1
            if not burning:
                post_tried[b] += 1
                post_acc[b] += int(accept)

        if burning and (it + 1) % config.adapt_every == 0:
            for b in blocks:
                rate = window[b] / config.adapt_every
                if rate < 0.30:
                    steps[b] = steps[b] * 0.8
                elif rate > 0.45:
                    steps[b] = steps[b] * 1.25
                window[b] = 0

        if not burning and (it - config.burn_in) % config.thin == 0:
            chain.samples.append(PosteriorSample(
                theta=state["theta"].copy(),
                delta_at_design=np.array(state["delta"]),
                tau2=float(state["tau2"]),
                sigma2=float(state["sigma2"]),
                gamma=float(state["gamma"]),
                log_density=float(current),
            ))

    chain.acceptance = {b: post_acc[b] / post_tried[b] if post_tried[b] else 0.0 for b in blocks}
    chain.acceptance["delta"] = 1.0
    chain.final_steps = {b: (np.atleast_1d(s).tolist() if b == "theta" else float(s)) for b, s in steps.items() if b in blocks}
    for b in blocks:
        if post_tried[b] and post_acc[b] == 0:
            chain.warnings.append(f"block {b} accepted no proposals after burn-in")
    return chain


def _copy_state(st):
    return {k: (np.array(v) if isinstance(v, np.ndarray) else v) for k, v in st.items()}


def predictive_moments(sample: PosteriorSample, data: KOData, x_new):
    """Mean and variance of a new physical response given one posterior sample."""
    x_new = as_points(x_new, data.design.dim)
    k = data.kernel(sample.gamma)
    g = gram(data.design, k, data.jitter)
    s1 = cross_cov(data.design, x_new, k)
    mean = np.asarray(data.model(x_new, sample.theta), dtype=float) + s1.T @ g.solve(sample.delta_at_design)
    p = power_function(data.design, k, x_new, gram_matrix=g)
    var = sample.tau2 * p + sample.sigma2
    if np.any(var < -1e-10):
        raise ConditioningError(f"negative predictive variance {var.min():.3e}")
    return mean, np.maximum(var, sample.sigma2)


def posterior_predict_draw(sample: PosteriorSample, data: KOData, x_new, rng) -> np.ndarray:
    """One draw of the new physical response at each query point (independent marginals)."""
    mean, var = predictive_moments(sample, data, x_new)
    return mean + np.sqrt(var) * rng.standard_normal(mean.shape)


@dataclass(frozen=True)
class ExpensiveHyper:
    """Hyperparameters of the surrogate-based joint model."""

    beta: tuple
    tau2_s: float
    gamma_s: float
    tau2: float
    gamma: float
    sigma2: float
    upsilon: float = 1.5
    upsilon_s: float = 1.5
    mean_kind: str = "constant"


@dataclass(frozen=True, eq=False)
class JointGaussian:
    mean: np.ndarray
    cov: np.ndarray
    n_phys: int
    jitter: float = 1e-10

    def logpdf(self, yp, ys) -> float:
        z = np.concatenate([np.atleast_1d(yp), np.atleast_1d(ys)]).astype(float) - self.mean
        c = np.array(self.cov)
        c[np.diag_indices_from(c)] += self.jitter * max(1.0, float(np.max(np.diag(c))))
        L = cholesky(c, self.jitter)
        w = linalg.solve_triangular(L, z, lower=True)
        return float(-0.5 * w @ w - np.sum(np.log(np.diag(L))) - 0.5 * len(z) * math.log(2 * math.pi))


def mean_function(x, beta, kind) -> np.ndarray:
    x = as_points(x)
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if kind == "constant":
        return np.full(x.shape[0], beta[0])
    if kind == "linear":
        if beta.shape[0] != 1 + x.shape[1]:
            raise InputError("linear mean needs 1 + d coefficients")
        return beta[0] + x @ beta[1:]
    raise InputError(f"unknown mean kind {kind!r}")


def assemble_joint_expensive(phys_x, sim_x, sim_theta, theta0, hyper: ExpensiveHyper) -> JointGaussian:
    """Joint normal of physical and simulator outputs when the simulator is emulated.

    Inputs are augmented as ``x^E = (x_1..x_n, x^s_1..x^s_l)`` with parameters
    ``theta^E = (theta0,...,theta0, theta^s_1..theta^s_l)``; the covariance is
    ``tau2_s C'((x^E, theta^E)) + blockdiag(tau2 C_gamma(x, x) + sigma2 I, 0)``.
    """
    phys_x = as_points(phys_x)
    d = phys_x.shape[1]
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    p = theta0.shape[0]
    sim_x = np.asarray(sim_x, dtype=float).reshape(-1, d)
    sim_theta = np.asarray(sim_theta, dtype=float).reshape(-1, p)
    if sim_x.shape[0] != sim_theta.shape[0]:
        raise InputError("simulator inputs and parameters differ in length")
    for name in ("tau2_s", "gamma_s", "tau2", "gamma", "sigma2"):
        if getattr(hyper, name) < 0:
            raise InputError(f"{name} must be nonnegative")
    n, l = phys_x.shape[0], sim_x.shape[0]
    xe = np.vstack([phys_x, sim_x])
    te = np.vstack([np.tile(theta0, (n, 1)), sim_theta])
    joint = np.hstack([xe, te])
    mean = mean_function(xe, hyper.beta, hyper.mean_kind)
    cov = np.zeros((n + l, n + l))
    if hyper.tau2_s > 0:
        ks = MaternKernel(hyper.upsilon_s, hyper.gamma_s, d + p)
        cov += hyper.tau2_s * ks(joint)
    if hyper.tau2 > 0:
        kd = MaternKernel(hyper.upsilon, hyper.gamma, d)
        cov[:n, :n] += hyper.tau2 * kd(phys_x)
    cov[:n, :n] += hyper.sigma2 * np.eye(n)
    cov = 0.5 * (cov + cov.T)
    return JointGaussian(mean, cov, n)
