"""Quick invariant checks runnable from the command line (``kocal selftest``)."""
from __future__ import annotations

import numpy as np

from . import bayes, kernel as kern, native, regress
from .experiments import make_design
from .models import dot_model


def _random_design(rng, n, d):
    return make_design("stratified", n, [[0.0, 1.0]] * d, rng)


def check_interpolation(rng):
    worst = 0.0
    for _ in range(20):
        d = int(rng.integers(1, 3))
        k = kern.MaternKernel(float(rng.choice([1.0, 1.5, 2.5])), float(rng.uniform(0.5, 3.0)), d)
        design = _random_design(rng, int(rng.integers(2, 30)), d)
        y = rng.standard_normal(design.n)
        s = native.interpolate(design, y, k)
        worst = max(worst, float(np.max(np.abs(s(design.points) - y)) / np.max(np.abs(y))))
    return worst <= 1e-8, f"max relative node error {worst:.2e}"


def check_pythagorean(rng):
    worst = 0.0
    for _ in range(20):
        k = kern.MaternKernel(1.5, float(rng.uniform(0.5, 2.0)), 1)
        centers = _random_design(rng, 10, 1)
        f = native.NativeElement(k, centers.points, rng.standard_normal(10))
        design = centers.subset(np.arange(5))
        s = native.interpolate(design, f(design.points), k, jitter=0.0).as_element()
        lhs = s.norm_sq() + (f - s).norm_sq()
        worst = max(worst, abs(lhs - f.norm_sq()) / f.norm_sq())
    return worst <= 1e-6, f"max relative defect {worst:.2e}"


def check_spectral_sandwich(rng):
    bad = 0
    for ups in (1.0, 1.5, 2.0):
        for d in (1, 2):
            c1, c2 = kern.spectral_bounds(ups, 0.5, 2.0, d)
            for g in np.linspace(0.5, 2.0, 5):
                k = kern.MaternKernel(ups, g, d)
                for w in np.logspace(-3, 3, 20):
                    omega = np.full(d, w / np.sqrt(d))
                    v = kern.spectral_density(omega, k)
                    env = (1.0 + w * w) ** (-(ups + d / 2))
                    bad += v < c2 * env * (1 - 1e-12) or v > c1 * env * (1 + 1e-12)
    return bad == 0, f"{bad} violations"


def check_profile_closed_form(rng):
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(1, 6))
        k = kern.MaternKernel(1.5, 1.0, 1)
        design = _random_design(rng, n, 1)
        lam = float(10 ** rng.uniform(-3, 1))
        y = rng.standard_normal(n)
        prob = regress.CalibrationProblem(design, y, dot_model(1), [[-1.0, 1.0]], k, lam)
        theta = rng.uniform(-1, 1, 1)
        r = prob.residuals(theta)
        a = regress.kernel_ridge(r, prob.gram, lam)
        S = prob.gram.entries
        direct = np.sum((r - S @ a) ** 2) + lam * a @ S @ a
        worst = max(worst, abs(regress.profile_objective(theta, prob) - direct) / max(direct, 1e-300))
    return worst <= 1e-10, f"max relative defect {worst:.2e}"


def check_gibbs_ratio(rng):
    design = _random_design(rng, 4, 1)
    data = bayes.KOData(design, rng.standard_normal(4), dot_model(1), 1.5)
    prior = bayes.PriorSpec(theta=[[-1, 1]], tau2=(0.0, 10.0))
    theta, tau2, sigma2, gamma = np.array([0.3]), 0.7, 0.2, 1.0
    mean, cov = bayes.gibbs_delta(theta, tau2, sigma2, gamma, data)
    prec = np.linalg.inv(cov)
    worst = 0.0
    for _ in range(50):
        a, b = rng.standard_normal(4), rng.standard_normal(4)
        lp = [bayes.log_posterior_cheap(theta, v, tau2, sigma2, gamma, data, prior) for v in (a, b)]
        lq = [-0.5 * (v - mean) @ prec @ (v - mean) for v in (a, b)]
        diff = (lp[0] - lp[1]) - (lq[0] - lq[1])
        worst = max(worst, abs(diff) / max(1.0, abs(lp[0] - lp[1])))
    return worst <= 1e-8, f"max relative log-ratio defect {worst:.2e}"


def check_joint_assembly(rng):
    worst = np.inf
    for _ in range(10):
        n, l = int(rng.integers(1, 4)), int(rng.integers(0, 4))
        hyper = bayes.ExpensiveHyper(beta=(0.3,), tau2_s=1.2, gamma_s=0.8, tau2=0.5, gamma=1.1, sigma2=0.1)
        joint = bayes.assemble_joint_expensive(
            rng.uniform(0, 1, (n, 1)), rng.uniform(0, 1, (l, 1)), rng.uniform(0, 1, (l, 1)), np.array([0.4]), hyper)
        sym = np.max(np.abs(joint.cov - joint.cov.T))
        if sym > 0:
            return False, "covariance not symmetric"
        worst = min(worst, float(np.linalg.eigvalsh(joint.cov).min()))
    return worst >= -1e-8, f"min eigenvalue {worst:.2e}"


CHECKS = {
    "interpolation": check_interpolation,
    "pythagorean": check_pythagorean,
    "spectral_sandwich": check_spectral_sandwich,
    "profile_closed_form": check_profile_closed_form,
    "gibbs_ratio": check_gibbs_ratio,
    "joint_assembly": check_joint_assembly,
}


def run_selftest(seed: int = 0, out=print) -> bool:
    ok_all = True
    for i, (name, check) in enumerate(CHECKS.items()):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        try:
            ok, detail = check(rng)
        except Exception as exc:  # report, keep going
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        ok_all &= bool(ok)
        out(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    return ok_all
