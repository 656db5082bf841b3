"""Numerical checks of the closed-form identities and inequalities used by the bounds.

Each check compares a measured quantity (Monte Carlo, quadrature or a dense
linear-algebra oracle) against a predicted closed form and decides pass/fail
at a fixed tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy import integrate, special, stats

from gaussmia.analysis.bounds import condition_gaussian, informed_tv_bound
from gaussmia.analysis.evaluation import evaluate_attacks
from gaussmia.challenges import identity_population, standard_generator
from gaussmia.errors import InvalidParameter
from gaussmia.gaussians import GaussianPopulation, Identity, RngStream, Spiked, sample_uniform_projection
from gaussmia.roster import ATTACK_IDS, make_attack


@dataclass(frozen=True)
class CheckResult:
    check_id: str
    measured: float
    predicted: float
    tolerance: float
    passed: bool
    note: str = ""
    details: dict[str, Any] = field(default_factory=dict, compare=False)


def _unit(gen: np.random.Generator, d: int) -> np.ndarray:
    v = gen.standard_normal(d)
    return v / np.linalg.norm(v)


def _mc_mean(values: np.ndarray) -> tuple[float, float]:
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(values.size))


def _chunks(total: int, size: int):
    for start in range(0, total, size):
        yield min(size, total - start)


# --- TC1: variance of <mu_hat, X0> -------------------------------------------------


def _tc1(params: dict, trials: int, rng: RngStream) -> CheckResult:
    d, n, rho = int(params.get("d", 10)), int(params.get("n", 10)), float(params.get("rho", 0.0))
    k, sigma2 = int(params.get("k", 0)), float(params.get("sigma2", 0.0))
    if k:
        cov = Spiked(sample_uniform_projection(d, k, rng.derive("basis")), sigma2)
    else:
        cov = Identity(d)
    gen = rng.derive("draws").generator()
    scores = []
    for b in _chunks(trials, max(1, 2_000_000 // (d * (n + 2)))):
        rows = cov.sample_standard(gen, b * (n + 2)).reshape(b, n + 2, d)
        mu_hat = rows[:, 1:-1].mean(axis=1) + rho * rows[:, -1]
        scores.append(np.einsum("ij,ij->i", mu_hat, rows[:, 0]))
    s = np.concatenate(scores)
    var = float(s.var(ddof=1))
    fourth = float(np.mean((s - s.mean()) ** 4))
    stderr = math.sqrt(max(fourth - var * var, 0.0) / s.size)
    frob2 = float(np.sum(cov.to_dense() ** 2)) if d <= 400 else d - k + k * (1 + sigma2) ** 2
    predicted = (1.0 / n + rho * rho) * frob2
    tol = 5 * stderr
    return CheckResult("TC1", var, predicted, tol, abs(var - predicted) <= tol)


# --- TC2: determinant of a rank-two update -----------------------------------------


def _tc2_case(v1, v2, gamma):
    v1, v2 = np.asarray(v1, float), np.asarray(v2, float)
    measured = float(np.linalg.det(np.eye(v1.size) + gamma * np.outer(v1, v1) + gamma * np.outer(v2, v2)))
    predicted = 1 + 2 * gamma + gamma**2 * (1 - float(v1 @ v2) ** 2)
    return measured, predicted


def _tc2(params: dict, trials: int, rng: RngStream) -> CheckResult:
    tol = 1e-10
    if "v1" in params:
        cases = [(params["v1"], params["v2"], float(params.get("gamma", 1.0)))]
    else:
        gen = rng.generator()
        cases = []
        for _ in range(trials):
            d = int(gen.integers(2, 12))
            cases.append((_unit(gen, d), _unit(gen, d), float(gen.exponential(5.0))))
    worst = max((_tc2_case(*c) for c in cases), key=lambda mp: abs(mp[0] - mp[1]) / abs(mp[1]))
    rel = abs(worst[0] - worst[1]) / abs(worst[1])
    return CheckResult("TC2", worst[0], worst[1], tol, rel <= tol, note=f"max relative error {rel:.2e}")


# --- TC3: E[|Z|^4 exp(-s |Z|^2)] ----------------------------------------------------


def norm_four_power_forms(d: int, s: float) -> dict[str, float]:
    half = d / 2.0
    return {
        "exponent d/2+2": 4.0 * half * (half + 1.0) / (1.0 + 2.0 * s) ** (half + 2.0),
        "exponent d/2+3": 8.0
        / (1.0 + 2.0 * s) ** (half + 3.0)
        * math.exp(special.gammaln(half + 2.0) - special.gammaln(half)),
    }


def _tc3(params: dict, trials: int, rng: RngStream) -> CheckResult:
    d, s = int(params.get("d", 1)), float(params.get("s", 0.0))
    gen = rng.generator()
    vals = []
    for b in _chunks(trials, max(1, 2_000_000 // d)):
        sq = np.sum(gen.standard_normal((b, d)) ** 2, axis=1)
        vals.append(sq * sq * np.exp(-s * sq))
    mean, stderr = _mc_mean(np.concatenate(vals))
    tol = 5 * stderr
    forms = norm_four_power_forms(d, s)
    matches = {name: abs(mean - value) <= tol for name, value in forms.items()}
    best = min(forms, key=lambda name: abs(mean - forms[name]))
    note = "; ".join(f"{name}: {forms[name]:.6g} {'matches' if ok else 'rejected'}" for name, ok in matches.items())
    return CheckResult("TC3", mean, forms[best], tol, any(matches.values()), note=note, details={"matches": matches})


# --- TC4: TV between chi-square perturbed variables --------------------------------


def histogram_tv(a: np.ndarray, b: np.ndarray, bins: int = 400) -> float:
    """Half L1 distance between histograms on equal-probability bins of the pooled sample."""
    pooled = np.concatenate([a, b])
    edges = np.quantile(pooled, np.linspace(0.0, 1.0, bins + 1))
    edges[0], edges[-1] = -np.inf, np.inf
    pa = np.histogram(a, edges)[0] / a.size
    pb = np.histogram(b, edges)[0] / b.size
    return 0.5 * float(np.abs(pa - pb).sum())


def _tc4(params: dict, trials: int, rng: RngStream) -> CheckResult:
    gamma, k, delta = float(params.get("gamma", 0.05)), int(params.get("k", 50)), float(params.get("delta", 1.0))
    bins = int(params.get("bins", 400))
    if not (0 < gamma < 1 and k > 4):
        raise InvalidParameter("TC4 needs 0 < gamma < 1 and k > 4")
    gen = rng.generator()
    x1 = gen.standard_normal(trials)
    lhs = x1 + (1 + gamma) * gen.chisquare(k, trials)
    x1b = gen.standard_normal(trials)
    rhs = x1b + delta + gen.chisquare(k, trials)
    measured = histogram_tv(lhs, rhs, bins)
    c = abs(delta)
    predicted = math.sqrt(gamma * c / 4 + gamma**2 * k / 4 + c * c / (4 * k - 16))
    tol = 3 * math.sqrt(bins / trials)
    return CheckResult("TC4", measured, predicted, tol, measured <= predicted + tol)


# --- TC5: KL between shifted and scaled chi-squares --------------------------------


def chi2_shift_scale_kls(k: int, a: float, r: float, points: int = 200_001) -> tuple[float, float]:
    """Trapezoid-rule values of KL(a+Y || (1+r)Y) and KL(a+(1+r)Y || Y), Y ~ chi2(k)."""
    chi = stats.chi2(k)
    upper = a + (1 + r) * chi.isf(1e-15)
    x = np.linspace(a, upper, points)
    with np.errstate(divide="ignore", invalid="ignore"):
        pairs = [
            (chi.logpdf(x - a), chi.logpdf(x / (1 + r)) - math.log1p(r)),
            (chi.logpdf((x - a) / (1 + r)) - math.log1p(r), chi.logpdf(x)),
        ]
        out = []
        for logp, logq in pairs:
            p = np.exp(logp)
            integrand = np.where(p > 0, p * (logp - logq), 0.0)
            out.append(float(integrate.trapezoid(integrand, x)))
    return out[0], out[1]


def _tc5(params: dict, trials: int, rng: RngStream) -> CheckResult:
    k, a, r = int(params.get("k", 10)), float(params.get("a", 1.0)), float(params.get("r", 0.1))
    if not (k > 4 and a >= 0 and r >= 0):
        raise InvalidParameter("TC5 needs k > 4, a >= 0, r >= 0")
    kl_fwd, kl_rev = chi2_shift_scale_kls(k, a, r)
    measured = max(kl_fwd, kl_rev)
    predicted = a * a / (2 * k - 8) + k * r * r / 4 + a * r / 2
    rel = 1e-4
    return CheckResult(
        "TC5",
        measured,
        predicted,
        rel * predicted,
        measured <= predicted * (1 + rel),
        note=f"KL(a+Y||(1+r)Y)={kl_fwd:.6g}, KL(a+(1+r)Y||Y)={kl_rev:.6g}",
    )


# --- TC6: conjugate Gaussian posterior ----------------------------------------------


def _tc6_case(m: int, d: int, sigma: float, y: np.ndarray) -> float:
    s2 = sigma * sigma
    ybar = y.mean(axis=0)
    mean_formula = m * s2 / (m * s2 + 1) * ybar
    cov_formula = s2 / (m * s2 + 1) * np.eye(d)
    # joint of (mu, Y_1..Y_m), stacked coordinate blocks of length d
    block = np.full((m + 1, m + 1), s2) + np.diag([0.0] + [1.0] * m)
    joint = np.kron(block, np.eye(d))
    cmean, ccov = condition_gaussian(np.zeros((m + 1) * d), joint, list(range(d, (m + 1) * d)), y.reshape(-1))
    return max(float(np.max(np.abs(cmean - mean_formula))), float(np.max(np.abs(ccov - cov_formula))))


def _tc6(params: dict, trials: int, rng: RngStream) -> CheckResult:
    tol = 1e-8
    gen = rng.generator()
    if "m" in params:
        m, d, sigma = int(params["m"]), int(params.get("d", 1)), float(params.get("sigma", 1.0))
        y = np.asarray(params["y"], float).reshape(m, d) if "y" in params else gen.standard_normal((m, d))
        cases = [(m, d, sigma, y)]
    else:
        cases = []
        for _ in range(trials):
            m, d = int(gen.integers(1, 7)), int(gen.integers(1, 5))
            sigma = float(gen.uniform(0.2, 3.0))
            cases.append((m, d, sigma, gen.normal(0.0, 1.0 + sigma, (m, d))))
    err = max(_tc6_case(*c) for c in cases)
    return CheckResult("TC6", err, 0.0, tol, err <= tol, note="max |formula - generic conditioning|")


# --- TC7: chi-square density-ratio integral -----------------------------------------


def _tc7(params: dict, trials: int, rng: RngStream) -> CheckResult:
    d, lam = int(params.get("d", 5)), float(params.get("lam", 0.5))
    gen = rng.derive("directions").generator()
    v1 = np.asarray(params["v1"], float) if "v1" in params else _unit(gen, d)
    v2 = np.asarray(params["v2"], float) if "v2" in params else _unit(gen, d)
    covs = [np.eye(d) - (1 - lam) * np.outer(v, v) for v in (v1, v2)]
    precs = [np.linalg.inv(c) for c in covs]
    logdets = [float(np.linalg.slogdet(c)[1]) for c in covs]
    combined = precs[0] + precs[1] - np.eye(d)
    predicted = math.exp(-0.5 * (logdets[0] + logdets[1]) - 0.5 * float(np.linalg.slogdet(combined)[1]))

    draw = rng.derive("draws").generator()
    vals = []
    for b in _chunks(trials, 200_000):
        x = draw.standard_normal((b, d))
        log_ratio = sum(
            -0.5 * ld - 0.5 * np.einsum("ij,jk,ik->i", x, p - np.eye(d), x) for ld, p in zip(logdets, precs)
        )
        vals.append(np.exp(log_ratio))
    mean, stderr = _mc_mean(np.concatenate(vals))
    tol = 5 * stderr
    return CheckResult("TC7", mean, predicted, tol, abs(mean - predicted) <= tol)


# --- TC8: conditional law given a linear combination --------------------------------


def _tc8_case(a: float, b: float, c: float) -> float:
    joint = np.array([[1.0, 0.0, a], [0.0, 1.0, b], [a, b, a * a + b * b]])
    cmean, ccov = condition_gaussian(np.zeros(3), joint, [2], [c])
    # free coordinates are (X, Y); Y is the second
    denom = a * a + b * b
    return max(abs(cmean[1] - c * b / denom), abs(ccov[1, 1] - a * a / denom))


def _tc8(params: dict, trials: int, rng: RngStream) -> CheckResult:
    tol = 1e-8
    if "a" in params:
        cases = [(float(params["a"]), float(params["b"]), float(params.get("c", 0.0)))]
    else:
        gen = rng.generator()
        cases = [tuple(gen.uniform(-3.0, 3.0, 3)) for _ in range(trials)]
    err = max(_tc8_case(*c) for c in cases)
    return CheckResult("TC8", err, 0.0, tol, err <= tol, note="max |formula - generic conditioning|")


# --- TC9: no attack beats the informed TV bound ------------------------------------


def _tc9(params: dict, trials: int, rng: RngStream) -> CheckResult:
    n, d, rho = int(params.get("n", 30)), int(params.get("d", 12)), float(params.get("rho", 0.3))
    m = int(params.get("m", 2 * d + n + 1))
    roster = {name: make_attack(name, calibration_rng=rng.derive("calibration")) for name in ATTACK_IDS}
    reports = evaluate_attacks(roster, standard_generator(identity_population(d), n, m, rho), trials, rng)
    best = max(reports, key=lambda name: reports[name].advantage)
    measured = reports[best].advantage
    predicted = informed_tv_bound(n, d, rho)
    tol = 3 * math.sqrt(1.0 / trials)
    return CheckResult(
        "TC9",
        measured,
        predicted,
        tol,
        measured <= predicted + tol,
        note=f"best attack {best}",
        details={name: r.advantage for name, r in reports.items()},
    )


_CHECKS: dict[str, tuple[Callable[[dict, int, RngStream], CheckResult], int]] = {
    "TC1": (_tc1, 200_000),
    "TC2": (_tc2, 100),
    "TC3": (_tc3, 1_000_000),
    "TC4": (_tc4, 200_000),
    "TC5": (_tc5, 0),
    "TC6": (_tc6, 100),
    "TC7": (_tc7, 200_000),
    "TC8": (_tc8, 100),
    "TC9": (_tc9, 2000),
}

CHECK_IDS = tuple(_CHECKS)

# Parameter sets exercised by the default theory suite.
DEFAULT_SUITE: tuple[tuple[str, dict], ...] = (
    ("TC1", {"d": 10, "n": 10, "rho": 0.0}),
    ("TC1", {"d": 20, "n": 5, "rho": 0.5, "k": 3, "sigma2": 4.0}),
    ("TC2", {}),
    ("TC3", {"d": 1, "s": 0.0}),
    ("TC3", {"d": 4, "s": 0.5}),
    ("TC3", {"d": 10, "s": 1.0}),
    ("TC4", {}),
    ("TC5", {}),
    ("TC5", {"k": 6, "a": 0.3, "r": 0.2}),
    ("TC6", {}),
    ("TC7", {}),
    ("TC8", {}),
    ("TC9", {}),
)


def run_theory_check(
    check_id: str, params: dict | None = None, trials: int | None = None, rng: RngStream | None = None
) -> CheckResult:
    """Run one named check; ``trials`` defaults to a per-check Monte Carlo size."""
    if check_id not in _CHECKS:
        raise InvalidParameter(f"unknown check {check_id!r}; choose from {', '.join(CHECK_IDS)}")
    fn, default_trials = _CHECKS[check_id]
    trials = default_trials if trials is None else trials
    if default_trials and trials < 1:
        raise InvalidParameter("trials must be positive")
    return fn(dict(params or {}), trials, rng or RngStream(0))


def run_theory_suite(rng: RngStream) -> list[CheckResult]:
    return [
        run_theory_check(cid, params, rng=rng.derive(cid, i)) for i, (cid, params) in enumerate(DEFAULT_SUITE)
    ]
