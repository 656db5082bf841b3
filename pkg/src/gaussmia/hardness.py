"""Hardness of estimating a Mahalanobis norm from few samples.

NULL draws come from N(0, I).  ALT draws come from N(0, S_v) where S_v shrinks
a uniformly random direction v to variance 1/(31 d).  Estimating y' inv(S) y
to within a factor 1/2 would separate the two, and with fewer than order d
samples no test can.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg
from scipy import special

from gaussmia.errors import DimensionMismatch, InsufficientReferenceSamples, InvalidParameter
from gaussmia.gaussians import RngStream

REDUCTION_THRESHOLD = 1.75
MIN_HARD_DIM = 7


class Hypothesis(enum.Enum):
    NULL = "null"
    ALT = "alt"


@dataclass(frozen=True, eq=False)
class HardInstance:
    hypothesis: Hypothesis
    v: np.ndarray | None
    dim: int

    def __post_init__(self) -> None:
        if (self.v is None) != (self.hypothesis is Hypothesis.NULL):
            raise InvalidParameter("v must be given exactly under ALT")
        if self.v is not None and abs(float(np.linalg.norm(self.v)) - 1.0) > 1e-10:
            raise InvalidParameter("v must be a unit vector")

    @property
    def shrink(self) -> float:
        return 1.0 / (31.0 * self.dim)

    def covariance(self) -> np.ndarray:
        """Dense covariance; only meant for small ``dim``."""
        cov = np.eye(self.dim)
        if self.v is not None:
            cov -= (1.0 - self.shrink) * np.outer(self.v, self.v)
        return cov

    def quad_form_inverse(self, y: np.ndarray) -> float:
        y = np.asarray(y, float)
        base = float(y @ y)
        if self.v is None:
            return base
        return base + (31.0 * self.dim - 1.0) * float(self.v @ y) ** 2


Sampler = Callable[[int, np.random.Generator], np.ndarray]


def sample_hard_instance(dim: int, hypothesis: Hypothesis, rng: RngStream) -> tuple[HardInstance, Sampler]:
    """Draw an instance and return it with a sampler ``(count, gen) -> rows``."""
    if dim < MIN_HARD_DIM:
        raise InvalidParameter(f"hard instances need dim >= {MIN_HARD_DIM}, got {dim}")
    if hypothesis is Hypothesis.NULL:
        return HardInstance(hypothesis, None, dim), lambda count, gen: gen.standard_normal((count, dim))

    v = rng.generator().standard_normal(dim)
    v /= np.linalg.norm(v)
    inst = HardInstance(hypothesis, v, dim)
    scale = 1.0 - math.sqrt(inst.shrink)

    def sampler(count: int, gen: np.random.Generator) -> np.ndarray:
        z = gen.standard_normal((count, dim))
        return z - scale * np.outer(z @ v, v)

    return inst, sampler


def estimate_quadratic(y: np.ndarray, samples: np.ndarray, pseudo_inverse: bool = False) -> float:
    """``y' inv(S_hat) y`` with ``S_hat`` the zero-mean second moment of ``samples``.

    ``pseudo_inverse`` swaps the inverse for the Moore-Penrose pseudo-inverse,
    which stays defined when there are fewer samples than dimensions.
    """
    y = np.asarray(y, float)
    samples = np.asarray(samples, float)
    if samples.ndim != 2 or samples.shape[1] != y.shape[0]:
        raise DimensionMismatch(f"y has length {y.shape[0]}, samples have shape {samples.shape}")
    if abs(float(np.linalg.norm(y)) - 1.0) > 1e-8:
        raise InvalidParameter("y must be a unit vector")
    n, dim = samples.shape
    if n == 0:
        raise InsufficientReferenceSamples("insufficient reference samples: no rows")
    sigma = samples.T @ samples / n
    if pseudo_inverse:
        return float(y @ np.linalg.pinv(sigma, rcond=1e-10, hermitian=True) @ y)
    if n < dim + 1:
        raise InsufficientReferenceSamples(
            f"insufficient reference samples: {n} rows for dim {dim} (need >= {dim + 1})"
        )
    try:
        cho = scipy.linalg.cho_factor(sigma, lower=True)
    except np.linalg.LinAlgError as exc:
        raise InsufficientReferenceSamples("insufficient reference samples: covariance estimate is singular") from exc
    return float(y @ scipy.linalg.cho_solve(cho, y))


def reduction_tester(y: np.ndarray, samples: np.ndarray, pseudo_inverse: bool = False) -> int:
    """1 (reject NULL) iff the quadratic estimate exceeds 1.75."""
    return int(estimate_quadratic(y, samples, pseudo_inverse) > REDUCTION_THRESHOLD)


@dataclass(frozen=True)
class IngsterBounds:
    chi2_mixture_bound: float
    tv_bound: float


def ingster_bounds(n: int, d: int) -> IngsterBounds:
    """Chi-square mixture moment (a Beta-function ratio) and the TV bound it implies."""
    if n < 0 or d <= n + 1:
        raise InvalidParameter(f"need 0 <= n and d > n + 1, got n={n}, d={d}")
    log_ratio = special.betaln(0.5, (d - n - 1) / 2.0) - special.betaln(0.5, (d - 1) / 2.0)
    return IngsterBounds(
        chi2_mixture_bound=math.exp(log_ratio),
        tv_bound=0.5 * math.sqrt((n + 1) / (d - n - 1)),
    )


def _uniform_sphere(gen: np.random.Generator, count: int, dim: int) -> np.ndarray:
    z = gen.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def lb_norm_indicator(v: np.ndarray, y: np.ndarray) -> bool:
    dim = v.shape[0]
    return 1.0 + (31.0 * dim - 1.0) * float(v @ y) ** 2 >= 4.0


def lb_norm_check(dim: int, trials: int, rng: RngStream) -> float:
    """Fraction of uniform ``v`` with ``e1' inv(S_v) e1 >= 4``."""
    if dim < MIN_HARD_DIM:
        raise InvalidParameter(f"need dim >= {MIN_HARD_DIM}, got {dim}")
    if trials < 1:
        raise InvalidParameter("trials must be positive")
    vs = _uniform_sphere(rng.generator(), trials, dim)
    return float(np.mean(1.0 + (31.0 * dim - 1.0) * vs[:, 0] ** 2 >= 4.0))


def mixture_chi2_mc(n: int, d: int, trials: int, rng: RngStream) -> tuple[float, float]:
    """Monte Carlo mean and stderr of ``(1 - <v1, v2>^2)^(-n/2)`` over uniform sphere pairs."""
    gen = rng.generator()
    vals = []
    for start in range(0, trials, 20_000):
        b = min(20_000, trials - start)
        ip = np.einsum("ij,ij->i", _uniform_sphere(gen, b, d), _uniform_sphere(gen, b, d))
        vals.append((1.0 - ip * ip) ** (-n / 2.0))
    x = np.concatenate(vals)
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def _e1(dim: int) -> np.ndarray:
    y = np.zeros(dim)
    y[0] = 1.0
    return y


def estimate_accuracy_rate(
    dim: int, n: int, hypothesis: Hypothesis, trials: int, rng: RngStream, alpha: float = 0.5
) -> float:
    """Fraction of trials where the estimate is within a factor ``1 +- alpha`` of the truth (y = e1)."""
    y = _e1(dim)
    hits = 0
    for t in range(trials):
        inst, sampler = sample_hard_instance(dim, hypothesis, rng.derive(t, "instance"))
        truth = inst.quad_form_inverse(y)
        phi = estimate_quadratic(y, sampler(n, rng.derive(t, "samples").generator()))
        hits += (1 - alpha) * truth <= phi <= (1 + alpha) * truth
    return hits / trials


def reduction_rates(
    dim: int, n: int, trials: int, rng: RngStream, pseudo_inverse: bool = False
) -> tuple[float, float]:
    """Rejection rates ``(Pr_ALT(T=1), Pr_NULL(T=1))`` of the reduction tester.

    ALT draws a fresh ``v`` per trial, i.e. samples from the uniform mixture.
    """
    y = _e1(dim)
    rates = {}
    for hyp in Hypothesis:
        ones = 0
        for t in range(trials):
            _, sampler = sample_hard_instance(dim, hyp, rng.derive(hyp.value, t, "instance"))
            rows = sampler(n, rng.derive(hyp.value, t, "samples").generator())
            ones += reduction_tester(y, rows, pseudo_inverse)
        rates[hyp] = ones / trials
    return rates[Hypothesis.ALT], rates[Hypothesis.NULL]


def run_hardness_suite(rng: RngStream, scale: float = 1.0):
    """The executable hardness checks; ``scale`` shrinks trial counts for quick runs."""
    from gaussmia.analysis.theory import CheckResult

    def trials(base: int) -> int:
        return max(20, int(base * scale))

    results = []
    for dim in (7, 1000):
        t = trials(10_000)
        frac = lb_norm_check(dim, t, rng.derive("lb-norm", dim))
        tol = 3 * math.sqrt(0.6 * 0.4 / t)
        results.append(CheckResult(f"lb-norm d={dim}", frac, 0.6, tol, frac >= 0.6 - tol))

    for n, d in ((2, 10), (4, 20), (8, 40)):
        mean, stderr = mixture_chi2_mc(n, d, trials(100_000), rng.derive("chi2", n, d))
        bound = ingster_bounds(n, d).chi2_mixture_bound
        results.append(
            CheckResult(f"chi2 identity n={n} d={d}", mean, bound, 5 * stderr, abs(mean - bound) <= 5 * stderr)
        )

    for hyp in Hypothesis:
        rate = estimate_accuracy_rate(50, 800, hyp, trials(200), rng.derive("accuracy", hyp.value))
        results.append(CheckResult(f"half-accuracy {hyp.value} d=50 n=800", rate, 0.90, 0.0, rate >= 0.90))

    t = trials(400)
    p_alt, p_null = reduction_rates(50, 800, t, rng.derive("tester-fpr"))
    tol = 3 * math.sqrt(0.05 * 0.95 / t)
    results.append(CheckResult("tester null rate d=50 n=800", p_null, 0.05, tol, p_null <= 0.05 + tol))

    p_alt, p_null = reduction_rates(50, 12, t, rng.derive("tester-adv"), pseudo_inverse=True)
    adv = p_alt - p_null
    stderr = math.sqrt((p_alt * (1 - p_alt) + p_null * (1 - p_null)) / t)
    bound = 2 * ingster_bounds(12, 50).tv_bound
    results.append(
        CheckResult("tester advantage d=50 n=12", adv, bound, 3 * stderr, adv <= bound + 3 * stderr, note="pseudo-inverse")
    )
    return results
