"""Membership-inference attacks against a released mean.

Every attack returns an :class:`AttackOutcome`; the decision is IN exactly
when the score reaches the threshold.  Attacks that compare against
``c * d / n`` take a :class:`ThresholdPolicy`.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

import numpy as np

from gaussmia.errors import DimensionMismatch, InsufficientReferenceSamples, InvalidParameter
from gaussmia.gaussians import CovarianceModel, GaussianPopulation, RngStream
from gaussmia.mechanisms import ReleasedEstimate, empirical_precision

CALIBRATION_DRAWS = 2000
RESTRICTED_MIN_AUX = 20


class Membership(enum.Enum):
    IN = "IN"
    OUT = "OUT"


@dataclass(frozen=True)
class AttackOutcome:
    score: float
    decision: Membership
    threshold_used: float

    @classmethod
    def from_score(cls, score: float, threshold: float) -> AttackOutcome:
        decision = Membership.IN if score >= threshold else Membership.OUT
        return cls(float(score), decision, float(threshold))


@dataclass(frozen=True)
class FixedC:
    """Threshold ``c * d / n``."""

    c: float = 0.5

    def __post_init__(self) -> None:
        if not self.c > 0:
            raise InvalidParameter(f"c must be positive, got {self.c}")


@dataclass(frozen=True)
class CalibratedFPR:
    """Threshold at the ``1 - target`` quantile of simulated OUT scores."""

    target: float = 0.45
    draws: int = CALIBRATION_DRAWS

    def __post_init__(self) -> None:
        if not 0 < self.target < 1:
            raise InvalidParameter(f"FPR target must lie in (0, 1), got {self.target}")
        if self.draws < 1:
            raise InvalidParameter("calibration needs at least one draw")


ThresholdPolicy = FixedC | CalibratedFPR


def _check_dims(dim: int, **vectors: np.ndarray) -> None:
    for name, v in vectors.items():
        if v.shape[-1] != dim:
            raise DimensionMismatch(f"{name} has dim {v.shape[-1]}, expected {dim}")


@functools.lru_cache(maxsize=64)
def _simulated_null_quantile(
    dim: int, n: int, rho: float, ref_size: int, holdout: bool, target: float, draws: int, rng: RngStream
) -> float:
    """Quantile of whitened OUT-challenge scores.

    In whitened coordinates the population is N(0, I), so simulating there is
    exact for any covariance the attacker knows.  ``ref_size > 0`` subtracts
    a reference mean from the release and ``holdout`` a fresh point from the
    target, mirroring the known-covariance attack.
    """
    gen = rng.generator()
    scores = np.empty(draws)
    chunk = max(1, 4_000_000 // (dim * (n + ref_size + 3)))
    for start in range(0, draws, chunk):
        b = min(chunk, draws - start)
        data = gen.standard_normal((b, n, dim))
        released = data.mean(axis=1) + rho * gen.standard_normal((b, dim))
        target_vec = gen.standard_normal((b, dim))
        if ref_size:
            released = released - gen.standard_normal((b, ref_size, dim)).mean(axis=1)
        if holdout:
            target_vec = target_vec - gen.standard_normal((b, dim))
        scores[start : start + b] = np.einsum("ij,ij->i", target_vec, released)
    return float(np.quantile(scores, 1.0 - target))


def _threshold(
    policy: ThresholdPolicy, dim: int, est: ReleasedEstimate, rng: RngStream | None, ref_size: int = 0, holdout: bool = False
) -> float:
    if isinstance(policy, FixedC):
        return policy.c * dim / est.n
    if rng is None:
        raise InvalidParameter("a calibrated threshold needs an RngStream")
    return _simulated_null_quantile(dim, est.n, est.rho, ref_size, holdout, policy.target, policy.draws, rng)


def informed_np_attack(
    pop: GaussianPopulation,
    est: ReleasedEstimate,
    target: np.ndarray,
    policy: ThresholdPolicy = FixedC(),
    rng: RngStream | None = None,
) -> AttackOutcome:
    """Likelihood-ratio style test of an attacker who knows the population."""
    target = np.asarray(target, dtype=np.float64)
    _check_dims(pop.dim, target=target, mu_hat=est.mu_hat)
    score = pop.cov.inner_inverse(target - pop.mean, est.mu_hat - pop.mean)
    return AttackOutcome.from_score(score, _threshold(policy, pop.dim, est, rng))


def _reference_size(est: ReleasedEstimate, available: int) -> int:
    inv_rho2 = math.ceil(1.0 / est.rho**2) if est.rho > 0 else est.n
    return max(1, min(est.n, inv_rho2, available))


def known_cov_attack(
    cov: CovarianceModel,
    aux: np.ndarray,
    est: ReleasedEstimate,
    target: np.ndarray,
    policy: ThresholdPolicy = FixedC(),
    rng: RngStream | None = None,
) -> AttackOutcome:
    """Whitened correlation after centering both sides on reference data.

    The first ``min(n, ceil(1/rho^2), m-1)`` aux rows give a mean estimate;
    the last row is a holdout subtracted from the target.
    """
    aux = np.asarray(aux, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if aux.ndim != 2 or aux.shape[0] < 2:
        raise InsufficientReferenceSamples(
            f"insufficient reference samples: known_cov_attack needs m >= 2, got {aux.shape[0] if aux.ndim == 2 else 0}"
        )
    _check_dims(cov.dim, aux=aux, target=target, mu_hat=est.mu_hat)
    m2 = _reference_size(est, aux.shape[0] - 1)
    ref_mean = aux[:m2].mean(axis=0)
    holdout = aux[-1]
    score = cov.inner_inverse(est.mu_hat - ref_mean, target - holdout)
    return AttackOutcome.from_score(score, _threshold(policy, cov.dim, est, rng, ref_size=m2, holdout=True))


def unknown_cov_split(m: int, dim: int, est: ReleasedEstimate) -> tuple[int, int]:
    """Sizes ``(m1, m2)`` of the precision and reference-mean blocks."""
    if m < 2 * dim + 2:
        raise InsufficientReferenceSamples(
            f"insufficient reference samples: unknown_cov_attack needs m >= 2*dim + 2 = {2 * dim + 2}, got {m}"
        )
    m2 = _reference_size(est, m - 2 * dim - 1)
    return m - m2 - 1, m2


def unknown_cov_attack(
    aux: np.ndarray,
    est: ReleasedEstimate,
    target: np.ndarray,
    policy: ThresholdPolicy = FixedC(),
    assume_zero_mean: bool = False,
) -> AttackOutcome:
    """Three-way split of aux: precision estimate, reference mean, holdout."""
    aux = np.asarray(aux, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if aux.ndim != 2:
        raise DimensionMismatch("aux must be a matrix")
    dim = aux.shape[1]
    _check_dims(dim, target=target, mu_hat=est.mu_hat)
    if not isinstance(policy, FixedC):
        raise InvalidParameter("unknown_cov_attack supports FixedC thresholds only")
    m1, m2 = unknown_cov_split(aux.shape[0], dim, est)
    precision = empirical_precision(aux[:m1], assume_zero_mean=assume_zero_mean)
    ref_mean = aux[m1 : m1 + m2].mean(axis=0)
    holdout = aux[-1]
    score = precision.bilinear(est.mu_hat - ref_mean, target - holdout)
    return AttackOutcome.from_score(score, policy.c * dim / est.n)


def restricted_threshold_attack(
    aux: np.ndarray, est: ReleasedEstimate, target: np.ndarray, fpr_target: float = 0.45
) -> AttackOutcome:
    """Distribution-free statistic ``<x, mu_hat>`` with a threshold set from aux.

    Aux rows are fresh population draws, so their scores are exchangeable with
    an OUT target's score.  The threshold is the ``ceil((1 - f)(m + 1))``-th
    smallest aux score, which keeps the OUT rejection rate at most ``f``.
    """
    aux = np.asarray(aux, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if not 0 < fpr_target < 1:
        raise InvalidParameter(f"fpr_target must lie in (0, 1), got {fpr_target}")
    if aux.ndim != 2 or aux.shape[0] < RESTRICTED_MIN_AUX:
        got = aux.shape[0] if aux.ndim == 2 else 0
        raise InsufficientReferenceSamples(
            f"insufficient reference samples: restricted attack needs m >= {RESTRICTED_MIN_AUX}, got {got}"
        )
    _check_dims(est.dim, aux=aux, target=target)
    ref_scores = np.sort(aux @ est.mu_hat)
    m = ref_scores.shape[0]
    rank = min(m, math.ceil((1.0 - fpr_target) * (m + 1)))
    return AttackOutcome.from_score(float(target @ est.mu_hat), ref_scores[rank - 1])


def sufficient_stat_attack(est: ReleasedEstimate, target: np.ndarray, c: float = 1.0) -> AttackOutcome:
    """Zero-aux attack on ``sqrt(d) * cos(target, mu_hat)``."""
    target = np.asarray(target, dtype=np.float64)
    _check_dims(est.dim, target=target)
    norm_x = float(np.linalg.norm(target))
    norm_mu = float(np.linalg.norm(est.mu_hat))
    if norm_x == 0 or norm_mu == 0:
        raise InvalidParameter("sufficient_stat_attack needs nonzero target and release")
    score = math.sqrt(est.dim) * float(target @ est.mu_hat) / (norm_x * norm_mu)
    return AttackOutcome.from_score(score, c)
