"""Mean-release mechanism under attack and the attacker's precision estimator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from gaussmia.errors import DimensionMismatch, InsufficientReferenceSamples, InvalidParameter
from gaussmia.gaussians import CovarianceModel, RngStream


@dataclass(frozen=True, eq=False)
class ReleasedEstimate:
    mu_hat: np.ndarray
    rho: float
    n: int

    @property
    def dim(self) -> int:
        return self.mu_hat.shape[0]


@dataclass(frozen=True, eq=False)
class PrecisionEstimate:
    """Inverse of an empirical second-moment matrix.

    ``cho`` is the Cholesky factorization of the covariance estimate itself,
    which is cheaper and more accurate to apply than ``H`` for single solves.
    """

    H: np.ndarray
    samples_used: int
    centered: bool
    cho: tuple

    def bilinear(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(x @ scipy.linalg.cho_solve(self.cho, y, check_finite=False))


def _row_mean(data: np.ndarray) -> np.ndarray:
    # Sorting each column first fixes the summation order, so the mean does
    # not depend on how the rows are ordered.
    return np.sort(data, axis=0).sum(axis=0) / data.shape[0]


def noisy_empirical_mean(
    data: np.ndarray, rho: float, noise_cov: CovarianceModel, rng: RngStream
) -> ReleasedEstimate:
    """Release ``mean(data) + rho * Z`` with ``Z ~ N(0, noise_cov)``."""
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[0] == 0:
        raise InvalidParameter("noisy_empirical_mean needs at least one data row")
    if data.shape[1] != noise_cov.dim:
        raise DimensionMismatch(f"data dim {data.shape[1]} != noise covariance dim {noise_cov.dim}")
    if rho < 0:
        raise InvalidParameter(f"rho must be nonnegative, got {rho}")
    mu_hat = _row_mean(data)
    if rho > 0:
        mu_hat = mu_hat + rho * noise_cov.sample_standard(rng.generator(), 1)[0]
    return ReleasedEstimate(mu_hat=mu_hat, rho=float(rho), n=data.shape[0])


def empirical_precision(samples: np.ndarray, assume_zero_mean: bool = False) -> PrecisionEstimate:
    """Invert the empirical covariance of ``samples`` (no regularization).

    With ``assume_zero_mean`` the uncentered second moment ``Y'Y / m`` is used;
    otherwise rows are centered and normalized by ``m - 1``.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2:
        raise DimensionMismatch(f"samples must be a matrix, got shape {samples.shape}")
    m, dim = samples.shape
    need = dim + 1 if assume_zero_mean else dim + 2
    if m < need:
        raise InsufficientReferenceSamples(
            f"insufficient reference samples: {m} rows for dim {dim} (need >= {need})"
        )
    if assume_zero_mean:
        sigma = samples.T @ samples / m
    else:
        centered = samples - samples.mean(axis=0)
        sigma = centered.T @ centered / (m - 1)
    sigma = 0.5 * (sigma + sigma.T)
    try:
        cho = scipy.linalg.cho_factor(sigma, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise InsufficientReferenceSamples("insufficient reference samples: covariance estimate is singular") from exc
    diag = np.abs(np.diag(cho[0]))
    if np.min(diag) <= 1e-12 * np.max(diag):
        raise InsufficientReferenceSamples("insufficient reference samples: covariance estimate is singular")
    h = scipy.linalg.cho_solve(cho, np.eye(dim), check_finite=False)
    h = 0.5 * (h + h.T)
    return PrecisionEstimate(H=h, samples_used=m, centered=not assume_zero_mean, cho=cho)
