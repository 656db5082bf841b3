"""Closed-form thresholds, TV bounds and Gaussian divergences."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from gaussmia.errors import DimensionMismatch, FactorizationError, InvalidParameter


@dataclass(frozen=True)
class BoundReport:
    d_star: float
    tv_bound: float
    kl_exact: float | None = None


def d_star(n: int, rho: float) -> float:
    """Dimension above which a fully informed attacker succeeds: ``n + n^2 rho^2``."""
    if n < 1 or rho < 0:
        raise InvalidParameter(f"need n >= 1 and rho >= 0, got n={n}, rho={rho}")
    return n + n * n * rho * rho


def informed_tv_bound(n: int, d: int, rho: float) -> float:
    """Upper bound ``sqrt(d / d_star)`` on the TV between IN and OUT pairs."""
    return math.sqrt(d / d_star(n, rho))


def known_cov_blocks(n: int, m: int, rho: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate 2x2 covariances of (target, release) given the aux mean.

    Returns ``(in_cov, out_cov)``; the full joint covariance is the Kronecker
    product with ``I_d``.
    """
    alpha2 = 1.0 / n + rho * rho
    shared = 1.0 / (m + 1)
    out_cov = np.array([[1.0 + shared, shared], [shared, shared + alpha2]])
    in_cov = np.array([[1.0 + shared, shared + 1.0 / n], [shared + 1.0 / n, shared + alpha2]])
    return in_cov, out_cov


def known_cov_bounds(n: int, m: int, d: int, rho: float) -> BoundReport:
    """Exact KL(IN || OUT) and the resulting TV bound when only the mean is unknown."""
    if n < 4 or m < 2 or d < 0 or rho < 0:
        raise InvalidParameter(f"need n >= 4, m >= 2, d >= 0, rho >= 0; got n={n}, m={m}, d={d}, rho={rho}")
    in_cov, out_cov = known_cov_blocks(n, m, rho)
    det_in = np.linalg.det(in_cov)
    det_out = np.linalg.det(out_cov)
    trace = float(np.trace(np.linalg.solve(out_cov, in_cov)))
    kl = 0.5 * d * (math.log(det_out / det_in) - 2.0 + trace)
    denom = n * n / (4.0 * (m + 1)) + n / 8.0 + n * n * rho * rho / 4.0
    return BoundReport(d_star=d_star(n, rho), tv_bound=math.sqrt(d / denom), kl_exact=max(kl, 0.0))


def known_cov_kl_upper(n: int, m: int, d: int, rho: float) -> float:
    return d / (n * n / (2.0 * (m + 1)) + n / 4.0 + n * n * rho * rho / 2.0)


def _cholesky(cov: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("covariance is not positive definite") from exc


def gaussian_kl(mu1, cov1, mu2, cov2) -> float:
    """KL( N(mu1, cov1) || N(mu2, cov2) )."""
    mu1, mu2 = np.atleast_1d(np.asarray(mu1, float)), np.atleast_1d(np.asarray(mu2, float))
    cov1, cov2 = np.atleast_2d(np.asarray(cov1, float)), np.atleast_2d(np.asarray(cov2, float))
    d = mu1.shape[0]
    if mu2.shape != (d,) or cov1.shape != (d, d) or cov2.shape != (d, d):
        raise DimensionMismatch("gaussian_kl arguments have inconsistent dimensions")
    l1, l2 = _cholesky(cov1), _cholesky(cov2)
    logdet1 = 2.0 * np.sum(np.log(np.diag(l1)))
    logdet2 = 2.0 * np.sum(np.log(np.diag(l2)))
    m = scipy.linalg.solve_triangular(l2, l1, lower=True)
    diff = scipy.linalg.solve_triangular(l2, mu2 - mu1, lower=True)
    kl = 0.5 * (logdet2 - logdet1 - d + np.sum(m * m) + diff @ diff)
    return max(float(kl), 0.0)


def condition_gaussian(mean, cov, observed: list[int], values) -> tuple[np.ndarray, np.ndarray]:
    """Mean and covariance of the unobserved coordinates given the observed ones."""
    mean = np.asarray(mean, float)
    cov = np.asarray(cov, float)
    obs = np.asarray(observed, dtype=int)
    free = np.setdiff1d(np.arange(mean.shape[0]), obs)
    s_oo = cov[np.ix_(obs, obs)]
    s_fo = cov[np.ix_(free, obs)]
    gain = np.linalg.solve(s_oo, s_fo.T).T
    cond_mean = mean[free] + gain @ (np.asarray(values, float) - mean[obs])
    cond_cov = cov[np.ix_(free, free)] - gain @ s_fo.T
    return cond_mean, cond_cov
