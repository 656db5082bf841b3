"""Covariance models, seeded random streams and Gaussian sampling.

Vectors are 1-d arrays of length ``dim``; batches are 2-d arrays with one
sample per row.  Every covariance model exposes the same small surface
(``quad_form_inverse``, ``log_det``, ``whiten``, ``sample_standard``) so the
rest of the package never needs to know which representation it holds.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from gaussmia.errors import (
    DimensionMismatch,
    FactorizationError,
    InconsistentConstraints,
    InvalidParameter,
)

ORTHO_TOL = 1e-8
_U64 = 1 << 64


def _key_to_int(key: int | str) -> int:
    if isinstance(key, (bool, np.bool_)):
        return int(key)
    if isinstance(key, (int, np.integer)):
        key = int(key)
        if key < 0:
            raise InvalidParameter(f"substream keys must be nonnegative, got {key}")
        return key % _U64
    digest = hashlib.blake2b(str(key).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RngStream:
    """A reproducible source of randomness identified by ``(seed, substream)``.

    ``generator()`` always restarts the stream, so two calls hand back
    identical draw sequences.  Independent randomness is obtained with
    ``derive``, which mixes extra keys into a new 64-bit substream index.
    """

    seed: int
    substream: int = 0

    def __post_init__(self) -> None:
        for name in ("seed", "substream"):
            value = getattr(self, name)
            if not 0 <= int(value) < _U64:
                raise InvalidParameter(f"{name} must be a 64-bit unsigned integer, got {value}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.substream),))
        return np.random.Generator(np.random.PCG64(seq))

    def derive(self, *keys: int | str) -> RngStream:
        entropy = [int(self.seed), int(self.substream), *(_key_to_int(k) for k in keys)]
        state = np.random.SeedSequence(entropy).generate_state(1, dtype=np.uint64)
        return RngStream(int(self.seed), int(state[0]))


def _as_rows(x: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    single = arr.ndim == 1
    rows = arr[None, :] if single else arr
    if rows.ndim != 2 or rows.shape[1] != dim:
        raise DimensionMismatch(f"expected trailing dimension {dim}, got shape {arr.shape}")
    return rows, single


class CovarianceModel:
    """Common interface of the covariance representations."""

    dim: int

    def quad_form_inverse(self, y: np.ndarray) -> float | np.ndarray:
        w = self.whiten(y)
        return np.einsum("...i,...i->...", w, w)

    def inner_inverse(self, x: np.ndarray, y: np.ndarray) -> float | np.ndarray:
        """Bilinear form ``x' inv(S) y`` (row-wise for batches)."""
        return np.einsum("...i,...i->...", self.whiten(x), self.whiten(y))

    def whiten(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_det(self) -> float:
        raise NotImplementedError

    def sample_standard(self, gen: np.random.Generator, count: int) -> np.ndarray:
        raise NotImplementedError

    def to_dense(self) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Identity(CovarianceModel):
    dim: int

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise InvalidParameter(f"dim must be positive, got {self.dim}")

    def whiten(self, x):
        rows, single = _as_rows(x, self.dim)
        return rows[0].copy() if single else rows.copy()

    def log_det(self) -> float:
        return 0.0

    def sample_standard(self, gen, count):
        return gen.standard_normal((count, self.dim))

    def to_dense(self):
        return np.eye(self.dim)


@dataclass(frozen=True, eq=False)
class Dense(CovarianceModel):
    """Arbitrary SPD matrix, held together with its lower Cholesky factor."""

    matrix: np.ndarray
    _chol: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        a = np.array(self.matrix, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise DimensionMismatch(f"covariance must be square, got shape {a.shape}")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.T)) > 1e-10 * scale:
            raise FactorizationError("covariance matrix is not symmetric")
        try:
            chol = np.linalg.cholesky(a)
        except np.linalg.LinAlgError as exc:
            raise FactorizationError("covariance matrix is not positive definite") from exc
        a.setflags(write=False)
        chol.setflags(write=False)
        object.__setattr__(self, "matrix", a)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def cholesky(self) -> np.ndarray:
        return self._chol

    def whiten(self, x):
        # L^{-1} x: not the symmetric root, but has the same inner products.
        rows, single = _as_rows(x, self.dim)
        w = scipy.linalg.solve_triangular(self._chol, rows.T, lower=True, check_finite=False).T
        return w[0] if single else w

    def log_det(self) -> float:
        return float(2.0 * np.sum(np.log(np.diag(self._chol))))

    def sample_standard(self, gen, count):
        return gen.standard_normal((count, self.dim)) @ self._chol.T

    def to_dense(self):
        return self.matrix.copy()


@dataclass(frozen=True, eq=False)
class Spiked(CovarianceModel):
    """``I + sigma2 * U U'`` for a column-orthonormal ``U``, kept in low-rank form."""

    basis: np.ndarray
    sigma2: float

    def __post_init__(self) -> None:
        u = np.array(self.basis, dtype=np.float64)
        if u.ndim != 2 or not 1 <= u.shape[1] <= u.shape[0]:
            raise DimensionMismatch(f"basis must be dim x k with 1 <= k <= dim, got {u.shape}")
        if not self.sigma2 >= 0:
            raise InvalidParameter(f"sigma2 must be nonnegative, got {self.sigma2}")
        gram_err = np.max(np.abs(u.T @ u - np.eye(u.shape[1])))
        if gram_err > 1e-10:
            raise InvalidParameter(f"basis columns are not orthonormal (residual {gram_err:.3g})")
        u.setflags(write=False)
        object.__setattr__(self, "basis", u)
        object.__setattr__(self, "sigma2", float(self.sigma2))

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    @property
    def rank(self) -> int:
        return self.basis.shape[1]

    def whiten(self, x):
        rows, single = _as_rows(x, self.dim)
        shrink = 1.0 - 1.0 / np.sqrt(1.0 + self.sigma2)
        w = rows - shrink * (rows @ self.basis) @ self.basis.T
        return w[0] if single else w

    def quad_form_inverse(self, y):
        rows, single = _as_rows(y, self.dim)
        proj = rows @ self.basis
        q = np.einsum("ij,ij->i", rows, rows) - self.sigma2 / (1.0 + self.sigma2) * np.einsum(
            "ij,ij->i", proj, proj
        )
        return float(q[0]) if single else q

    def log_det(self) -> float:
        return self.rank * float(np.log1p(self.sigma2))

    def sample_standard(self, gen, count):
        z = gen.standard_normal((count, self.dim))
        w = gen.standard_normal((count, self.rank))
        return z + np.sqrt(self.sigma2) * (w @ self.basis.T)

    def to_dense(self):
        return np.eye(self.dim) + self.sigma2 * self.basis @ self.basis.T


@dataclass(frozen=True, eq=False)
class GaussianPopulation:
    mean: np.ndarray
    cov: CovarianceModel

    def __post_init__(self) -> None:
        mu = np.array(self.mean, dtype=np.float64)
        if mu.shape != (self.cov.dim,):
            raise DimensionMismatch(f"mean has shape {mu.shape}, covariance dim is {self.cov.dim}")
        mu.setflags(write=False)
        object.__setattr__(self, "mean", mu)

    @property
    def dim(self) -> int:
        return self.cov.dim

    @classmethod
    def centered(cls, cov: CovarianceModel) -> GaussianPopulation:
        return cls(np.zeros(cov.dim), cov)


def sample_population(pop: GaussianPopulation, count: int, rng: RngStream) -> np.ndarray:
    """Draw ``count`` i.i.d. rows from ``pop``."""
    if count < 0:
        raise InvalidParameter(f"count must be nonnegative, got {count}")
    if count == 0:
        return np.empty((0, pop.dim))
    return pop.mean + pop.cov.sample_standard(rng.generator(), count)


def quad_form_inverse(cov: CovarianceModel, y: np.ndarray) -> float:
    return float(cov.quad_form_inverse(np.asarray(y, dtype=np.float64)))


def log_det(cov: CovarianceModel) -> float:
    return cov.log_det()


def whiten(cov: CovarianceModel, x: np.ndarray) -> np.ndarray:
    return cov.whiten(x)


def _orthonormalize(gen: np.random.Generator, dim: int, k: int) -> np.ndarray:
    while True:
        q, r = np.linalg.qr(gen.standard_normal((dim, k)))
        diag = np.diag(r)
        if np.min(np.abs(diag)) > 1e-10 * max(1.0, float(np.max(np.abs(diag)))):
            return q * np.sign(diag)


def sample_uniform_projection(dim: int, k: int, rng: RngStream) -> np.ndarray:
    """Column-orthonormal ``dim x k`` basis of a Haar-uniform ``k``-dim subspace.

    Gaussian matrix followed by QR, with the R factor's diagonal made positive
    so the output is a deterministic function of the draw.
    """
    if not 1 <= k <= dim:
        raise InvalidParameter(f"need 1 <= k <= dim, got k={k}, dim={dim}")
    return _orthonormalize(rng.generator(), dim, k)


def _span_basis(vectors: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    """Orthonormal basis (as columns) for the span of the rows of ``vectors``."""
    if vectors.size == 0:
        return np.empty((vectors.shape[1], 0))
    u, s, _ = np.linalg.svd(vectors.T, full_matrices=False)
    return u[:, s > tol * max(1.0, float(s[0]))]


def constrained_projection_sample(
    pairs: Sequence[tuple[np.ndarray, np.ndarray]], m: int, rng: RngStream
) -> np.ndarray:
    """Uniform rank-``m`` orthogonal projection ``P`` subject to ``P x_i = y_i``.

    The constraints pin ``P`` on span{y_i} (kept) and span{x_i - y_i}
    (annihilated); the remaining ``m - r`` directions are a uniform subspace of
    the orthogonal complement of both.
    """
    if not pairs:
        raise InvalidParameter("at least one (x, y) pair is required")
    xs = np.array([np.asarray(x, dtype=np.float64) for x, _ in pairs])
    ys = np.array([np.asarray(y, dtype=np.float64) for _, y in pairs])
    if xs.shape != ys.shape or xs.ndim != 2:
        raise DimensionMismatch("x and y vectors must share one dimension")
    n, dim = xs.shape
    if not n < m < dim / 2:
        raise InvalidParameter(f"need n < m < dim/2, got n={n}, m={m}, dim={dim}")

    zs = xs - ys
    cross = np.max(np.abs(ys @ zs.T))
    if cross > ORTHO_TOL:
        raise InconsistentConstraints(
            f"inconsistent constraints: span(y) is not orthogonal to span(x - y) (residual {cross:.3g})"
        )

    v1 = _span_basis(ys)
    vz = _span_basis(zs)
    r, s = v1.shape[1], vz.shape[1]
    pinned = np.hstack([v1, vz])
    v2 = scipy.linalg.null_space(pinned.T) if pinned.shape[1] else np.eye(dim)
    if v2.shape[1] != dim - r - s:
        raise InconsistentConstraints("constraint subspaces are not independent")

    proj = v1 @ v1.T
    if m - r > 0:
        u = sample_uniform_projection(dim - r - s, m - r, rng)
        free = v2 @ u
        proj = proj + free @ free.T
    return 0.5 * (proj + proj.T)


def rotate_samples(samples: np.ndarray, rotation: np.ndarray) -> np.ndarray:
    """Apply the orthogonal map ``rotation`` to every row."""
    rot = np.asarray(rotation, dtype=np.float64)
    rows = np.asarray(samples, dtype=np.float64)
    if rot.ndim != 2 or rot.shape[0] != rot.shape[1]:
        raise DimensionMismatch(f"rotation must be square, got {rot.shape}")
    err = np.max(np.abs(rot.T @ rot - np.eye(rot.shape[0])))
    if err > ORTHO_TOL:
        raise InvalidParameter(f"rotation is not orthogonal (residual {err:.3g})")
    if rows.shape[-1] != rot.shape[0]:
        raise DimensionMismatch(f"samples have dim {rows.shape[-1]}, rotation is {rot.shape[0]}")
    return rows @ rot.T


def haar_rotation(dim: int, rng: RngStream) -> np.ndarray:
    """Haar-distributed ``dim x dim`` orthogonal matrix."""
    return _orthonormalize(rng.generator(), dim, dim)
