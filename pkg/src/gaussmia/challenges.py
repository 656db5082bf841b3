"""Membership games: the standard IN/OUT challenge and spiked hard instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gaussmia.attacks import Membership
from gaussmia.errors import InvalidParameter
from gaussmia.gaussians import (
    GaussianPopulation,
    Identity,
    RngStream,
    Spiked,
    sample_population,
    sample_uniform_projection,
)
from gaussmia.mechanisms import ReleasedEstimate, noisy_empirical_mean

# Constant fixed in the lower-bound parameter argument (3/c^2 <= 0.01/4).
LB_SLACK_CONSTANT = 35
N_DIR_MAX = 10**12


@dataclass(frozen=True)
class GameParams:
    n: int
    d: int
    m: int
    rho: float
    k: int = 0
    sigma2: float = 0.0


@dataclass(frozen=True)
class SpikedParams:
    n: int
    d: int
    k: int
    m: int
    sigma2: float
    rho: float

    def __post_init__(self) -> None:
        if not 1 <= self.k <= self.d:
            raise InvalidParameter(f"need 1 <= k <= d, got k={self.k}, d={self.d}")
        if self.m < 0 or self.n < 1:
            raise InvalidParameter(f"need n >= 1 and m >= 0, got n={self.n}, m={self.m}")
        if self.sigma2 < 0 or self.rho < 0:
            raise InvalidParameter("sigma2 and rho must be nonnegative")


@dataclass(frozen=True, eq=False)
class AttackerView:
    """What an attack may look at.  ``population`` is only for informed attacks."""

    aux: np.ndarray
    released: ReleasedEstimate
    target: np.ndarray
    params: GameParams
    population: GaussianPopulation


@dataclass(frozen=True, eq=False)
class MiaChallenge:
    aux: np.ndarray
    released: ReleasedEstimate
    target: np.ndarray
    truth: Membership
    params: GameParams
    population: GaussianPopulation

    def view(self) -> AttackerView:
        return AttackerView(self.aux, self.released, self.target, self.params, self.population)


def _draw_game(pop: GaussianPopulation, n: int, m: int, rho: float, rng: RngStream):
    rows = sample_population(pop, n + 1 + m, rng.derive("rows"))
    x0, data, aux = rows[0], rows[1 : n + 1], rows[n + 1 :]
    released = noisy_empirical_mean(data, rho, pop.cov, rng.derive("noise"))
    return x0, data[0], aux, released


def generate_standard_challenge(
    pop: GaussianPopulation, n: int, m: int, rho: float, truth: Membership, rng: RngStream
) -> MiaChallenge:
    """One round of the membership game: target is ``X_1`` (IN) or ``X_0`` (OUT)."""
    if n < 1 or m < 0:
        raise InvalidParameter(f"need n >= 1 and m >= 0, got n={n}, m={m}")
    x0, x1, aux, released = _draw_game(pop, n, m, rho, rng)
    target = x1 if truth is Membership.IN else x0
    params = GameParams(n=n, d=pop.dim, m=m, rho=float(rho))
    return MiaChallenge(aux, released, target, truth, params, pop)


def generate_spiked_challenge(p: SpikedParams, rng: RngStream) -> tuple[MiaChallenge, MiaChallenge]:
    """Hard instance with a fresh uniformly random spike subspace.

    Returns the OUT and IN challenges; both share the same aux rows and
    release and differ only in the target.
    """
    basis = sample_uniform_projection(p.d, p.k, rng.derive("subspace"))
    pop = GaussianPopulation.centered(Spiked(basis, p.sigma2))
    x0, x1, aux, released = _draw_game(pop, p.n, p.m, p.rho, rng)
    params = GameParams(n=p.n, d=p.d, m=p.m, rho=float(p.rho), k=p.k, sigma2=float(p.sigma2))
    out = MiaChallenge(aux, released, x0, Membership.OUT, params, pop)
    inn = MiaChallenge(aux, released, x1, Membership.IN, params, pop)
    return out, inn


def standard_generator(pop: GaussianPopulation, n: int, m: int, rho: float):
    def generate(truth: Membership, rng: RngStream) -> MiaChallenge:
        return generate_standard_challenge(pop, n, m, rho, truth, rng)

    return generate


def spiked_generator(p: SpikedParams):
    def generate(truth: Membership, rng: RngStream) -> MiaChallenge:
        out, inn = generate_spiked_challenge(p, rng)
        return inn if truth is Membership.IN else out

    return generate


def identity_population(d: int) -> GaussianPopulation:
    return GaussianPopulation.centered(Identity(d))


@dataclass(frozen=True)
class LbParameterReport:
    sample_budget: bool
    direction_count: bool
    direction_range: bool
    variance: bool
    dimension: bool

    @property
    def overall(self) -> bool:
        return all(
            (self.sample_budget, self.direction_count, self.direction_range, self.variance, self.dimension)
        )


def lb_parameter_check(p: SpikedParams, c_dim: float, n_dir: int) -> LbParameterReport:
    """Evaluate the parameter conditions under which no sample-based attack succeeds."""
    d_star = p.n + p.n**2 * p.rho**2
    return LbParameterReport(
        sample_budget=400 * p.m <= d_star,
        direction_count=p.k == p.m + n_dir,
        direction_range=4 * LB_SLACK_CONSTANT**2 <= n_dir <= N_DIR_MAX,
        variance=p.sigma2 >= c_dim * p.d,
        dimension=p.d >= c_dim * d_star,
    )
