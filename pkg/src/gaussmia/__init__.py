"""Membership-inference attacks against noisy Gaussian mean releases."""

from gaussmia.attacks import AttackOutcome, CalibratedFPR, FixedC, Membership
from gaussmia.challenges import MiaChallenge, SpikedParams
from gaussmia.errors import MiaLabError
from gaussmia.gaussians import Dense, GaussianPopulation, Identity, RngStream, Spiked
from gaussmia.mechanisms import ReleasedEstimate

__version__ = "0.1.0"

__all__ = [
    "AttackOutcome",
    "CalibratedFPR",
    "Dense",
    "FixedC",
    "GaussianPopulation",
    "Identity",
    "Membership",
    "MiaChallenge",
    "MiaLabError",
    "ReleasedEstimate",
    "RngStream",
    "Spiked",
    "SpikedParams",
]
