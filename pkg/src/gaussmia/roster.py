"""Named attack closures usable by the evaluation harness and the CLI."""

from __future__ import annotations

from typing import Callable

from gaussmia import attacks as atk
from gaussmia.attacks import AttackOutcome, CalibratedFPR, FixedC, Membership, ThresholdPolicy
from gaussmia.challenges import AttackerView
from gaussmia.errors import InvalidParameter
from gaussmia.gaussians import RngStream

Attack = Callable[[AttackerView, RngStream], AttackOutcome]

ATTACK_IDS = (
    "informed-np",
    "known-cov",
    "unknown-cov",
    "restricted",
    "sufficient-stat",
    "always-in",
    "coin",
)


def min_aux(attack_id: str, d: int) -> int:
    """Smallest number of aux rows the attack accepts."""
    return {
        "known-cov": 2,
        "unknown-cov": 2 * d + 2,
        "restricted": atk.RESTRICTED_MIN_AUX,
    }.get(attack_id, 0)


def make_attack(
    attack_id: str,
    policy: ThresholdPolicy = FixedC(),
    fpr_target: float = 0.45,
    calibration_rng: RngStream | None = None,
    sufficient_c: float = 1.0,
) -> Attack:
    """Build the closure ``(view, rng) -> AttackOutcome`` for ``attack_id``.

    ``calibration_rng`` is shared by every trial so that a calibrated threshold
    is simulated once per configuration rather than once per trial.
    """
    if isinstance(policy, CalibratedFPR) and attack_id in ("informed-np", "known-cov") and calibration_rng is None:
        raise InvalidParameter("calibrated thresholds need a calibration_rng")

    if attack_id == "informed-np":
        return lambda v, rng: atk.informed_np_attack(v.population, v.released, v.target, policy, calibration_rng)
    if attack_id == "known-cov":
        return lambda v, rng: atk.known_cov_attack(
            v.population.cov, v.aux, v.released, v.target, policy, calibration_rng
        )
    if attack_id == "unknown-cov":
        if not isinstance(policy, FixedC):
            raise InvalidParameter("unknown-cov supports the fixed-c threshold mode only")
        return lambda v, rng: atk.unknown_cov_attack(v.aux, v.released, v.target, policy)
    if attack_id == "restricted":
        return lambda v, rng: atk.restricted_threshold_attack(v.aux, v.released, v.target, fpr_target)
    if attack_id == "sufficient-stat":
        return lambda v, rng: atk.sufficient_stat_attack(v.released, v.target, sufficient_c)
    if attack_id == "always-in":
        return lambda v, rng: AttackOutcome(1.0, Membership.IN, 0.0)
    if attack_id == "coin":
        return lambda v, rng: AttackOutcome.from_score(rng.generator().random(), 0.5)
    raise InvalidParameter(f"unknown attack {attack_id!r}; choose from {', '.join(ATTACK_IDS)}")
