"""Monte Carlo evaluation of membership attacks."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy import stats

from gaussmia.attacks import AttackOutcome, Membership
from gaussmia.challenges import AttackerView, MiaChallenge
from gaussmia.errors import EvaluationError, InvalidParameter
from gaussmia.gaussians import RngStream

Attack = Callable[[AttackerView, RngStream], AttackOutcome]
Generator = Callable[[Membership, RngStream], MiaChallenge]

_Z95 = float(stats.norm.ppf(0.975))
_ARMS = (Membership.IN, Membership.OUT)


@dataclass(frozen=True)
class EvalReport:
    tpr: float
    fpr: float
    advantage: float
    ci_low: float
    ci_high: float
    trials: int
    wall_ms: int


def wilson_interval(successes: int, total: int, z: float = _Z95) -> tuple[float, float]:
    if total <= 0:
        raise InvalidParameter("wilson_interval needs a positive total")
    p = successes / total
    denom = 1.0 + z * z / total
    centre = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1 - p) / total + z * z / (4 * total * total)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def report_from_counts(in_hits: int, out_hits: int, trials: int, wall_ms: int = 0) -> EvalReport:
    tpr = in_hits / trials
    fpr = out_hits / trials
    tpr_lo, tpr_hi = wilson_interval(in_hits, trials)
    fpr_lo, fpr_hi = wilson_interval(out_hits, trials)
    adv = tpr - fpr
    # Combining the two marginal intervals this way is conservative.
    return EvalReport(
        tpr=tpr,
        fpr=fpr,
        advantage=adv,
        ci_low=min(adv, tpr_lo - fpr_hi),
        ci_high=max(adv, tpr_hi - fpr_lo),
        trials=trials,
        wall_ms=wall_ms,
    )


def trial_streams(rng: RngStream, trial: int, arm: Membership) -> tuple[RngStream, RngStream]:
    """Substreams for the challenge and the attack of one trial."""
    base = rng.derive(trial, 1 if arm is Membership.IN else 0)
    return base.derive("challenge"), base.derive("attack")


def evaluate_attacks(
    attacks: Mapping[str, Attack],
    generator: Generator,
    trials: int,
    rng: RngStream,
    threads: int = 1,
) -> dict[str, EvalReport]:
    """Run every attack on the same ``trials`` IN and ``trials`` OUT challenges.

    Each (trial, arm) pair draws from its own substream, so the reports do not
    depend on ``threads`` or on scheduling order.
    """
    if trials < 1:
        raise InvalidParameter(f"trials must be positive, got {trials}")
    if threads < 1:
        raise InvalidParameter(f"threads must be positive, got {threads}")
    names = list(attacks)
    jobs = [(t, arm) for arm in _ARMS for t in range(trials)]

    def run(job: tuple[int, Membership]) -> np.ndarray:
        trial, arm = job
        challenge_rng, attack_rng = trial_streams(rng, trial, arm)
        try:
            view = generator(arm, challenge_rng).view()
        except Exception as exc:
            raise EvaluationError(f"challenge generation failed (trial {trial}, arm {arm.value}): {exc}") from exc
        said_in = np.zeros(len(names), dtype=bool)
        for i, name in enumerate(names):
            try:
                outcome = attacks[name](view, attack_rng)
            except Exception as exc:
                raise EvaluationError(f"attack {name!r} failed (trial {trial}, arm {arm.value}): {exc}") from exc
            said_in[i] = outcome.decision is Membership.IN
        return said_in

    start = time.perf_counter()
    if threads == 1:
        results = [run(job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, jobs, chunksize=max(1, len(jobs) // (8 * threads))))
    wall_ms = int(round(1000 * (time.perf_counter() - start)))

    hits = np.array(results, dtype=bool)
    in_hits = hits[:trials].sum(axis=0)
    out_hits = hits[trials:].sum(axis=0)
    return {
        name: report_from_counts(int(in_hits[i]), int(out_hits[i]), trials, wall_ms)
        for i, name in enumerate(names)
    }


def evaluate_attack(attack: Attack, generator: Generator, trials: int, rng: RngStream, threads: int = 1) -> EvalReport:
    return evaluate_attacks({"attack": attack}, generator, trials, rng, threads)["attack"]
