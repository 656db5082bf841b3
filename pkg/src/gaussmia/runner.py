"""Run configured membership games and write the results as CSV."""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass

from gaussmia.analysis.bounds import d_star, informed_tv_bound
from gaussmia.analysis.evaluation import evaluate_attacks
from gaussmia.attacks import CalibratedFPR, FixedC
from gaussmia.challenges import SpikedParams, identity_population, spiked_generator, standard_generator
from gaussmia.config import ExperimentConfig
from gaussmia.errors import ConfigError, MiaLabError
from gaussmia.gaussians import RngStream
from gaussmia.roster import make_attack


@dataclass(frozen=True)
class ResultRow:
    experiment_id: str
    attack: str
    n: int
    d: int
    m: int
    k: int
    sigma2: float
    rho: float
    trials: int
    tpr: float
    fpr: float
    advantage: float
    ci_low: float
    ci_high: float
    d_star: float
    tv_bound: float
    seed: int
    wall_ms: int


FIELDS = tuple(f.name for f in dataclasses.fields(ResultRow))
GAME_EXPERIMENTS = ("game", "spiked-game", "sweep")


def sweep_points(cfg: ExperimentConfig) -> list[ExperimentConfig]:
    if cfg.sweep is None:
        return [cfg]
    axis, values = cfg.sweep
    if axis == "attack":
        return [dataclasses.replace(cfg, attack=tuple(values))]
    return [dataclasses.replace(cfg, **{axis: v}) for v in values]


def _require(cfg: ExperimentConfig, *keys: str) -> None:
    missing = [k for k in keys if getattr(cfg, k) is None]
    if missing:
        raise ConfigError(f"experiment {cfg.experiment!r} needs {', '.join(missing)}")


def _policy(cfg: ExperimentConfig):
    return CalibratedFPR(cfg.fpr_target) if cfg.threshold_mode == "calibrated" else FixedC(cfg.c)


def _run_point(cfg: ExperimentConfig, index: int) -> list[ResultRow]:
    _require(cfg, "n", "d", "m", "rho")
    spiked = cfg.experiment == "spiked-game"
    if spiked:
        _require(cfg, "k", "sigma2")
        generator = spiked_generator(SpikedParams(cfg.n, cfg.d, cfg.k, cfg.m, cfg.sigma2, cfg.rho))
    else:
        generator = standard_generator(identity_population(cfg.d), cfg.n, cfg.m, cfg.rho)

    base = RngStream(cfg.seed).derive(index)
    policy = _policy(cfg)
    roster = {}
    for name in cfg.attack:
        # calibrated mode only applies to attacks that have a calibrated variant
        p = policy if name in ("informed-np", "known-cov") else FixedC(cfg.c)
        roster[name] = make_attack(
            name, p, fpr_target=cfg.fpr_target, calibration_rng=base.derive("calibration")
        )
    reports = evaluate_attacks(roster, generator, cfg.trials, base.derive("trials"), cfg.threads)
    ds = d_star(cfg.n, cfg.rho)
    tv = informed_tv_bound(cfg.n, cfg.d, cfg.rho)
    return [
        ResultRow(
            experiment_id=f"{cfg.experiment}-{index}",
            attack=name,
            n=cfg.n,
            d=cfg.d,
            m=cfg.m,
            k=cfg.k if spiked else 0,
            sigma2=float(cfg.sigma2) if spiked else 0.0,
            rho=float(cfg.rho),
            trials=r.trials,
            tpr=r.tpr,
            fpr=r.fpr,
            advantage=r.advantage,
            ci_low=r.ci_low,
            ci_high=r.ci_high,
            d_star=ds,
            tv_bound=tv,
            seed=cfg.seed,
            wall_ms=r.wall_ms,
        )
        for name, r in reports.items()
    ]


def run_experiment(cfg: ExperimentConfig) -> list[ResultRow]:
    """One row per (sweep point, attack).  Deterministic given the config."""
    if cfg.experiment not in GAME_EXPERIMENTS:
        raise ConfigError(f"experiment {cfg.experiment!r} produces no result rows; use its own subcommand")
    rows: list[ResultRow] = []
    for index, point in enumerate(sweep_points(cfg)):
        try:
            rows.extend(_run_point(point, index))
        except MiaLabError as exc:
            axis = f", {cfg.sweep[0]}={getattr(point, cfg.sweep[0])}" if cfg.sweep else ""
            raise type(exc)(f"sweep point {index}{axis}: {exc}") from exc
    return rows


def format_value(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_csv(rows: list[ResultRow], path: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(FIELDS)
            writer.writerows([format_value(getattr(r, f)) for f in FIELDS] for r in rows)
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
