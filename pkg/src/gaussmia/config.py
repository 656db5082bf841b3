"""Flat ``key = value`` experiment configuration."""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field

from gaussmia.errors import ConfigError
from gaussmia.roster import ATTACK_IDS

EXPERIMENTS = ("game", "spiked-game", "sweep", "hardness", "theory", "bounds")
THRESHOLD_MODES = ("fixed-c", "calibrated")
SWEEP_AXES = ("n", "d", "m", "k", "sigma2", "rho", "attack")
_U64 = 1 << 64


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int
    n: int | None = None
    d: int | None = None
    m: int | None = None
    k: int | None = None
    rho: float | None = None
    sigma2: float | None = None
    attack: tuple[str, ...] = ("informed-np",)
    threshold_mode: str = "fixed-c"
    c: float = 0.5
    fpr_target: float = 0.45
    trials: int = 1000
    threads: int = field(default_factory=lambda: os.cpu_count() or 1)
    sweep: tuple[str, tuple] | None = None

    def with_overrides(self, **changes) -> ExperimentConfig:
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})


_INT_KEYS = ("n", "d", "m", "k", "trials", "threads")
_FLOAT_KEYS = ("rho", "sigma2", "c", "fpr_target")
_KEYS = ("experiment", "seed", *_INT_KEYS, *_FLOAT_KEYS, "attack", "threshold_mode", "sweep")


def _parse_int(text: str) -> int:
    value = int(text, 10)
    return value


def _parse_float(text: str) -> float:
    return float(text)


def _parse_attacks(text: str) -> tuple[str, ...]:
    names = tuple(a.strip() for a in text.split(","))
    for a in names:
        if a not in ATTACK_IDS:
            raise ValueError(f"unknown attack {a!r} (choose from {', '.join(ATTACK_IDS)})")
    return names


def _parse_axis_values(axis: str, text: str) -> tuple:
    parts = [p.strip() for p in text.split(",")]
    if not parts or any(p == "" for p in parts):
        raise ValueError("empty sweep value")
    if axis == "attack":
        return _parse_attacks(text)
    conv = _parse_int if axis in _INT_KEYS else _parse_float
    return tuple(conv(p) for p in parts)


def _parse_sweep(text: str) -> tuple[str, tuple]:
    axis, sep, values = text.partition(":")
    axis = axis.strip()
    if not sep:
        raise ValueError("sweep must look like 'axis: v1, v2, ...'")
    if axis not in SWEEP_AXES:
        raise ValueError(f"cannot sweep over {axis!r} (choose from {', '.join(SWEEP_AXES)})")
    return axis, _parse_axis_values(axis, values)


def parse_config(text: str) -> ExperimentConfig:
    values: dict[str, object] = {}
    lines: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigError(f"expected 'key = value' (line {lineno})")
        if key not in _KEYS:
            raise ConfigError(f"unknown key {key!r} (line {lineno})")
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (line {lineno})")
        try:
            if key == "seed":
                parsed: object = _parse_int(value)
                if not 0 <= parsed < _U64:
                    raise ValueError("seed must be a 64-bit unsigned integer")
            elif key in _INT_KEYS:
                parsed = _parse_int(value)
            elif key in _FLOAT_KEYS:
                parsed = _parse_float(value)
            elif key == "attack":
                parsed = _parse_attacks(value)
            elif key == "sweep":
                parsed = _parse_sweep(value)
            elif key == "experiment":
                if value not in EXPERIMENTS:
                    raise ValueError(f"experiment must be one of {', '.join(EXPERIMENTS)}")
                parsed = value
            else:
                if value not in THRESHOLD_MODES:
                    raise ValueError(f"threshold_mode must be one of {', '.join(THRESHOLD_MODES)}")
                parsed = value
        except ValueError as exc:
            raise ConfigError(f"malformed value for {key!r}: {exc} (line {lineno})") from exc
        values[key] = parsed
        lines[key] = lineno

    if "seed" not in values:
        raise ConfigError("missing required key 'seed'")
    if "experiment" not in values:
        raise ConfigError("missing required key 'experiment'")
    cfg = ExperimentConfig(**values)
    _validate(cfg, lines)
    return cfg


def _validate(cfg: ExperimentConfig, lines: dict[str, int]) -> None:
    def fail(key: str, msg: str) -> None:
        where = f" (line {lines[key]})" if key in lines else ""
        raise ConfigError(f"invalid {key!r}: {msg}{where}")

    for key in ("n", "trials", "threads"):
        value = getattr(cfg, key)
        if value is not None and value < 1:
            fail(key, "must be positive")
    for key in ("d", "k"):
        value = getattr(cfg, key)
        if value is not None and value < 1:
            fail(key, "must be positive")
    if cfg.m is not None and cfg.m < 0:
        fail("m", "must be nonnegative")
    for key in ("rho", "sigma2"):
        value = getattr(cfg, key)
        if value is not None and value < 0:
            fail(key, "must be nonnegative")
    if cfg.c <= 0:
        fail("c", "must be positive")
    if not 0 < cfg.fpr_target < 1:
        fail("fpr_target", "must lie in (0, 1)")
    if cfg.experiment == "sweep" and cfg.sweep is None:
        fail("experiment", "a sweep experiment needs a 'sweep' axis")


def _render_value(value) -> str:
    if isinstance(value, tuple):
        return ", ".join(_render_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_config(cfg: ExperimentConfig) -> str:
    out = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if f.name == "sweep":
            axis, vals = value
            out.append(f"sweep = {axis}: {_render_value(vals)}")
        else:
            out.append(f"{f.name} = {_render_value(value)}")
    return "\n".join(out) + "\n"


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
