"""Flat ``key=value`` configuration shared by every pipeline stage."""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

from .errors import ConfigError

log = logging.getLogger(__name__)

# allowable ranges for the tunable thresholds; outside them we only warn
TUNING_RANGES = {
    "tau_quantile": (0.70, 0.90),
    "gamma": (1, 15),
    "epsilon": (0.25, 1.0),
    "xi": (0.6, 1.0),
}


@dataclass(frozen=True)
class PipelineConfig:
    # mr-core
    cell_size_m: float = 20.0
    max_gap_s: float = 120.0
    seed: int = 0
    p_test: float = 0.2
    p_dc: float = 0.375
    # localizer
    knn_k: int = 5
    missing_penalty: float = 2.0
    # detection
    tau_quantile: float = 0.8
    gamma: int = 5
    epsilon: float = 0.5
    ss_match: str = "serving"
    # repair
    xi: float = 0.7
    k_max: int = 15
    d_scale: float = 500.0
    c_floor: float = 0.05
    correct_repair: str = "grid"
    # synthetic world
    origin_lon: float = 121.20
    origin_lat: float = 31.25
    area_width_m: float = 4000.0
    area_height_m: float = 4000.0
    n_stations: int = 50
    tx_power_dbm: float = 30.0
    path_loss_exponent: float = 3.5
    noise_sigma_db: float = 1.0
    road_grid_spacing_m: float = 250.0
    n_zones: int = 6
    zone_coverage: float = 0.15
    zone_extra_sigma_db: float = 20.0
    n_devices: int = 60
    duration_s: float = 1800.0
    interval: str = "uniform:1,60"
    null_neighbor_ids: bool = False
    # execution
    workers: int = 1

    def __post_init__(self):
        positive = ("cell_size_m", "max_gap_s", "d_scale", "area_width_m", "area_height_m",
                    "road_grid_spacing_m", "duration_s")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("p_test", "p_dc", "tau_quantile"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if not 0.0 < self.xi <= 1.0:
            raise ConfigError(f"xi must lie in (0, 1], got {self.xi}")
        if not 0.0 < self.epsilon <= 1.0:
            raise ConfigError(f"epsilon must lie in (0, 1], got {self.epsilon}")
        if self.gamma < 0 or self.k_max < 1 or self.knn_k < 1 or self.workers < 1:
            raise ConfigError("gamma must be >= 0; k_max, knn_k and workers >= 1")
        if self.n_stations < 7:
            raise ConfigError("n_stations must be at least 7")
        if self.noise_sigma_db < 0 or self.zone_extra_sigma_db < 0:
            raise ConfigError("noise sigmas must be non-negative")
        if self.ss_match not in ("multiset", "serving", "none"):
            raise ConfigError(f"unknown ss_match {self.ss_match!r}")
        if self.correct_repair not in ("grid", "tau"):
            raise ConfigError(f"unknown correct_repair {self.correct_repair!r}")
        for name, (lo, hi) in TUNING_RANGES.items():
            v = getattr(self, name)
            if not lo <= v <= hi:
                log.warning("%s=%s outside the usual range [%s, %s]", name, v, lo, hi)

    def replace(self, **changes) -> "PipelineConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in known})


def _coerce(name: str, raw: str):
    types = {f.name: f.type for f in fields(PipelineConfig)}
    if name not in types:
        raise ConfigError(f"unknown config key {name!r}")
    kind = types[name]
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low not in ("1", "0", "true", "false", "yes", "no"):
                raise ValueError(raw)
            return low in ("1", "true", "yes")
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw.strip()
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = line.split("=", 1)
        key = key.strip()
        out[key] = _coerce(key, value)
    return out


def load_config(path: Optional[str | Path] = None, **overrides) -> PipelineConfig:
    values = {}
    if path is not None:
        try:
            values.update(parse_config_text(Path(path).read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    values.update({k: v for k, v in overrides.items() if v is not None})
    return PipelineConfig(**values)
