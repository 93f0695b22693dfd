"""Seeded synthetic world: stations, a Manhattan road grid, device walks and MR samples.

Every random stream is keyed by ``(seed, device_index, purpose)`` so a device's
track and readings do not depend on how many other devices are generated or
in which order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Optional

import numpy as np

from .errors import ConfigError
from .grid import BBox, Projection
from .mr import MAX_CELLS, CellObservation, MrSample
from .stations import BaseStation

BASE_EPOCH_MS = 1_500_000_000_000
MIN_SPEED, MAX_SPEED = 1.0, 15.0
TURN_PROB = 0.3

_TRACK, _NOISE = 1, 2


@dataclass(frozen=True)
class InterferenceZone:
    lon: float
    lat: float
    radius_m: float
    extra_sigma_db: float


@dataclass(frozen=True)
class WorldConfig:
    bbox: BBox
    n_stations: int = 50
    path_loss_exponent: float = 3.5
    noise_sigma_db: float = 1.0
    interference_zones: tuple = ()
    road_grid_spacing_m: float = 250.0
    seed: int = 0
    tx_power_dbm: float = 30.0
    null_neighbor_ids: bool = False

    def __post_init__(self):
        if self.n_stations < MAX_CELLS:
            raise ConfigError(f"n_stations must be >= {MAX_CELLS}")
        if self.noise_sigma_db < 0 or any(z.extra_sigma_db < 0 for z in self.interference_zones):
            raise ConfigError("noise sigmas must be non-negative")
        if self.road_grid_spacing_m <= 0:
            raise ConfigError("road_grid_spacing_m must be positive")


@dataclass(frozen=True)
class World:
    config: WorldConfig
    stations: tuple  # sorted by station identity
    projection: Projection
    road_x: np.ndarray = field(repr=False)  # x of north-south roads, meters
    road_y: np.ndarray = field(repr=False)  # y of east-west roads

    @property
    def station_xy(self) -> np.ndarray:
        lon = np.array([b.lon for b in self.stations])
        lat = np.array([b.lat for b in self.stations])
        return np.column_stack(self.projection.to_xy(lon, lat))

    def zone_xy(self) -> list:
        out = []
        for z in self.config.interference_zones:
            x, y = self.projection.to_xy(z.lon, z.lat)
            out.append((float(x), float(y), z.radius_m, z.extra_sigma_db))
        return out

    def sigma_at(self, xy: np.ndarray) -> np.ndarray:
        """Shadowing std-dev per point: base sigma plus the largest covering zone's extra."""
        xy = np.atleast_2d(xy)
        extra = np.zeros(len(xy))
        for zx, zy, r, e in self.zone_xy():
            inside = np.hypot(xy[:, 0] - zx, xy[:, 1] - zy) <= r
            extra = np.where(inside, np.maximum(extra, e), extra)
        return self.config.noise_sigma_db + extra

    def in_zone(self, xy: np.ndarray) -> np.ndarray:
        xy = np.atleast_2d(xy)
        hit = np.zeros(len(xy), dtype=bool)
        for zx, zy, r, _ in self.zone_xy():
            hit |= np.hypot(xy[:, 0] - zx, xy[:, 1] - zy) <= r
        return hit


@dataclass(frozen=True)
class IntervalDist:
    kind: str  # "fixed" or "uniform"
    a: float
    b: float = 0.0

    @classmethod
    def parse(cls, text: str) -> "IntervalDist":
        try:
            kind, _, args = text.partition(":")
            vals = [float(v) for v in args.split(",")]
            if kind == "fixed" and len(vals) == 1 and vals[0] > 0:
                return cls("fixed", vals[0])
            if kind == "uniform" and len(vals) == 2 and 0 < vals[0] <= vals[1]:
                return cls("uniform", vals[0], vals[1])
        except ValueError:
            pass
        raise ConfigError(f"bad interval spec {text!r}; use fixed:S or uniform:A,B")

    def draw(self, rng: np.random.Generator) -> float:
        return self.a if self.kind == "fixed" else float(rng.uniform(self.a, self.b))


@dataclass(frozen=True)
class Track:
    device_index: int
    imsi: str
    times_s: np.ndarray
    xy: np.ndarray  # (n, 2) meters


def random_interference_zones(bbox: BBox, n_zones: int, coverage: float, extra_sigma_db: float,
                              seed: int) -> tuple:
    """Non-overlapping discs whose total area is ``coverage`` of the bbox."""
    if n_zones <= 0 or coverage <= 0:
        return ()
    proj = Projection.for_bbox(bbox)
    w = (bbox.lon_max - bbox.lon_min) * proj.kx
    h = (bbox.lat_max - bbox.lat_min) * proj.ky
    r = math.sqrt(coverage * w * h / (n_zones * math.pi))
    if 2 * r >= min(w, h):
        raise ConfigError("interference zones do not fit in the bbox")
    rng = np.random.default_rng([seed, 0xB0B])
    centers = []
    for _ in range(10_000):
        if len(centers) == n_zones:
            break
        c = rng.uniform([r, r], [w - r, h - r])
        if all(math.hypot(c[0] - o[0], c[1] - o[1]) >= 2 * r for o in centers):
            centers.append(c)
    else:
        raise ConfigError("could not place non-overlapping interference zones")
    zones = []
    for cx, cy in centers:
        lon, lat = proj.to_lonlat(cx, cy)
        zones.append(InterferenceZone(float(lon), float(lat), r, extra_sigma_db))
    return tuple(zones)


def generate_world(config: WorldConfig) -> World:
    proj = Projection.for_bbox(config.bbox)
    b = config.bbox
    w = (b.lon_max - b.lon_min) * proj.kx
    h = (b.lat_max - b.lat_min) * proj.ky
    sp = config.road_grid_spacing_m
    road_x = np.arange(sp / 2, w, sp)
    road_y = np.arange(sp / 2, h, sp)
    if len(road_x) < 2 or len(road_y) < 2:
        raise ConfigError(f"bbox {w:.0f}x{h:.0f} m too small for road spacing {sp} m")
    rng = np.random.default_rng([config.seed, 0x57A])
    xy = rng.uniform([0.0, 0.0], [w, h], size=(config.n_stations, 2))
    lon, lat = proj.to_lonlat(xy[:, 0], xy[:, 1])
    stations = tuple(
        BaseStation(6100 + i // 8, 20000 + i, float(lon[i]), float(lat[i]), config.tx_power_dbm)
        for i in range(config.n_stations)
    )
    return World(config, tuple(sorted(stations, key=lambda s: s.station)), proj, road_x, road_y)


_DIRS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def _sample_times(duration_s: float, interval: IntervalDist, rng) -> np.ndarray:
    times = []
    t = 0.0
    while t <= duration_s + 1e-9:
        times.append(t)
        t += interval.draw(rng)
    return np.array(times)


def _walk(world: World, times: np.ndarray, rng) -> np.ndarray:
    nx, ny = len(world.road_x), len(world.road_y)
    sp = world.config.road_grid_spacing_m
    node = (int(rng.integers(nx)), int(rng.integers(ny)))

    def valid(n, d):
        return 0 <= n[0] + d[0] < nx and 0 <= n[1] + d[1] < ny

    def choose(n, cur):
        opts = [d for d in _DIRS if valid(n, d)]
        if cur is not None and cur in opts and rng.random() >= TURN_PROB:
            return cur
        back = None if cur is None else (-cur[0], -cur[1])
        turns = [d for d in opts if d != cur and d != back] or [d for d in opts if d != back] or opts
        return turns[int(rng.integers(len(turns)))]

    d = choose(node, None)
    speed = float(rng.uniform(MIN_SPEED, MAX_SPEED))
    prog = 0.0
    out = np.empty((len(times), 2))
    t_prev = 0.0
    for k, t in enumerate(times):
        dt = t - t_prev
        t_prev = t
        while True:
            to_node = (sp - prog) / speed
            if to_node > dt:
                prog += speed * dt
                break
            dt -= to_node
            node = (node[0] + d[0], node[1] + d[1])
            d = choose(node, d)
            speed = float(rng.uniform(MIN_SPEED, MAX_SPEED))
            prog = 0.0
        out[k, 0] = world.road_x[node[0]] + d[0] * prog
        out[k, 1] = world.road_y[node[1]] + d[1] * prog
    return out


def imsi_for(device_index: int) -> str:
    return f"46000{device_index:010d}"


def generate_trajectories(world: World, n_devices: int, duration_s: float,
                          interval: IntervalDist | str) -> list:
    if not duration_s > 0:
        raise ConfigError("duration_s must be positive")
    if isinstance(interval, str):
        interval = IntervalDist.parse(interval)
    tracks = []
    for dev in range(n_devices):
        rng = np.random.default_rng([world.config.seed, dev, _TRACK])
        times = _sample_times(duration_s, interval, rng)
        tracks.append(Track(dev, imsi_for(dev), times, _walk(world, times, rng)))
    return tracks


def mean_rssi(world: World, xy: np.ndarray) -> np.ndarray:
    """Noise-free log-distance received power, shape (n_points, n_stations)."""
    xy = np.atleast_2d(xy)
    sxy = world.station_xy
    d = np.hypot(xy[:, None, 0] - sxy[None, :, 0], xy[:, None, 1] - sxy[None, :, 1])
    tx = np.array([b.tx_power_dbm for b in world.stations])
    return tx[None, :] - 10.0 * world.config.path_loss_exponent * np.log10(np.maximum(d, 1.0))


def draw_rssi(world: World, xy: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    xy = np.atleast_2d(xy)
    mu = mean_rssi(world, xy)
    sigma = world.sigma_at(xy)
    noise = rng.standard_normal(mu.shape) * sigma[:, None]
    return np.clip(mu + noise, -140.0, 0.0)


def _asu(rssi: float) -> int:
    return int(min(31, max(0, round((rssi + 113.0) / 2.0))))


def _signal_level(asu: int) -> int:
    if asu <= 2:
        return 0
    if asu >= 12:
        return 4
    if asu >= 8:
        return 3
    if asu >= 5:
        return 2
    return 1


def synthesize_mr(world: World, tracks: Iterable[Track], base_epoch_ms: int = BASE_EPOCH_MS) -> list:
    """Turn tracks into MR samples: the 7 strongest stations, strongest first."""
    ids = [b.station for b in world.stations]
    null_ids = world.config.null_neighbor_ids
    out = []
    for tr in tracks:
        rng = np.random.default_rng([world.config.seed, tr.device_index, _NOISE])
        if len(tr.xy) == 0:
            continue
        rssi = np.round(draw_rssi(world, tr.xy, rng), 2)
        # stations are identity-sorted, so a stable sort breaks ties by identity
        order = np.argsort(-rssi, axis=1, kind="stable")[:, :MAX_CELLS]
        lon, lat = world.projection.to_lonlat(tr.xy[:, 0], tr.xy[:, 1])
        for k in range(len(tr.times_s)):
            cells = []
            for slot, si in enumerate(order[k]):
                r = float(rssi[k, si])
                asu = _asu(r)
                rnc, cid = ids[si]
                if null_ids and slot > 0:
                    rnc = cid = None
                cells.append(CellObservation(rnc, cid, asu, _signal_level(asu), r))
            ts = base_epoch_ms + int(round(tr.times_s[k] * 1000.0))
            out.append(MrSample(tr.imsi, ts, tuple(cells), (float(lon[k]), float(lat[k]))))
    return out


def write_world_csv(world: World, stream: IO) -> None:
    """Interference zones plus the road-grid description, one row each."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["kind", "lon", "lat", "radius_m", "extra_sigma_db"])
    for z in world.config.interference_zones:
        w.writerow(["zone", repr(z.lon), repr(z.lat), repr(z.radius_m), repr(z.extra_sigma_db)])
    w.writerow(["roads", repr(world.projection.lon0), repr(world.projection.lat0),
                repr(world.config.road_grid_spacing_m), ""])


def world_from_pipeline_config(cfg, seed: Optional[int] = None) -> World:
    seed = cfg.seed if seed is None else seed
    bbox = BBox.from_extent(cfg.origin_lon, cfg.origin_lat, cfg.area_width_m, cfg.area_height_m)
    zones = random_interference_zones(bbox, cfg.n_zones, cfg.zone_coverage, cfg.zone_extra_sigma_db, seed)
    wc = WorldConfig(bbox=bbox, n_stations=cfg.n_stations, path_loss_exponent=cfg.path_loss_exponent,
                     noise_sigma_db=cfg.noise_sigma_db, interference_zones=zones,
                     road_grid_spacing_m=cfg.road_grid_spacing_m, seed=seed,
                     tx_power_dbm=cfg.tx_power_dbm, null_neighbor_ids=cfg.null_neighbor_ids)
    return generate_world(wc)
