"""Square grid tessellation over a local equirectangular projection."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, DataError

EARTH_RADIUS_M = 6_371_008.8
_EDGE_EPS = 1e-9


class GridCellId(NamedTuple):
    col: int
    row: int

    def __str__(self):
        return f"{self.col}:{self.row}"

    @classmethod
    def parse(cls, text: str) -> "GridCellId":
        col, row = text.split(":")
        return cls(int(col), int(row))


@dataclass(frozen=True)
class BBox:
    lon_min: float
    lat_min: float
    lon_max: float
    lat_max: float

    def __post_init__(self):
        if not (self.lon_max > self.lon_min and self.lat_max > self.lat_min):
            raise ConfigError(f"degenerate bbox {self}")

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.lon_min + self.lon_max), 0.5 * (self.lat_min + self.lat_max))

    @classmethod
    def from_extent(cls, lon0: float, lat0: float, width_m: float, height_m: float) -> "BBox":
        """Rectangle with south-west corner (lon0, lat0) spanning the given meters."""
        if width_m <= 0 or height_m <= 0:
            raise ConfigError("bbox extent must be positive")
        ky = EARTH_RADIUS_M * math.pi / 180.0
        lat1 = lat0 + height_m / ky
        kx = ky * math.cos(math.radians(0.5 * (lat0 + lat1)))
        return cls(lon0, lat0, lon0 + width_m / kx, lat1)


@dataclass(frozen=True)
class Projection:
    """Equirectangular scaling around the bbox center; meters from the SW corner."""

    lon0: float
    lat0: float
    kx: float  # meters per degree longitude
    ky: float  # meters per degree latitude

    @classmethod
    def for_bbox(cls, bbox: BBox) -> "Projection":
        ky = EARTH_RADIUS_M * math.pi / 180.0
        kx = ky * math.cos(math.radians(bbox.center[1]))
        return cls(bbox.lon_min, bbox.lat_min, kx, ky)

    def to_xy(self, lon, lat):
        return ((np.asarray(lon) - self.lon0) * self.kx, (np.asarray(lat) - self.lat0) * self.ky)

    def to_lonlat(self, x, y):
        return (np.asarray(x) / self.kx + self.lon0, np.asarray(y) / self.ky + self.lat0)


@dataclass(frozen=True)
class GridSystem:
    bbox: BBox
    cell_size_m: float
    projection: Projection
    width_m: float
    height_m: float
    n_cols: int
    n_rows: int

    @property
    def origin(self) -> tuple[float, float]:
        return (self.bbox.lon_min, self.bbox.lat_min)

    def contains_xy(self, x: float, y: float) -> bool:
        # edge cells may overhang the bbox; their full extent belongs to the grid
        w = max(self.width_m, self.n_cols * self.cell_size_m)
        h = max(self.height_m, self.n_rows * self.cell_size_m)
        return -_EDGE_EPS <= x <= w + _EDGE_EPS and -_EDGE_EPS <= y <= h + _EDGE_EPS

    def cell_of_xy(self, x: float, y: float) -> GridCellId:
        if not self.contains_xy(x, y):
            raise DataError(f"point ({x:.1f} m, {y:.1f} m) outside grid extent")
        col = min(max(int(math.floor(x / self.cell_size_m)), 0), self.n_cols - 1)
        row = min(max(int(math.floor(y / self.cell_size_m)), 0), self.n_rows - 1)
        return GridCellId(col, row)

    def grid_of(self, lon: float, lat: float) -> GridCellId:
        x, y = self.projection.to_xy(lon, lat)
        return self.cell_of_xy(float(x), float(y))

    def centroid_xy(self, cell: GridCellId) -> tuple[float, float]:
        self._check(cell)
        return ((cell.col + 0.5) * self.cell_size_m, (cell.row + 0.5) * self.cell_size_m)

    def centroid(self, cell: GridCellId) -> tuple[float, float]:
        x, y = self.centroid_xy(cell)
        lon, lat = self.projection.to_lonlat(x, y)
        return (float(lon), float(lat))

    def distance_m(self, p: tuple[float, float], q: tuple[float, float]) -> float:
        """Planar distance between two (lon, lat) points."""
        px, py = self.projection.to_xy(p[0], p[1])
        qx, qy = self.projection.to_xy(q[0], q[1])
        return float(math.hypot(px - qx, py - qy))

    def fingerprint(self) -> str:
        """Stable identity string; bundles refuse data built on a different grid."""
        b = self.bbox
        return f"{b.lon_min!r},{b.lat_min!r},{b.lon_max!r},{b.lat_max!r},{self.cell_size_m!r}"

    def to_dict(self) -> dict:
        b = self.bbox
        return {"bbox": [b.lon_min, b.lat_min, b.lon_max, b.lat_max], "cell_size_m": self.cell_size_m}

    @classmethod
    def from_dict(cls, d: dict) -> "GridSystem":
        return build_grid_system(BBox(*d["bbox"]), d["cell_size_m"])

    def _check(self, cell: GridCellId):
        if not (0 <= cell.col < self.n_cols and 0 <= cell.row < self.n_rows):
            raise DataError(f"cell {cell} outside {self.n_cols}x{self.n_rows} grid")


def build_grid_system(bbox: BBox, cell_size_m: float) -> GridSystem:
    if not (cell_size_m > 0 and math.isfinite(cell_size_m)):
        raise ConfigError(f"cell_size_m must be positive, got {cell_size_m}")
    proj = Projection.for_bbox(bbox)
    width = (bbox.lon_max - bbox.lon_min) * proj.kx
    height = (bbox.lat_max - bbox.lat_min) * proj.ky
    # tolerate round-off from BBox.from_extent so 1000 m / 50 m stays 20 cells
    n_cols = max(1, math.ceil(width / cell_size_m - 1e-7))
    n_rows = max(1, math.ceil(height / cell_size_m - 1e-7))
    return GridSystem(bbox, float(cell_size_m), proj, width, height, n_cols, n_rows)
