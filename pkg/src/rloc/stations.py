"""Base-station records and the stations CSV (``rnc_id,cell_id,lon,lat[,tx_power_dbm]``)."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import IO, Iterable, Optional

from .errors import FormatError, ParseError


@dataclass(frozen=True)
class BaseStation:
    rnc_id: int
    cell_id: int
    lon: float
    lat: float
    tx_power_dbm: Optional[float] = None

    @property
    def station(self) -> tuple:
        return (self.rnc_id, self.cell_id)


def write_stations_csv(stations: Iterable[BaseStation], stream: IO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["rnc_id", "cell_id", "lon", "lat", "tx_power_dbm"])
    for b in stations:
        w.writerow([b.rnc_id, b.cell_id, repr(b.lon), repr(b.lat),
                    "" if b.tx_power_dbm is None else repr(b.tx_power_dbm)])


def read_stations_csv(stream: IO) -> dict:
    """Return ``{(rnc_id, cell_id): BaseStation}``."""
    reader = csv.DictReader(stream)
    if reader.fieldnames is None or not {"rnc_id", "cell_id", "lon", "lat"} <= set(reader.fieldnames):
        raise FormatError("stations CSV needs rnc_id,cell_id,lon,lat columns")
    out = {}
    for i, row in enumerate(reader, start=1):
        try:
            tx = row.get("tx_power_dbm") or ""
            b = BaseStation(int(row["rnc_id"]), int(row["cell_id"]), float(row["lon"]), float(row["lat"]),
                            float(tx) if tx.strip() else None)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"bad station record: {exc}", row=i) from None
        out[b.station] = b
    return out
