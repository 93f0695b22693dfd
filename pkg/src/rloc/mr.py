"""Measurement-report data model, CSV ingestion, sequencing and dataset splits."""

from __future__ import annotations

import csv
import io
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable, Optional, Sequence

import numpy as np

from .errors import FormatError, InvalidReadingError, ParseError, SplitError

log = logging.getLogger(__name__)

MAX_CELLS = 7
NO_SIGNAL_LEVEL = 8

StationId = tuple  # (rnc_id, cell_id); rnc_id may be -1 when the operator omits it


def discretize_rssi(rssi_dbm: Optional[float]) -> int:
    """Map an RSSI reading in dBm to one of 8 discrete levels.

    ``None`` is the no-signal marker and maps to level 8. Readings at or above
    -50 dBm are level 1; each 10 dB below that is one level, with the bucket
    including its lower (more negative) edge, so -60 is level 2 and -110 is
    level 7. Anything below -110 dBm is level 8.
    """
    if rssi_dbm is None:
        return NO_SIGNAL_LEVEL
    x = float(rssi_dbm)
    if not math.isfinite(x):
        raise InvalidReadingError(f"non-finite RSSI reading {rssi_dbm!r}")
    if x >= -50.0:
        return 1
    if x < -110.0:
        return NO_SIGNAL_LEVEL
    return 1 + math.ceil((-50.0 - x) / 10.0)


@dataclass(frozen=True)
class CellObservation:
    rnc_id: Optional[int] = None
    cell_id: Optional[int] = None
    asu_level: Optional[int] = None
    signal_level: Optional[int] = None
    rssi_dbm: Optional[float] = None

    def __post_init__(self):
        if self.rnc_id is not None and self.cell_id is None:
            raise ValueError("rnc_id present without cell_id")
        if self.rssi_dbm is not None and not (-140.0 <= self.rssi_dbm <= 0.0):
            raise ValueError(f"rssi_dbm {self.rssi_dbm} outside [-140, 0]")

    @property
    def station(self) -> Optional[StationId]:
        if self.cell_id is None:
            return None
        return (self.rnc_id if self.rnc_id is not None else -1, self.cell_id)

    @property
    def level(self) -> int:
        return discretize_rssi(self.rssi_dbm)


@dataclass(frozen=True)
class MrSample:
    imsi: str
    timestamp: int  # ms since epoch
    cells: tuple
    truth: Optional[tuple] = None  # (lon, lat)

    def __post_init__(self):
        if not (1 <= len(self.cells) <= MAX_CELLS):
            raise ValueError(f"sample must carry 1..{MAX_CELLS} cells, got {len(self.cells)}")
        if self.cells[0].station is None:
            raise ValueError("serving cell has no station identity")

    @property
    def serving(self) -> StationId:
        return self.cells[0].station

    @property
    def bs_set(self) -> frozenset:
        return frozenset(c.station for c in self.cells if c.station is not None)

    @property
    def anonymous_levels(self) -> tuple:
        return tuple(sorted(c.level for c in self.cells if c.station is None))


@dataclass(frozen=True)
class MrSequence:
    imsi: str
    samples: tuple
    deltas: tuple  # seconds, len(samples) - 1

    def __len__(self):
        return len(self.samples)

    @property
    def key(self) -> tuple:
        return (self.imsi, self.samples[0].timestamp)


@dataclass(frozen=True)
class DatasetSplit:
    d_l: tuple
    d_c: tuple
    d_test: tuple

    @staticmethod
    def samples_of(seqs: Iterable[MrSequence]) -> list:
        return [s for q in seqs for s in q.samples]


# ---------------------------------------------------------------- CSV

def mr_csv_header() -> list:
    cols = ["MRTime", "IMSI", "Num_BS"]
    for i in range(1, MAX_CELLS + 1):
        cols += [f"RNCID_{i}", f"CellID_{i}", f"AsuLevel_{i}", f"SignalLevel_{i}", f"RSSI_{i}"]
    return cols + ["Longitude", "Latitude"]


def _opt(value: str, conv, row: int, col: str):
    value = value.strip() if value is not None else ""
    if value == "":
        return None
    try:
        return conv(value)
    except ValueError:
        raise ParseError(f"malformed numeric field {value!r}", row=row, column=col) from None


def _int(text: str) -> int:
    f = float(text)
    if not f.is_integer():
        raise ValueError(text)
    return int(f)


def parse_mr_csv(stream: IO, rejects: Optional[list] = None) -> list:
    """Read MR samples from a CSV byte or text stream.

    Rows whose first slot carries no station identity are skipped; their
    1-based data-row index is logged and appended to ``rejects`` if given.
    """
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    if isinstance(stream, io.BufferedIOBase) or "b" in getattr(stream, "mode", ""):
        stream = io.TextIOWrapper(stream, encoding="utf-8", newline="")
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise FormatError("missing header row")
    required = {"MRTime", "IMSI", "CellID_1", "RSSI_1"}
    missing = required - set(reader.fieldnames)
    if missing:
        raise FormatError(f"header lacks columns {sorted(missing)}")
    has_truth = "Longitude" in reader.fieldnames and "Latitude" in reader.fieldnames

    out = []
    for row_idx, row in enumerate(reader, start=1):
        ts = _opt(row.get("MRTime"), _int, row_idx, "MRTime")
        if ts is None:
            raise ParseError("blank MRTime", row=row_idx, column="MRTime")
        cells = []
        for i in range(1, MAX_CELLS + 1):
            rnc = _opt(row.get(f"RNCID_{i}"), _int, row_idx, f"RNCID_{i}")
            cid = _opt(row.get(f"CellID_{i}"), _int, row_idx, f"CellID_{i}")
            asu = _opt(row.get(f"AsuLevel_{i}"), _int, row_idx, f"AsuLevel_{i}")
            sig = _opt(row.get(f"SignalLevel_{i}"), _int, row_idx, f"SignalLevel_{i}")
            rssi = _opt(row.get(f"RSSI_{i}"), float, row_idx, f"RSSI_{i}")
            if cid is None and rssi is None:
                continue
            if cid is None:
                rnc = None
            try:
                cells.append(CellObservation(rnc, cid, asu, sig, rssi))
            except ValueError as exc:
                raise ParseError(str(exc), row=row_idx, column=f"RSSI_{i}") from None
        if not cells or cells[0].station is None:
            log.warning("row %d rejected: no serving station", row_idx)
            if rejects is not None:
                rejects.append(row_idx)
            continue
        truth = None
        if has_truth:
            lon = _opt(row.get("Longitude"), float, row_idx, "Longitude")
            lat = _opt(row.get("Latitude"), float, row_idx, "Latitude")
            if lon is not None and lat is not None:
                truth = (lon, lat)
        out.append(MrSample(str(row["IMSI"]).strip(), ts, tuple(cells), truth))
    return out


def _fmt(v) -> str:
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def write_mr_csv(samples: Iterable[MrSample], stream: IO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(mr_csv_header())
    for s in samples:
        row = [s.timestamp, s.imsi, len(s.cells)]
        for i in range(MAX_CELLS):
            if i < len(s.cells):
                c = s.cells[i]
                row += [_fmt(c.rnc_id), _fmt(c.cell_id), _fmt(c.asu_level), _fmt(c.signal_level), _fmt(c.rssi_dbm)]
            else:
                row += [""] * 5
        row += [_fmt(s.truth[0]), _fmt(s.truth[1])] if s.truth else ["", ""]
        w.writerow(row)


# ---------------------------------------------------------------- sequences

def group_into_sequences(samples: Iterable[MrSample], max_gap_s: float = 120.0) -> list:
    """Group by IMSI, sort by time, and cut wherever the gap exceeds ``max_gap_s``.

    Repeated timestamps also start a new sequence so timestamps stay strictly
    increasing within one.
    """
    by_imsi = defaultdict(list)
    for s in samples:
        by_imsi[s.imsi].append(s)
    out = []
    for imsi in sorted(by_imsi):
        run = sorted(by_imsi[imsi], key=lambda s: s.timestamp)
        cur = [run[0]]
        deltas = []
        for prev, nxt in zip(run, run[1:]):
            d = (nxt.timestamp - prev.timestamp) / 1000.0
            if d > max_gap_s or d <= 0:
                out.append(MrSequence(imsi, tuple(cur), tuple(deltas)))
                cur, deltas = [nxt], []
            else:
                cur.append(nxt)
                deltas.append(d)
        out.append(MrSequence(imsi, tuple(cur), tuple(deltas)))
    return out


def split_dataset(sequences: Sequence[MrSequence], seed: int, p_test: float = 0.2,
                  p_dc_within_train: float = 0.375) -> DatasetSplit:
    """Seeded three-way split at sequence granularity.

    Sequences are put in canonical order first, so the assignment depends only
    on the seed and on sequence identity, never on input order.
    """
    for name, p in (("p_test", p_test), ("p_dc", p_dc_within_train)):
        if not 0.0 < p < 1.0:
            raise SplitError(f"{name} must lie in (0, 1), got {p}")
    seqs = sorted(sequences, key=lambda q: q.key)
    n = len(seqs)
    n_test = int(math.floor(p_test * n + 0.5))
    n_dc = int(math.floor(p_dc_within_train * (n - n_test) + 0.5))
    n_l = n - n_test - n_dc
    if min(n_test, n_dc, n_l) < 1:
        raise SplitError(f"{n} sequences cannot populate all three parts")
    perm = np.random.default_rng(seed).permutation(n)
    test = tuple(seqs[i] for i in sorted(perm[:n_test]))
    d_c = tuple(seqs[i] for i in sorted(perm[n_test:n_test + n_dc]))
    d_l = tuple(seqs[i] for i in sorted(perm[n_test + n_dc:]))
    return DatasetSplit(d_l=d_l, d_c=d_c, d_test=test)
