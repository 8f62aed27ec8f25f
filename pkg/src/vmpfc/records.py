"""Time-series records and on-disk formats (CSV series, raw field snapshots).

The CSV layout is fixed: one header line

    t,dt,mass,e_original,e_pseudo,e_modified,e_discrete,aux,s_active

and one row per recorded step, every value printed with 17 significant
digits so a read back is bit exact.  Quantities that do not apply (the
discrete CN energy outside the square-root scheme) are written as nan.

Field snapshots are raw little-endian float64 in C (row-major) order with
a JSON sidecar of the same basename carrying the geometry:
{"dim": d, "n": [...], "L": [...], "t": ..., "scheme": ..., "field": "phi"}.
"""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, fields

import numpy as np

from .errors import SnapshotFormatError
from .model import ModelParams, SchemeParams
from .schemes import SchemeState, energy_report
from .spectral import Grid, field_mean

SERIES_COLUMNS = (
    "t",
    "dt",
    "mass",
    "e_original",
    "e_pseudo",
    "e_modified",
    "e_discrete",
    "aux",
    "s_active",
)


@dataclass(frozen=True)
class TimeSeriesRecord:
    t: float
    dt: float
    mass: float
    e_original: float
    e_pseudo: float
    e_modified: float
    e_discrete: float
    aux: float
    s_active: float


def make_record(state: SchemeState, p: ModelParams, sp: SchemeParams, dt: float) -> TimeSeriesRecord:
    """Record for one state; ``dt`` is the step that produced it (0 at t=0)."""
    en = energy_report(state, p, sp)
    return TimeSeriesRecord(
        t=state.t,
        dt=float(dt),
        mass=field_mean(state.phi) * state.grid.volume,
        e_original=en.original,
        e_pseudo=en.pseudo,
        e_modified=en.modified,
        e_discrete=math.nan if en.discrete is None else en.discrete,
        aux=state.aux,
        s_active=state.current_s,
    )


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_series_csv(path: str | os.PathLike, records: list[TimeSeriesRecord]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SERIES_COLUMNS)
        for r in records:
            w.writerow(_fmt(getattr(r, c)) for c in SERIES_COLUMNS)


def read_series_csv(path: str | os.PathLike) -> list[TimeSeriesRecord]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != SERIES_COLUMNS:
            raise SnapshotFormatError(
                f"{path}: bad series header {header!r}; expected {','.join(SERIES_COLUMNS)}"
            )
        out = []
        for i, row in enumerate(reader, start=2):
            if len(row) != len(SERIES_COLUMNS):
                raise SnapshotFormatError(f"{path}:{i}: expected {len(SERIES_COLUMNS)} fields")
            try:
                out.append(TimeSeriesRecord(*(float(v) for v in row)))
            except ValueError as e:
                raise SnapshotFormatError(f"{path}:{i}: {e}") from None
    return out


def snapshot_paths(base: str | os.PathLike) -> tuple[str, str]:
    base = os.fspath(base)
    if base.endswith(".f64"):
        base = base[: -len(".f64")]
    return base + ".f64", base + ".json"


def write_field_snapshot(
    base: str | os.PathLike,
    grid: Grid,
    phi: np.ndarray,
    t: float,
    scheme: str,
    field: str = "phi",
) -> tuple[str, str]:
    """Write <base>.f64 (raw little-endian float64, C order) and <base>.json."""
    raw_path, meta_path = snapshot_paths(base)
    data = np.ascontiguousarray(phi, dtype="<f8")
    if data.shape != grid.shape:
        raise SnapshotFormatError(f"field shape {data.shape} does not match grid {grid.shape}")
    with open(raw_path, "wb") as fh:
        fh.write(data.tobytes())
    meta = {
        "dim": grid.dim,
        "n": list(grid.n),
        "L": list(grid.lengths),
        "t": t,
        "scheme": scheme,
        "field": field,
    }
    with open(meta_path, "w") as fh:
        json.dump(meta, fh, indent=1)
        fh.write("\n")
    return raw_path, meta_path


def read_field_snapshot(base: str | os.PathLike) -> tuple[Grid, np.ndarray, dict]:
    """Read a snapshot pair back; validates sidecar geometry against the payload."""
    raw_path, meta_path = snapshot_paths(base)
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except json.JSONDecodeError as e:
        raise SnapshotFormatError(f"{meta_path}: invalid JSON ({e})") from None
    for key in ("dim", "n", "L", "t"):
        if key not in meta:
            raise SnapshotFormatError(f"{meta_path}: missing key {key!r}")
    n = tuple(int(v) for v in meta["n"])
    lengths = tuple(float(v) for v in meta["L"])
    if len(n) != int(meta["dim"]) or len(lengths) != len(n):
        raise SnapshotFormatError(f"{meta_path}: inconsistent dim/n/L")
    grid = Grid(n, lengths)
    expected = grid.num_points * 8
    size = os.path.getsize(raw_path)
    if size != expected:
        raise SnapshotFormatError(
            f"{raw_path}: payload is {size} bytes, geometry needs {expected}"
        )
    data = np.fromfile(raw_path, dtype="<f8").reshape(grid.shape)
    return grid, data, meta


def record_as_dict(r: TimeSeriesRecord) -> dict:
    return {f.name: getattr(r, f.name) for f in fields(r)}
