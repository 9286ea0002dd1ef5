"""Run records and their on-disk layout.

A run directory holds::

    config.json            validated config echo
    metadata.json          {format_version, package_version, seed, wall_time, ...}
    series.csv             t,mass,h1,h2,linf[,equiv_err] for the primary formulation
    series_rescaled.csv    same columns for the rescaled solver when both ran
    path.json              Brownian increments (JSON floats round-trip exactly)
    snapshots/*.bin        one JSON header line {d, n, L, t} then raw little-endian complex64

Floats in CSV are written with ``repr`` so the text is a pure function of the values.
"""

from __future__ import annotations

import csv
import io as _io
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, parse_config
from .noise import BrownianPath
from .spectral import Grid

__all__ = [
    "FORMAT_VERSION",
    "SERIES_COLUMNS",
    "RecordError",
    "RunRecord",
    "persist",
    "load",
    "write_snapshot",
    "read_snapshot",
    "series_csv",
    "emit_plot_data",
    "PLOT_KINDS",
]

FORMAT_VERSION = 1
SERIES_COLUMNS = ("t", "mass", "h1", "h2", "linf")
PLOT_KINDS = ("norms", "slopes", "exponents")


class RecordError(ValueError):
    """A stored run directory is incomplete, truncated or from another format version."""


@dataclass
class RunRecord:
    config: RunConfig
    series: dict
    path: BrownianPath
    metadata: dict = field(default_factory=dict)
    series_rescaled: dict | None = None
    snapshots: dict = field(default_factory=dict)  # formulation -> list[(t, field)]
    trajectories: dict = field(default_factory=dict, repr=False)  # in memory only
    quotients: dict = field(default_factory=dict, repr=False)  # in memory only: (forward, centered)

    @property
    def times(self) -> np.ndarray:
        return np.asarray(self.series["t"])

    @property
    def grid(self) -> Grid:
        return self.config.grid


def _fmt(v) -> str:
    return repr(float(v))


def series_csv(series: dict) -> str:
    cols = list(SERIES_COLUMNS) + (["equiv_err"] if "equiv_err" in series else [])
    buf = _io.StringIO()
    buf.write(",".join(cols) + "\n")
    for row in zip(*(series[c] for c in cols)):
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _read_series(path: Path) -> dict:
    if not path.exists():
        raise RecordError(f"missing series file {path.name}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise RecordError(f"{path.name} is empty")
    header = rows[0]
    for col in SERIES_COLUMNS:
        if col not in header:
            raise RecordError(f"{path.name} is missing column {col!r}")
    out = {}
    for j, col in enumerate(header):
        try:
            out[col] = np.array([float(r[j]) for r in rows[1:]])
        except (IndexError, ValueError):
            raise RecordError(f"{path.name}: malformed value in column {col!r}") from None
    return out


def write_snapshot(path: Path, grid: Grid, t: float, values: np.ndarray) -> None:
    header = json.dumps({"d": grid.d, "n": grid.n, "L": grid.L, "t": float(t)}, sort_keys=True)
    payload = np.ascontiguousarray(values, dtype="<c8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header.encode() + b"\n")
        fh.write(payload)


def read_snapshot(path: Path) -> tuple[dict, np.ndarray]:
    raw = Path(path).read_bytes()
    nl = raw.find(b"\n")
    if nl < 0:
        raise RecordError(f"{Path(path).name}: no header line")
    try:
        header = json.loads(raw[:nl])
        d, n = int(header["d"]), int(header["n"])
    except (ValueError, KeyError, TypeError):
        raise RecordError(f"{Path(path).name}: malformed header") from None
    payload = raw[nl + 1 :]
    want = 8 * n**d
    if len(payload) != want:
        raise RecordError(
            f"{Path(path).name}: payload has {len(payload)} bytes, header (d={d}, n={n}) needs {want}"
        )
    values = np.frombuffer(payload, dtype="<c8").reshape((n,) * d).astype(np.complex64)
    return header, values


def persist(record: RunRecord, directory) -> Path:
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(record.config.to_json() + "\n")
    meta = dict(record.metadata)
    meta.update(format_version=FORMAT_VERSION, package_version=__version__, seed=record.config.seed)
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (out / "series.csv").write_text(series_csv(record.series))
    if record.series_rescaled is not None:
        (out / "series_rescaled.csv").write_text(series_csv(record.series_rescaled))
    p = record.path
    path_doc = {
        "dt": p.dt,
        "seed": p.seed,
        "level": p.level,
        "N": p.N,
        "M": p.M,
        "increments": [[float(v) for v in row] for row in p.increments],
    }
    (out / "path.json").write_text(json.dumps(path_doc) + "\n")
    snap_dir = out / "snapshots"
    if record.snapshots:
        snap_dir.mkdir(exist_ok=True)
        for stale in snap_dir.glob("*.bin"):
            stale.unlink()
        for form, snaps in record.snapshots.items():
            for i, (t, values) in enumerate(snaps):
                write_snapshot(snap_dir / f"{form}_{i:06d}.bin", record.grid, t, values)
    return out


def load(directory) -> RunRecord:
    d = Path(directory)
    try:
        meta = json.loads((d / "metadata.json").read_text())
    except FileNotFoundError:
        raise RecordError(f"{d}: missing metadata.json") from None
    if meta.get("format_version") != FORMAT_VERSION:
        raise RecordError(
            f"{d}: format version {meta.get('format_version')!r} is not {FORMAT_VERSION} "
            "(written by a different release)"
        )
    config = parse_config((d / "config.json").read_text())
    series = _read_series(d / "series.csv")
    rescaled = _read_series(d / "series_rescaled.csv") if (d / "series_rescaled.csv").exists() else None
    try:
        doc = json.loads((d / "path.json").read_text())
        incs = np.array(doc["increments"], dtype=float).reshape(doc["N"], doc["M"])
        path = BrownianPath(incs, doc["dt"], doc["seed"], doc.get("level", 0))
    except FileNotFoundError:
        raise RecordError(f"{d}: missing path.json") from None
    except (KeyError, ValueError):
        raise RecordError(f"{d}: path.json is malformed or truncated") from None
    snapshots: dict = {}
    grid = config.grid
    for f in sorted((d / "snapshots").glob("*.bin")) if (d / "snapshots").exists() else []:
        form = f.stem.rsplit("_", 1)[0]
        header, values = read_snapshot(f)
        if (header["d"], header["n"]) != (grid.d, grid.n):
            raise RecordError(f"{f.name}: header grid (d={header['d']}, n={header['n']}) differs from config")
        snapshots.setdefault(form, []).append((header["t"], values))
    return RunRecord(config, series, path, meta, rescaled, snapshots)


def _long_rows(rows):
    buf = _io.StringIO()
    buf.write("series,t,value\n")
    for name, t, v in rows:
        buf.write(f"{name},{_fmt(t)},{_fmt(v)}\n")
    return buf.getvalue()


def emit_plot_data(obj, kind: str, fmt: str = "csv") -> str:
    """Tidy long-format data ``(series, t, value)`` for external plotting.

    ``norms`` takes a ``RunRecord``; ``slopes`` takes a ``DiagnosticReport`` (or
    list of checks) and writes one row per refinement level; ``exponents`` takes
    an iterable of dimensions and tabulates every power range.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    rows = []
    if kind == "norms":
        s = obj.series
        for col in [c for c in s if c != "t"]:
            rows += [(col, t, v) for t, v in zip(s["t"], s[col])]
        if obj.series_rescaled is not None:
            for col in [c for c in obj.series_rescaled if c != "t"]:
                rows += [(f"rescaled_{col}", t, v) for t, v in zip(obj.series_rescaled["t"], obj.series_rescaled[col])]
    elif kind == "slopes":
        checks = getattr(obj, "checks", obj)
        for c in checks:
            for dt, err in zip(c.levels or [], c.level_metrics or []):
                rows.append((c.name, dt, err))
    else:
        from .exponents import SCOPES, power_range

        table = []
        for d in obj:
            for scope in SCOPES:
                for lam in (1, -1):
                    try:
                        rng = power_range(d, scope, s=0 if scope == "scaling" else None, lam=lam)
                    except ValueError:
                        continue
                    table.append({"d": d, "scope": scope, "lambda": lam, "range": str(rng)})
        if fmt == "json":
            return json.dumps(table, indent=2)
        buf = _io.StringIO()
        buf.write("d,scope,lambda,range\n")
        for r in table:
            buf.write(f"{r['d']},{r['scope']},{r['lambda']},\"{r['range']}\"\n")
        return buf.getvalue()
    if fmt == "json":
        return json.dumps([{"series": a, "t": float(b), "value": float(c)} for a, b, c in rows])
    return _long_rows(rows)

