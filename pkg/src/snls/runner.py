"""Drive the solvers for a validated ``RunConfig`` and collect a ``RunRecord``."""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .config import RunConfig
from .dynamics import BlowupSuspected, Problem, SolverState, StabilityError, rk4_march, step_direct
from .io import RunRecord
from .noise import NoiseModel, sample_path
from .spectral import boundary_max

__all__ = ["RunFailed", "thread_count", "build_problem", "norm_series", "run"]


class RunFailed(RuntimeError):
    """A solver stopped early; ``time`` is the failure time, ``record`` the partial run."""

    def __init__(self, message: str, time: float | None, record: RunRecord | None = None):
        super().__init__(message)
        self.time = time
        self.record = record


def thread_count() -> int:
    """Worker cap from ``SNLS_THREADS`` (default 1)."""
    raw = os.environ.get("SNLS_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ValueError(f"SNLS_THREADS must be a positive integer, got {raw!r}") from None


def build_problem(config: RunConfig, path=None) -> tuple[Problem, np.ndarray]:
    grid = config.grid
    noise = NoiseModel(config.noise, grid)
    if path is None:
        path = sample_path(noise.N, config.T, config.dt, config.seed)
    problem = Problem(noise, path, config.alpha, config.lam, noise_placement=config.noise_placement)
    return problem, config.initial.field(grid)


def norm_series(grid, times, fields) -> dict:
    """``t, mass, h1, h2, linf`` for a stack of slices, computed on Fourier coefficients."""
    v = np.asarray(fields)
    axes = tuple(range(1, grid.d + 1))
    c2 = np.abs(np.fft.fftn(v, axes=axes)) ** 2
    scale = grid.cell_volume / grid.size
    w = 1.0 + grid.k2
    mass = grid.cell_volume * np.sum(np.abs(v) ** 2, axis=axes)
    h1 = np.sqrt(scale * np.sum(c2 * w, axis=axes))
    h2 = np.sqrt(scale * np.sum(c2 * w**2, axis=axes))
    linf = np.abs(v).reshape(v.shape[0], -1).max(axis=1)
    return {"t": np.asarray(times, dtype=float), "mass": mass, "h1": h1, "h2": h2, "linf": linf}


class _Marcher:
    """Advance one formulation slice by slice."""

    def __init__(self, problem: Problem, x, form: str):
        self.problem = problem
        self.form = form
        self.field = np.array(x, dtype=complex)
        self.m = 0

    def advance(self):
        if self.form == "direct":
            self.field = step_direct(self.problem, SolverState(self.field, self.m)).field
        else:
            self.field = rk4_march(self.problem, self.field, self.m, self.m + 1, keep=False)
        self.m += 1
        return self.field

    def physical(self):
        """The field as ``X``; the rescaled unknown is mapped through ``e^W``."""
        if self.form == "rescaled" and not self.problem.noise.is_zero:
            return self.problem.noise.exp_W(self.problem.path.beta[:, self.m]) * self.field
        return self.field

    def rescaled(self):
        """The field as ``y = e^{-W} X``."""
        if self.form == "direct" and not self.problem.noise.is_zero:
            return np.conj(self.problem.noise.exp_W(self.problem.path.beta[:, self.m])) * self.field
        return self.field


class _Quotients:
    """Streamed ``||y_m - y_{m-1}|| / dt`` and centered ``||y_{m+1} - y_{m-1}|| / (2 dt)``."""

    def __init__(self, grid, dt):
        self.grid, self.dt = grid, dt
        self.prev2 = self.prev = None
        self.forward, self.centered = [], []

    def _l2(self, f):
        return float(np.sqrt(self.grid.cell_volume * np.sum(np.abs(f) ** 2)))

    def push(self, y):
        y = y.copy()
        if self.prev is not None:
            self.forward.append(self._l2(y - self.prev) / self.dt)
        if self.prev2 is not None:
            self.centered.append(self._l2(y - self.prev2) / (2 * self.dt))
        self.prev2, self.prev = self.prev, y

    def arrays(self):
        return np.array(self.forward), np.array(self.centered)


def run(config: RunConfig, *, path=None) -> RunRecord:
    """Integrate one trajectory (or both formulations in lockstep on one path).

    ``X`` is reported for every formulation: the rescaled solver's ``y`` is mapped
    back through ``X = e^W y``.  With ``formulation == "both"`` the primary
    series is the direct solver's and ``equiv_err`` holds
    ``||e^W y - X||_{L^2} / ||x||_{L^2}`` per slice.  Slices at multiples of
    ``snapshot_stride`` (and the last one) are kept in ``trajectories``.
    """
    start = time.perf_counter()
    problem, x = build_problem(config, path)
    grid, path = problem.grid, problem.path
    forms = ["direct", "rescaled"] if config.formulation == "both" else [config.formulation]
    marchers = [_Marcher(problem, x, f) for f in forms]
    workers = min(thread_count(), len(forms))
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    M = path.M
    stride = config.snapshot_stride
    keep = set(range(0, M + 1, stride)) | {M}
    rows = {f: [] for f in forms}
    kept = {f: [] for f in forms}
    kept_times = []
    equiv = []
    quotients = {f: _Quotients(grid, path.dt) for f in forms}

    def record_slice(m):
        phys = [mk.physical() for mk in marchers]
        for f, mk, X in zip(forms, marchers, phys):
            rows[f].append(X)
            quotients[f].push(mk.rescaled())
            if m in keep:
                kept[f].append(mk.field.copy())
        if m in keep:
            kept_times.append(float(path.times[m]))
        if len(forms) == 2:
            equiv.append(phys[1] - phys[0])

    # norms are reduced in blocks to bound memory on long runs
    block = 256
    series_parts = {f: [] for f in forms}
    equiv_parts = []

    def flush(upto):
        for f in forms:
            if rows[f]:
                series_parts[f].append(norm_series(grid, path.times[upto - len(rows[f]) + 1 : upto + 1], np.stack(rows[f])))
                rows[f].clear()
        if equiv:
            axes = tuple(range(1, grid.d + 1))
            equiv_parts.append(np.sqrt(grid.cell_volume * np.sum(np.abs(np.stack(equiv)) ** 2, axis=axes)))
            equiv.clear()

    try:
        record_slice(0)
        for m in range(1, M + 1):
            if pool is not None:
                list(pool.map(lambda mk: mk.advance(), marchers))
            else:
                for mk in marchers:
                    mk.advance()
            record_slice(m)
            if len(rows[forms[0]]) >= block:
                flush(m)
        flush(M)
    except (BlowupSuspected, StabilityError) as exc:
        raise RunFailed(f"solver failed at t = {getattr(exc, 'time', None)}: {exc}", getattr(exc, "time", None)) from exc
    finally:
        if pool is not None:
            pool.shutdown()

    def joined(parts):
        return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}

    series = joined(series_parts[forms[0]])
    series_rescaled = None
    if len(forms) == 2:
        series_rescaled = joined(series_parts["rescaled"])
        err = np.concatenate(equiv_parts)
        x_norm = np.sqrt(series["mass"][0])
        series["equiv_err"] = err / x_norm if x_norm > 0 else err

    trajectories = {f: np.stack(kept[f]) for f in forms}
    snapshots = {f: list(zip(kept_times, trajectories[f])) for f in forms}

    h2_0 = float(series["h2"][0])
    threshold = config.blowup_factor * h2_0
    crossing = np.flatnonzero(~(series["h2"] <= threshold)) if h2_0 > 0 else np.array([], dtype=int)
    metadata = {
        "L": grid.L,
        "boundary_max": boundary_max(grid, x),
        "formulation": config.formulation,
        "noise_placement": config.noise_placement,
        "steps": M,
        "snapshot_times": kept_times,
        "warnings": list(config.warnings),
        "blowup_threshold": threshold,
        "blowup_suspected_at": float(path.times[crossing[0]]) if crossing.size else None,
        "blowup_suspected_index": int(crossing[0]) if crossing.size else None,
        "wall_time": time.perf_counter() - start,
        "version": __version__,
    }
    record = RunRecord(config, series, path, metadata, series_rescaled, snapshots, trajectories)
    record.quotients = {f: quotients[f].arrays() for f in forms}
    return record
