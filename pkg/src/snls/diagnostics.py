"""Pathwise verification checks on stored trajectories.

Most checks take plain arrays (a grid, the time grid and a ``(M+1, *shape)``
stack of slices) so they work on in-memory solver output and on reloaded runs
alike.  Refinement studies fit slopes by least squares in log-log over at least
three levels.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamics import Problem, nonlinearity, solve
from .noise import BrownianPath, NoiseModel, refine_path
from .spectral import Grid

__all__ = [
    "CheckResult",
    "DiagnosticReport",
    "fit_slope",
    "mass_drift",
    "weak_form_residual",
    "equivalence_error",
    "lipschitz_check",
    "lipschitz_check_all_pairs",
    "lipschitz_from_quotients",
    "lipschitz_for_record",
    "continuous_dependence",
    "blowup_monitor",
    "uniqueness_probe",
    "refinement_study",
    "slice_l2",
    "base_path",
    "equivalence_study",
    "residual_study",
    "rescaled_mass_study",
    "evaluate_checks",
    "report_csv",
]


@dataclass
class CheckResult:
    name: str
    metric: float
    threshold: float
    passed: bool
    slope: float | None = None
    slope_floor: float | None = None
    levels: list | None = None
    level_metrics: list | None = None
    details: dict = field(default_factory=dict)

    def line(self) -> str:
        s = f"{'PASS' if self.passed else 'FAIL'} {self.name}: metric={self.metric:.3e} threshold={self.threshold:.3e}"
        if self.slope is not None:
            s += f" slope={self.slope:.3f} (floor {self.slope_floor})"
        return s


@dataclass
class DiagnosticReport:
    checks: list = field(default_factory=list)

    def add(self, check: CheckResult) -> CheckResult:
        self.checks.append(check)
        return check

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return str(v)
            if isinstance(v, (np.floating, np.integer, np.bool_)):
                return clean(v.item())
            if isinstance(v, dict):
                return {k: clean(x) for k, x in v.items()}
            if isinstance(v, (list, tuple)):
                return [clean(x) for x in v]
            return v

        return json.dumps(clean({"passed": self.passed, "checks": [asdict(c) for c in self.checks]}), indent=2)


def fit_slope(steps: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log error`` against ``log step`` (at least three levels)."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if steps.size < 3:
        raise ValueError(f"slope needs at least 3 refinement levels, got {steps.size}")
    if np.any(errors <= 0) or not np.all(np.isfinite(errors)):
        return float("nan")
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


def slice_l2(grid: Grid, fields: np.ndarray) -> np.ndarray:
    axes = tuple(range(1, grid.d + 1))
    return np.sqrt(grid.cell_volume * np.sum(np.abs(fields) ** 2, axis=axes))


def mass_drift(mass_or_norms, *, squared: bool = True) -> np.ndarray:
    """Relative drift ``| ||X_m|| - ||x|| | / ||x||`` per slice.

    The input is the ``mass`` series (squared L^2 norm) unless ``squared=False``.
    Zero initial mass yields the absolute drift.
    """
    a = np.asarray(mass_or_norms, dtype=float)
    norms = np.sqrt(np.maximum(a, 0.0)) if squared else a
    d = np.abs(norms - norms[0])
    return d / norms[0] if norms[0] > 0 else d


def _ito_increments(noise: NoiseModel, path: BrownianPath, m_end: int) -> np.ndarray:
    """``dW_m = i sum_j phi_j dbeta_j(t_m)`` for ``m < m_end``."""
    inc = path.increments[:, :m_end]
    return 1j * np.tensordot(inc.T, noise.phi, axes=(1, 0)) if noise.N else None


def weak_form_residual(
    grid: Grid,
    noise: NoiseModel,
    path: BrownianPath,
    X: np.ndarray,
    alpha: float,
    lam: float,
) -> np.ndarray:
    """``||X_m - x + sum_{r<m} (i lap X_r + mu X_r + i lam g(X_r)) dt - sum_{r<m} X_r dW_r||_{L^2}``.

    Left-point sums throughout; the stochastic sum is the Ito sum against the
    stored increments.  Slice 0 is exactly zero.
    """
    X = np.asarray(X)
    M = X.shape[0] - 1
    if M > path.M:
        raise ValueError(f"trajectory has {M} steps, path only {path.M}")
    axes = tuple(range(1, grid.d + 1))
    left = X[:-1]
    lap = np.fft.ifftn(-grid.k2 * np.fft.fftn(left, axes=axes), axes=axes)
    drift = 1j * lap + noise.mu() * left + 1j * lam * nonlinearity(left, alpha)
    terms = path.dt * drift
    dW = _ito_increments(noise, path, M)
    if dW is not None:
        terms = terms - left * dW
    R = np.empty_like(X, dtype=complex)
    R[0] = 0.0
    R[1:] = X[1:] - X[0] + np.cumsum(terms, axis=0)
    out = slice_l2(grid, R)
    out[0] = 0.0
    return out


def equivalence_error(
    grid: Grid,
    noise: NoiseModel,
    path_direct: BrownianPath,
    path_rescaled: BrownianPath,
    X: np.ndarray,
    Y: np.ndarray,
    *,
    relative: bool = True,
) -> np.ndarray:
    """``||e^{W(t_m)} y_m - X_m||_{L^2}`` per slice (divided by ``||x||`` when relative)."""
    if path_direct != path_rescaled:
        raise ValueError("records were driven by different Brownian paths")
    X = np.asarray(X)
    Y = np.asarray(Y)
    if X.shape != Y.shape:
        raise ValueError(f"trajectory shapes differ: {X.shape} vs {Y.shape}")
    phase = np.stack([noise.exp_W(path_direct.beta[:, m]) for m in range(X.shape[0])])
    err = slice_l2(grid, phase * Y - X)
    if relative:
        x0 = slice_l2(grid, X[:1])[0]
        if x0 > 0:
            err = err / x0
    return err


def _dt_norms(grid, times, fields):
    """``||d_t y(t_m)||_{L^2}`` with centered differences (one-sided at the ends)."""
    d = np.gradient(np.asarray(fields), np.asarray(times), axis=0, edge_order=1)
    return slice_l2(grid, d)


def lipschitz_check(grid: Grid, times, fields, *, tolerance: float = 0.05) -> CheckResult:
    """Largest difference quotient against ``max_m ||d_t y||_{L^2}``.

    The maximum over all pairs ``s < t`` equals the maximum over neighbouring grid
    times (triangle inequality), so only neighbours are scanned.
    """
    times = np.asarray(times, dtype=float)
    fields = np.asarray(fields)
    if times.size < 2:
        return CheckResult("lipschitz", 0.0, 0.0, True)
    q = slice_l2(grid, np.diff(fields, axis=0)) / np.diff(times)
    return _lipschitz_result(q, _dt_norms(grid, times, fields), tolerance)


def _lipschitz_result(q, deriv, tolerance, **details) -> CheckResult:
    quotient = float(np.max(q))
    deriv = float(np.max(deriv))
    ratio = quotient / deriv if deriv > 0 else 0.0
    return CheckResult(
        "lipschitz",
        quotient,
        deriv * (1.0 + tolerance),
        quotient <= deriv * (1.0 + tolerance),
        details={"dt_linf_l2": deriv, "ratio": ratio, **details},
    )


def lipschitz_from_quotients(forward, centered, *, upto: int | None = None, tolerance: float = 0.05) -> CheckResult:
    """``lipschitz_check`` from streamed quotients on a uniform grid, over slices ``0..upto``.

    ``forward[m] = ||y_{m+1} - y_m|| / dt`` and ``centered[m] = ||y_{m+2} - y_m|| / (2 dt)``;
    the derivative estimate is one-sided at both ends of the window, exactly as
    ``lipschitz_check`` computes it on the truncated trajectory.
    """
    forward = np.asarray(forward, dtype=float)
    centered = np.asarray(centered, dtype=float)
    M = forward.size if upto is None else int(upto)
    if M < 1:
        return CheckResult("lipschitz", 0.0, 0.0, True)
    q = forward[:M]
    deriv = np.concatenate([q[:1], centered[: M - 1], q[-1:]])
    return _lipschitz_result(q, deriv, tolerance, slices=M + 1)


def lipschitz_for_record(record, form: str | None = None, *, tolerance: float = 0.05) -> CheckResult:
    """Lipschitz check of ``y`` for an in-memory run, up to any suspected blow-up.

    The bound concerns the existence interval, so a run whose H^2 norm crossed the
    blow-up threshold is checked on the slices before the crossing.
    """
    if not record.quotients:
        raise ValueError("record carries no streamed quotients (reloaded runs must be re-run)")
    form = form or ("rescaled" if "rescaled" in record.quotients else next(iter(record.quotients)))
    forward, centered = record.quotients[form]
    cross = record.metadata.get("blowup_suspected_index")
    upto = None if cross is None else max(int(cross) - 1, 0)
    check = lipschitz_from_quotients(forward, centered, upto=upto, tolerance=tolerance)
    check.details.update(formulation=form, truncated_at=None if cross is None else float(record.times[upto]))
    return check


def lipschitz_check_all_pairs(grid: Grid, times, fields) -> float:
    """Brute-force ``max_{s<t} ||y(t)-y(s)|| / |t-s|`` (for small trajectories)."""
    times = np.asarray(times, dtype=float)
    fields = np.asarray(fields)
    best = 0.0
    for i in range(times.size):
        diff = slice_l2(grid, fields[i + 1 :] - fields[i])
        if diff.size:
            best = max(best, float(np.max(diff / (times[i + 1 :] - times[i]))))
    return best


def _sobolev_slices(grid: Grid, fields, s: float) -> np.ndarray:
    axes = tuple(range(1, grid.d + 1))
    c2 = np.abs(np.fft.fftn(fields, axes=axes)) ** 2
    return np.sqrt(grid.cell_volume / grid.size * np.sum(c2 * (1.0 + grid.k2) ** s, axis=axes))


@dataclass
class DependenceRow:
    scale: float
    l2: float
    h1: float
    h2: float
    interpolation_ok: bool
    worst_interpolation: float


def continuous_dependence(
    problem: Problem,
    x: np.ndarray,
    delta: np.ndarray,
    scales: Sequence[float],
    *,
    formulation: str = "rescaled",
    m_end: int | None = None,
    rtol: float = 1e-6,
) -> list[DependenceRow]:
    """Solution error table for data ``x + scale * delta``.

    ``interpolation_ok`` reports ``||e||_{H^1} <= sqrt(||e||_{L^2} ||e||_{H^2}) (1 + rtol)``
    on every slice; ``worst_interpolation`` is the largest ratio of the two sides.
    """
    grid = problem.grid
    base = np.stack(solve(problem, x, formulation, m_end=m_end))
    rows = []
    for sc in scales:
        if sc == 0:
            rows.append(DependenceRow(0.0, 0.0, 0.0, 0.0, True, 0.0))
            continue
        other = np.stack(solve(problem, x + sc * delta, formulation, m_end=m_end))
        e = other - base
        l2 = _sobolev_slices(grid, e, 0.0)
        h1 = _sobolev_slices(grid, e, 1.0)
        h2 = _sobolev_slices(grid, e, 2.0)
        bound = np.sqrt(l2 * h2)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = np.where(bound > 0, h1 / bound, 0.0)
        rows.append(
            DependenceRow(float(sc), float(l2.max()), float(h1.max()), float(h2.max()),
                          bool(np.all(h1 <= bound * (1.0 + rtol))), float(r.max()))
        )
    return rows


def blowup_monitor(times, h2, threshold: float) -> float | None:
    """First time the H^2 series exceeds ``threshold`` or is non-finite, else ``None``."""
    h2 = np.asarray(h2, dtype=float)
    hit = np.flatnonzero(~(h2 <= threshold))
    return float(np.asarray(times)[hit[0]]) if hit.size else None


def uniqueness_probe(config, *, thread_counts=(1, 2)) -> float:
    """Max distance between two independent integrations of the same config.

    The runs differ only in the ``SNLS_THREADS`` cap; determinism makes the
    distance exactly zero.
    """
    import os

    from .runner import run

    saved = os.environ.get("SNLS_THREADS")
    runs = []
    try:
        for k in thread_counts[:2]:
            os.environ["SNLS_THREADS"] = str(k)
            runs.append(run(config))
    finally:
        if saved is None:
            os.environ.pop("SNLS_THREADS", None)
        else:
            os.environ["SNLS_THREADS"] = saved
    a, b = runs
    dist = 0.0
    for form in a.trajectories:
        dist = max(dist, float(np.max(np.abs(a.trajectories[form] - b.trajectories[form]))))
    return dist


def refinement_study(metric: Callable[[BrownianPath], float], path: BrownianPath, levels: int = 3):
    """Evaluate ``metric`` on ``path`` and its successive bridge refinements.

    Returns ``(steps, values, slope)``; all levels share the coarse increments.
    """
    steps, values = [], []
    p = path
    for lev in range(levels):
        if lev:
            p = refine_path(p)
        steps.append(p.dt)
        values.append(float(metric(p)))
    return steps, values, fit_slope(steps, values)


def _level_config(config, path: BrownianPath, **changes):
    from dataclasses import replace

    return replace(config, dt=path.dt, **changes)


def base_path(config) -> BrownianPath:
    """The coarse Brownian path a config's refinement studies start from."""
    from .noise import sample_path

    return sample_path(len(config.noise), config.T, config.dt, config.seed)


def equivalence_study(config, levels: int = 3, *, path: BrownianPath | None = None,
                      slope_floor: float = 1.0, threshold: float = 1e-4) -> CheckResult:
    """``sup_t ||e^W y - X|| / ||x||`` on ``levels`` bridge refinements of one path."""
    from .runner import run

    path = base_path(config) if path is None else path

    def metric(p):
        cfg = _level_config(config, p, formulation="both", snapshot_stride=p.M or 1)
        return float(run(cfg, path=p).series["equiv_err"].max())

    steps, values, slope = refinement_study(metric, path, levels)
    return CheckResult(
        "equivalence_error", values[-1], threshold,
        bool(slope >= slope_floor and values[-1] <= threshold),
        slope, slope_floor, steps, values,
        details={"noise_placement": config.noise_placement},
    )


def residual_study(config, levels: int = 3, *, path: BrownianPath | None = None,
                   slope_floor: float = 0.5) -> CheckResult:
    """Sup weak-form residual of the direct solver under bridge refinement.

    Passes when the slope reaches the floor and every level's residual vanishes
    at ``t = 0``; the threshold is the coarsest level's value, which the finest
    must undercut.
    """
    from .runner import build_problem

    path = base_path(config) if path is None else path
    zero_at_start = True

    def metric(p):
        nonlocal zero_at_start
        problem, x = build_problem(_level_config(config, p), p)
        X = np.stack(solve(problem, x, "direct"))
        r = weak_form_residual(problem.grid, problem.noise, p, X, config.alpha, config.lam)
        zero_at_start = zero_at_start and r[0] == 0.0
        return float(r.max())

    steps, values, slope = refinement_study(metric, path, levels)
    return CheckResult(
        "weak_form_residual", values[-1], values[0],
        bool(slope >= slope_floor and values[-1] < values[0] and zero_at_start),
        slope, slope_floor, steps, values,
        details={"zero_at_start": zero_at_start},
    )


def rescaled_mass_study(config, levels: int = 3, *, path: BrownianPath | None = None,
                        slope_floor: float = 3.5) -> CheckResult:
    """Final relative mass drift of the rescaled solver under bridge refinement."""
    from .runner import build_problem

    path = base_path(config) if path is None else path

    def metric(p):
        problem, x = build_problem(_level_config(config, p), p)
        y = solve(problem, x, "rescaled")
        m = np.array([np.sum(np.abs(v) ** 2) for v in (y[0], y[-1])])
        return float(mass_drift(m)[-1])

    steps, values, slope = refinement_study(metric, path, levels)
    return CheckResult("rescaled_mass_drift", values[-1], values[0],
                       bool(slope >= slope_floor), slope, slope_floor, steps, values)


MASS_DRIFT_PER_1000 = 1e-10
EQUIVALENCE_THRESHOLD = 1e-4


def evaluate_checks(record, names: Sequence[str] | None = None) -> DiagnosticReport:
    """Single-level checks on an in-memory run.

    ``mass_drift`` bounds the direct solver's drift by 1e-10 per 10^3 steps;
    ``equivalence_error`` needs both formulations; ``weak_form_residual`` re-solves
    the direct scheme on the stored path and requires an exact zero at ``t = 0``;
    ``blowup_monitor`` reports a suspected crossing without failing (evidence only).
    """
    from .config import DIAGNOSTICS
    from .runner import build_problem

    names = list(DIAGNOSTICS) if not names else list(names)
    cfg = record.config
    report = DiagnosticReport()
    M = record.path.M
    for name in names:
        if name == "mass_drift":
            series = record.series if cfg.formulation != "rescaled" else None
            if series is None:
                continue
            drift = float(mass_drift(series["mass"]).max())
            bound = MASS_DRIFT_PER_1000 * max(1.0, M / 1000)
            report.add(CheckResult("mass_drift", drift, bound, drift <= bound))
        elif name == "equivalence_error":
            if "equiv_err" not in record.series:
                continue
            e = float(np.max(record.series["equiv_err"]))
            report.add(CheckResult("equivalence_error", e, EQUIVALENCE_THRESHOLD,
                                   bool(e <= EQUIVALENCE_THRESHOLD) and record.series["equiv_err"][0] == 0.0))
        elif name == "weak_form_residual":
            problem, x = build_problem(cfg, record.path)
            X = np.stack(solve(problem, x, "direct"))
            r = weak_form_residual(problem.grid, problem.noise, record.path, X, cfg.alpha, cfg.lam)
            report.add(CheckResult("weak_form_residual", float(r.max()), float("inf"),
                                   bool(r[0] == 0.0 and np.all(np.isfinite(r))),
                                   details={"at_t0": float(r[0])}))
        elif name == "lipschitz_check":
            if record.quotients:
                report.add(lipschitz_for_record(record))
        elif name == "blowup_monitor":
            t = blowup_monitor(record.times, record.series["h2"], record.metadata.get("blowup_threshold", np.inf))
            report.add(CheckResult("blowup_monitor", float("nan") if t is None else t,
                                   record.metadata.get("blowup_threshold", np.inf), True,
                                   details={"suspected_at": t, "dt": cfg.dt, "heuristic": True}))
        else:
            raise ValueError(f"unknown check {name!r}")
    return report


def report_csv(report: DiagnosticReport) -> str:
    """One row per check and refinement level: ``check,level,dt,metric,threshold,slope,passed``."""
    lines = ["check,level,dt,metric,threshold,slope,passed"]
    for c in report.checks:
        slope = "" if c.slope is None else repr(float(c.slope))
        levels = c.levels or [None]
        metrics = c.level_metrics or [c.metric]
        for i, (dt, m) in enumerate(zip(levels, metrics)):
            lines.append(",".join([c.name, str(i), "" if dt is None else repr(float(dt)), repr(float(m)),
                                   repr(float(c.threshold)), slope, str(c.passed).lower()]))
    return "\n".join(lines) + "\n"
