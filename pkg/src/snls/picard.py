"""Fixed-point machinery for the rescaled equation at desk scale.

The Duhamel map ``F(y)(t) = U(t,0)x - i lam int_0^t U(t,s) g(y(s)) ds`` is realized
by marching ``u' = A(t) u - i lam g(y(t))`` with the same RK4 scheme as the
solver, so one application costs O(M) steps.  ``y`` between grid times is taken
piecewise linear.

Space-time norms ``L^q(0,t; W^{s,p})`` use the trapezoid rule in time on the
stored grid.  Strichartz pairs are written ``(p, q)`` with ``p`` the spatial and
``q`` the temporal exponent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .dyadic import trapezoid_weights
from .dynamics import Problem, nonlinearity, rk4_march
from .exponents import INF, StrichartzPair, dual_exponent, is_admissible, proof_pair, theta_gap
from .spectral import Grid, bessel_multiplier, sobolev_norm

__all__ = [
    "slice_norms",
    "time_norm",
    "cumulative_time_norm",
    "strichartz_norm",
    "duhamel_map",
    "EmpiricalConstant",
    "estimate_strichartz_constant",
    "constant_curve",
    "stopping_process",
    "TrajectoryBall",
    "ball_and_stopping_time",
    "ContractionReport",
    "measure_contraction",
    "pointwise_g_lipschitz_check",
    "PicardResult",
    "picard_iterate",
    "random_band_limited",
    "step1_setup",
    "picard_lab",
]


def _to_float(x) -> float:
    return math.inf if x is INF else float(x)


def slice_norms(grid: Grid, values: np.ndarray, s: float = 0.0, p=2.0) -> np.ndarray:
    """``||u(t_m)||_{W^{s,p}}`` for every slice of a ``(M+1, *shape)`` array."""
    p = _to_float(p)
    axes = tuple(range(1, grid.d + 1))
    v = np.asarray(values)
    if s:
        v = np.fft.ifftn(bessel_multiplier(grid, s) * np.fft.fftn(v, axes=axes), axes=axes)
    a = np.abs(v).reshape(v.shape[0], -1)
    if math.isinf(p):
        return a.max(axis=1)
    amax = a.max(axis=1)
    safe = np.where(amax > 0, amax, 1.0)
    inner = grid.cell_volume * np.sum((a / safe[:, None]) ** p, axis=1)
    return np.where(amax > 0, amax * inner ** (1.0 / p), 0.0)


def time_norm(times: np.ndarray, a: np.ndarray, q) -> float:
    """Trapezoid ``L^q`` norm in time of a nonnegative series."""
    q = _to_float(q)
    a = np.asarray(a, dtype=float)
    if math.isinf(q):
        return float(a.max())
    top = a.max()
    if top == 0:
        return 0.0
    return float(top * np.dot(trapezoid_weights(np.asarray(times)), (a / top) ** q) ** (1.0 / q))


def cumulative_time_norm(times: np.ndarray, a: np.ndarray, q) -> np.ndarray:
    """``L^q(0, t_k)`` norms for every ``k`` at once."""
    q = _to_float(q)
    a = np.asarray(a, dtype=float)
    if math.isinf(q):
        return np.maximum.accumulate(a)
    dt = np.diff(times)
    aq = a**q
    acc = np.concatenate([[0.0], np.cumsum(0.5 * dt * (aq[:-1] + aq[1:]))])
    return acc ** (1.0 / q)


def strichartz_norm(grid: Grid, times, values, pair: StrichartzPair) -> float:
    """``||u||_{L^inf L^2} + ||u||_{L^q L^p}``."""
    return time_norm(times, slice_norms(grid, values, 0, 2), INF) + time_norm(
        times, slice_norms(grid, values, 0, pair.p), pair.q
    )


def random_band_limited(grid: Grid, rng: np.random.Generator, *, band: int | None = None, decay=1.0):
    """Smooth random field with Fourier support in ``|m| <= band`` per axis.

    Coefficients are complex Gaussians damped by ``exp(-decay*|m|^2/band^2)``; the
    field is normalized to unit L^2 norm.
    """
    band = max(grid.n // 16, 2) if band is None else band
    modes = grid.modes
    keep = np.abs(modes) <= band
    c = np.zeros(grid.shape, dtype=complex)
    shape = (int(keep.sum()),) * grid.d
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    idx = np.ix_(*([np.flatnonzero(keep)] * grid.d))
    m2 = sum(mm**2 for mm in np.meshgrid(*([modes[keep]] * grid.d), indexing="ij"))
    c[idx] = z * np.exp(-decay * m2 / band**2)
    f = np.fft.ifftn(c)
    norm = math.sqrt(grid.cell_volume * np.vdot(f, f).real)
    return f / norm


def _sample_rng(seed: int, i: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(7, i))))


def duhamel_map(
    problem: Problem,
    x: np.ndarray,
    y: np.ndarray,
    *,
    start: int = 0,
    stop: int | None = None,
    nonlinear: bool = True,
) -> np.ndarray:
    """``F(y)`` on ``t_start .. t_stop`` as a ``(stop - start + 1, *shape)`` array.

    ``y`` holds the slices ``t_start .. t_stop`` (extra trailing slices are
    ignored) and ``x`` is the value at ``t_start``; ``start > 0`` gives the
    restarted map ``U(t, t_start) x - i lam int_{t_start}^t U(t,s) g(y(s)) ds``.
    ``nonlinear=False`` switches ``g`` off, leaving ``U(t, t_start) x``.
    """
    stop = problem.path.M if stop is None else stop
    y = np.asarray(y)
    if y.shape[0] < stop - start + 1:
        raise ValueError(f"y has {y.shape[0]} slices, need {stop - start + 1}")
    lam = problem.lam
    forcing = None
    if nonlinear and lam:
        gy = nonlinearity(y[: stop - start + 1], problem.alpha)
        if problem.dealias:
            axes = tuple(range(1, problem.grid.d + 1))
            gy = np.fft.ifftn(np.where(problem.grid.dealias_mask, np.fft.fftn(gy, axes=axes), 0), axes=axes)
        gy = -1j * lam * gy

        def forcing(m, frac):
            j = m - start
            if frac == 0.0:
                return gy[j]
            if frac >= 1.0:
                return gy[j + 1]
            return (1.0 - frac) * gy[j] + frac * gy[j + 1]

    traj = rk4_march(problem, x, start, stop, nonlinear=False, forcing=forcing)
    return np.stack(traj)


@dataclass
class EmpiricalConstant:
    """Max-ratio estimate of a Strichartz constant.

    ``curve[k]`` is the estimate on ``[0, times[k]]``; it is nondecreasing by
    construction because every restricted ratio enters all later maxima.
    """

    estimate: float
    samples: int
    ratios: list[float]
    times: np.ndarray
    curve: np.ndarray
    skipped: int = 0

    def at(self, t_index: int) -> float:
        return float(self.curve[t_index])


def _ratio_series(problem, m_end, u0, f, pair1, pair2, s):
    grid = problem.grid
    times = problem.path.times[: m_end + 1]
    forcing = None
    if f is not None:
        def forcing(m, frac):
            return f(problem.path.times[m] + frac * problem.dt)
    u = np.stack(rk4_march(problem, u0, 0, m_end, nonlinear=False, forcing=forcing))
    lhs = cumulative_time_norm(times, slice_norms(grid, u, s, pair1.p), pair1.q)
    rhs = np.full(times.size, sobolev_norm(grid, u0, s) if s else sobolev_norm(grid, u0, 0))
    if f is not None:
        p2d, q2d = dual_exponent(pair2.p), dual_exponent(pair2.q)
        fv = np.stack([f(t) for t in times])
        rhs = rhs + cumulative_time_norm(times, slice_norms(grid, fv, s, p2d), q2d)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(rhs > 0, lhs / rhs, np.nan)
    return r


def _check_pair(pair: StrichartzPair):
    if not is_admissible(pair.d, pair.p, pair.q):
        raise ValueError(f"pair {pair} is not admissible in dimension {pair.d}")


def _random_forcing(grid: Grid, rng, T: float, scale: float):
    f0 = random_band_limited(grid, rng)
    f1 = random_band_limited(grid, rng)
    omega = 2.0 * math.pi * rng.uniform(0.0, 2.0) / max(T, 1e-12)

    def f(t):
        return scale * (math.cos(omega * t) * f0 + math.sin(omega * t) * f1)

    return f


def estimate_strichartz_constant(
    problem: Problem,
    T: float,
    pair1: StrichartzPair,
    pair2: StrichartzPair,
    samples: int = 64,
    *,
    seed: int = 0,
    s: float = 2.0,
    with_forcing: bool = True,
    with_data: bool = True,
) -> EmpiricalConstant:
    """Max over random ``(u0, f)`` of ``||u||_{L^q1 W^{s,p1}} / (||u0||_{H^s} + ||f||_{L^q2' W^{s,p2'}})``.

    Sample ``i`` is drawn from its own stream keyed by ``(seed, i)``, so a larger
    sample count only adds samples.  Degenerate samples (zero right-hand side)
    are skipped.
    """
    _check_pair(pair1)
    _check_pair(pair2)
    m_end = int(round(T / problem.dt))
    if not 0 <= m_end <= problem.path.M:
        raise ValueError(f"T = {T} outside the path horizon {problem.path.T}")
    grid = problem.grid
    curve = np.zeros(m_end + 1)
    ratios, skipped = [], 0
    for i in range(samples):
        rng = _sample_rng(seed, i)
        u0 = random_band_limited(grid, rng) * rng.uniform(0.1, 1.0) if with_data else grid.zeros()
        f = _random_forcing(grid, rng, T, rng.uniform(0.1, 2.0)) if with_forcing else None
        r = _ratio_series(problem, m_end, u0, f, pair1, pair2, s)
        if np.all(np.isnan(r)):
            skipped += 1
            continue
        r = np.fmax.accumulate(np.nan_to_num(r, nan=0.0))
        ratios.append(float(r[-1]))
        curve = np.maximum(curve, r)
    estimate = float(curve[-1]) if ratios else math.nan
    return EmpiricalConstant(estimate, len(ratios), ratios, problem.path.times[: m_end + 1], curve, skipped)


def constant_curve(
    problem: Problem,
    T: float,
    pairs: Sequence[StrichartzPair],
    samples: int = 32,
    *,
    seed: int = 0,
    s: float = 2.0,
) -> EmpiricalConstant:
    """Pointwise max of the estimates over every ``(pair1, pair2)`` combination."""
    best = None
    for a, p1 in enumerate(pairs):
        for b, p2 in enumerate(pairs):
            est = estimate_strichartz_constant(problem, T, p1, p2, samples, seed=seed + 1000 * a + b, s=s)
            if best is None:
                best = est
            else:
                best = EmpiricalConstant(
                    max(best.estimate, est.estimate),
                    best.samples + est.samples,
                    best.ratios + est.ratios,
                    best.times,
                    np.maximum(best.curve, est.curve),
                    best.skipped + est.skipped,
                )
    return best


def stopping_process(times, C, h: float, alpha: float, theta) -> np.ndarray:
    """``Z_t = 2^(a-1) C^a (h + h^a)^(a-1) (t^theta + t + t^a) + C t^a (1 + h^(a-1))``."""
    t = np.asarray(times, dtype=float)
    C = np.broadcast_to(np.asarray(C, dtype=float), t.shape)
    a = float(alpha)
    th = float(theta)
    lead = 2.0 ** (a - 1) * C**a * (h + h**a) ** (a - 1) * (t**th + t + t**a)
    return lead + C * t**a * (1.0 + h ** (a - 1))


@dataclass
class TrajectoryBall:
    """``{y : ||y||_str, ||d_t y||_str, ||lap y||_{L^inf L^2} <= radius}`` on ``[0, tau]``."""

    radius: float
    tau: float
    index: int
    pair: StrichartzPair
    Z: np.ndarray = field(repr=False, default=None)

    def components(self, grid: Grid, times, values) -> dict:
        times = np.asarray(times)
        values = np.asarray(values)
        out = {"str": strichartz_norm(grid, times, values, self.pair)}
        if values.shape[0] > 1:
            dtv = np.gradient(values, times, axis=0)
            out["dt_str"] = strichartz_norm(grid, times, dtv, self.pair)
        else:
            out["dt_str"] = 0.0
        axes = tuple(range(1, grid.d + 1))
        lap = np.fft.ifftn(-grid.k2 * np.fft.fftn(values, axes=axes), axes=axes)
        out["lap_linf_l2"] = float(slice_norms(grid, lap, 0, 2).max())
        return out

    def contains(self, grid: Grid, times, values) -> bool:
        return all(v <= self.radius for v in self.components(grid, times, values).values())


def ball_and_stopping_time(
    x_h2: float,
    alpha,
    times: np.ndarray,
    C_curve: np.ndarray,
    theta,
    pair: StrichartzPair | None = None,
) -> TrajectoryBall:
    """First grid time with ``Z > 1/2`` (or the horizon) and ``M1 = 2 C_tau (h + h^alpha)``."""
    times = np.asarray(times, dtype=float)
    h = float(x_h2)
    a = float(alpha)
    Z = stopping_process(times, C_curve, h, a, theta)
    over = np.flatnonzero(Z > 0.5)
    k = int(over[0]) if over.size else times.size - 1
    C_tau = float(np.broadcast_to(C_curve, times.shape)[k])
    return TrajectoryBall(2.0 * C_tau * (h + h**a), float(times[k]), k, pair, Z)


@dataclass
class ContractionReport:
    kappa: float
    ratios: list[float]
    skipped: int


def _ball_trajectory(problem: Problem, x, ball: TrajectoryBall, rng) -> np.ndarray:
    """Affine-in-time draw ``x + r0 a + t r1 b`` pulled into the ball by rejection."""
    grid = problem.grid
    times = problem.path.times[: ball.index + 1]
    a, b = random_band_limited(grid, rng), random_band_limited(grid, rng)
    r0 = rng.uniform(0.0, 0.5) * ball.radius
    r1 = rng.uniform(0.0, 1.0) * ball.radius
    tt = times.reshape((-1,) + (1,) * grid.d)
    y = x[None] + r0 * a[None] + tt * (r1 * b)[None]
    while True:
        top = max(ball.components(grid, times, y).values())
        if top <= ball.radius:
            return y
        y = y * (ball.radius / top) * rng.uniform(0.5, 1.0)


def measure_contraction(
    problem: Problem,
    x: np.ndarray,
    ball: TrajectoryBall,
    pairs: int = 16,
    *,
    seed: int = 0,
    nonlinear: bool = True,
) -> ContractionReport:
    """``max ||F(y1) - F(y2)||_{L^q L^p} / ||y1 - y2||_{L^q L^p}`` over sampled pairs in the ball."""
    grid = problem.grid
    k = ball.index
    times = problem.path.times[: k + 1]
    x = np.asarray(x, dtype=complex).reshape(grid.shape)
    ratios, skipped = [], 0
    for i in range(pairs):
        rng = _sample_rng(seed, 10_000 + i)
        y1 = _ball_trajectory(problem, x, ball, rng)
        y2 = _ball_trajectory(problem, x, ball, rng)
        den = time_norm(times, slice_norms(grid, y1 - y2, 0, ball.pair.p), ball.pair.q)
        if den == 0:
            skipped += 1
            continue
        F1 = duhamel_map(problem, x, y1, stop=k, nonlinear=nonlinear)
        F2 = duhamel_map(problem, x, y2, stop=k, nonlinear=nonlinear)
        num = time_norm(times, slice_norms(grid, F1 - F2, 0, ball.pair.p), ball.pair.q)
        ratios.append(num / den)
    return ContractionReport(max(ratios, default=0.0), ratios, skipped)


def pointwise_g_lipschitz_check(y1: np.ndarray, y2: np.ndarray, alpha: float, *, slack: float = 1e-12) -> bool:
    """``|g(y1) - g(y2)| <= alpha (|y1|^(a-1) + |y2|^(a-1)) |y1 - y2|`` at every point.

    ``slack`` is a relative allowance for floating point rounding only.
    """
    y1 = np.asarray(y1, dtype=complex)
    y2 = np.asarray(y2, dtype=complex)
    if y1.shape != y2.shape:
        raise ValueError("fields must share a grid")
    lhs = np.abs(nonlinearity(y1, alpha) - nonlinearity(y2, alpha))
    rhs = alpha * (np.abs(y1) ** (alpha - 1) + np.abs(y2) ** (alpha - 1)) * np.abs(y1 - y2)
    scale = np.abs(nonlinearity(y1, alpha)) + np.abs(nonlinearity(y2, alpha))
    return bool(np.all(lhs <= rhs + slack * scale))


@dataclass
class PicardResult:
    iterate: np.ndarray
    increments: list[float]
    ratios: list[float]
    geometric_ratio: float


def picard_iterate(
    problem: Problem,
    x: np.ndarray,
    stop: int,
    iterations: int = 6,
    *,
    pair: StrichartzPair | None = None,
) -> PicardResult:
    """Iterate ``y <- F(y)`` from ``y0 = x`` (constant in time) on ``[0, t_stop]``.

    ``increments[k] = ||y^{k+1} - y^k||_{L^q L^p}``; ``geometric_ratio`` is the
    exponentiated least-squares slope of ``log increments`` against ``k``.
    """
    grid = problem.grid
    if pair is None:
        pair = proof_pair(grid.d, Fraction(problem.alpha).limit_denominator(1000), "step1")
    x = np.asarray(x, dtype=complex).reshape(grid.shape)
    times = problem.path.times[: stop + 1]
    y = np.broadcast_to(x, (stop + 1,) + grid.shape).copy()
    increments = []
    for _ in range(iterations):
        y_new = duhamel_map(problem, x, y, stop=stop)
        increments.append(time_norm(times, slice_norms(grid, y_new - y, 0, pair.p), pair.q))
        y = y_new
    ratios = [b / a for a, b in zip(increments[:-1], increments[1:]) if a > 0]
    pos = [v for v in increments if v > 0]
    if len(pos) >= 2:
        slope = np.polyfit(np.arange(len(pos)), np.log(pos), 1)[0]
        geo = float(math.exp(slope))
    else:
        geo = 0.0
    return PicardResult(y, increments, ratios, geo)


def step1_setup(alpha, d: int):
    """The Step 1 pair and its Hoelder gap."""
    pair = proof_pair(d, alpha, "step1")
    return pair, theta_gap(pair.q)


def picard_lab(
    config,
    *,
    samples: int = 16,
    seed: int | None = None,
    iterations: int = 6,
    contraction_pairs: int = 8,
    path=None,
) -> dict:
    """Step 1 end to end: constant curve, stopping time, ball, contraction, iteration.

    ``C_hat`` is the empirical constant over the Step 1 pair and the energy pair
    ``(2, inf)``; ``tau1`` is the first grid time with ``Z > 1/2``.  The Picard
    iterate is compared with the rescaled solver on ``[0, tau1]`` in ``L^inf L^2``.
    """
    from .dynamics import solve
    from .runner import build_problem

    seed = config.seed if seed is None else seed
    problem, x = build_problem(config, path)
    grid = problem.grid
    alpha = Fraction(repr(config.alpha))
    pair, theta = step1_setup(alpha, grid.d)
    pairs = [pair, StrichartzPair(2, INF, grid.d)]
    const = constant_curve(problem, config.T, pairs, samples, seed=seed)
    h = sobolev_norm(grid, x, 2)
    ball = ball_and_stopping_time(h, config.alpha, const.times, const.curve, theta, pair)
    contraction = measure_contraction(problem, x, ball, contraction_pairs, seed=seed)
    it = picard_iterate(problem, x, ball.index, iterations, pair=pair)
    ref = np.stack(solve(problem, x, "rescaled", m_end=ball.index))
    match = float(slice_norms(grid, it.iterate - ref, 0, 2).max())
    return {
        "alpha": config.alpha,
        "d": grid.d,
        "dt": problem.dt,
        "seed": seed,
        "pair": [str(pair.p), str(pair.q)],
        "theta": str(theta),
        "x_h2": h,
        "C_hat": float(const.curve[ball.index]),
        "C_hat_horizon": const.estimate,
        "tau1": ball.tau,
        "tau1_index": ball.index,
        "M1": ball.radius,
        "kappa_hat": contraction.kappa,
        "per_sample": const.ratios,
        "contraction_ratios": contraction.ratios,
        "picard_increments": it.increments,
        "geometric_ratio": it.geometric_ratio,
        "solver_match_linf_l2": match,
    }
