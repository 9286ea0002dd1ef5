import math
from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_field
from snls.dynamics import Propagator, propagate_linear, solve
from snls.diagnostics import fit_slope
from snls.exponents import INF, StrichartzPair
from snls.noise import refine_path
from snls.picard import (
    TrajectoryBall,
    ball_and_stopping_time,
    duhamel_map,
    estimate_strichartz_constant,
    measure_contraction,
    picard_iterate,
    picard_lab,
    pointwise_g_lipschitz_check,
    slice_norms,
    step1_setup,
    stopping_process,
    time_norm,
)
from snls.runner import build_problem
from snls.scenarios import desk_noise, scenario

ENERGY = StrichartzPair(2, INF, 1)
STEP1 = StrichartzPair(3, 12, 1)


def desk(T=0.05, dt=1e-3, **kw):
    return build_problem(scenario("picard-desk", time={"T": T, "dt": dt}, **kw))


def test_duhamel_without_g_is_propagator():
    problem, x = desk()
    y = np.zeros((problem.path.M + 1,) + problem.grid.shape, complex)
    Fy = duhamel_map(problem, x, y, nonlinear=False)
    U = Propagator(problem)
    for m in (0, 10, problem.path.M):
        assert np.max(np.abs(Fy[m] - propagate_linear(U, x, 0, m))) < 1e-12


def test_duhamel_zero():
    problem, x = desk()
    y = np.zeros((problem.path.M + 1,) + problem.grid.shape, complex)
    assert not np.any(duhamel_map(problem, np.zeros_like(x), y))


def test_duhamel_rejects_short_trajectory():
    problem, x = desk()
    with pytest.raises(ValueError):
        duhamel_map(problem, x, np.zeros((3,) + problem.grid.shape))


def test_solver_is_approximate_fixed_point():
    problem, x = desk(T=0.05, dt=2e-3, initial={"amplitude": 1.5})
    steps, defects = [], []
    for _ in range(3):
        y = np.stack(solve(problem, x, "rescaled"))
        Fy = duhamel_map(problem, x, y)
        defects.append(float(slice_norms(problem.grid, Fy - y).max()))
        steps.append(problem.dt)
        problem = problem.at_step(problem.dt / 2)
    assert fit_slope(steps, defects) >= 1.0
    assert defects[-1] < defects[0]


def test_restarted_map_matches_tail():
    problem, x = desk()
    y = np.stack(solve(problem, x, "rescaled"))
    tail = duhamel_map(problem, y[20], y[20:], start=20)
    full = duhamel_map(problem, x, y)
    assert np.max(np.abs(tail[-1] - full[-1])) < 1e-6


def test_energy_pair_ratio_is_one_without_noise():
    problem, _ = desk(noise=[])
    est = estimate_strichartz_constant(problem, 0.05, ENERGY, ENERGY, 6, with_forcing=False)
    assert est.samples == 6
    assert np.allclose(est.ratios, 1.0, atol=1e-9)


def test_degenerate_samples_skipped():
    problem, _ = desk()
    est = estimate_strichartz_constant(problem, 0.05, ENERGY, ENERGY, 3, with_forcing=False, with_data=False)
    assert est.samples == 0 and est.skipped == 3
    assert math.isnan(est.estimate)


def test_constant_monotone_in_samples_and_time():
    problem, _ = desk()
    small = estimate_strichartz_constant(problem, 0.05, STEP1, ENERGY, 4, seed=3)
    big = estimate_strichartz_constant(problem, 0.05, STEP1, ENERGY, 8, seed=3)
    assert math.isfinite(small.estimate)
    assert big.estimate >= small.estimate
    assert big.ratios[:4] == small.ratios
    assert np.all(np.diff(big.curve) >= 0)


def test_constant_rejects_non_admissible_pair():
    problem, _ = desk()
    with pytest.raises(ValueError):
        estimate_strichartz_constant(problem, 0.05, StrichartzPair(3, 4, 1), ENERGY, 2)


def test_zero_data_ball():
    times = np.linspace(0, 0.1, 51)
    ball = ball_and_stopping_time(0.0, 3, times, np.ones_like(times), F(5, 6))
    # only the data-free term C t^alpha survives, and it stays below 1/2 here
    assert np.allclose(ball.Z, times**3, rtol=1e-14)
    assert ball.tau == pytest.approx(0.1) and ball.radius == 0.0


def _bisect(f, lo, hi):
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) <= 0 else (lo, mid)
    return hi


def test_stopping_time_against_root_bracketing():
    times = np.linspace(0, 0.05, 5001)
    Z = lambda t: 16 * (t ** (5 / 6) + t + t**3) + 2 * t**3
    root = _bisect(lambda t: Z(t) - 0.5, 0.0, 0.05)
    ball = ball_and_stopping_time(1.0, 3, times, np.ones_like(times), F(5, 6))
    k = ball.index
    assert times[k - 1] <= root < times[k]
    assert ball.radius == pytest.approx(2 * (1 + 1))
    assert np.allclose(ball.Z, Z(times), rtol=1e-13)


@given(st.floats(0, 3), st.floats(0, 3), st.floats(0.5, 3), st.floats(0.5, 3))
def test_stopping_process_monotone(h1, h2, c1, c2):
    t = np.linspace(0, 1, 41)
    (ha, hb), (ca, cb) = sorted((h1, h2)), sorted((c1, c2))
    Za = stopping_process(t, ca, ha, 3.0, F(5, 6))
    Zb = stopping_process(t, cb, hb, 3.0, F(5, 6))
    assert np.all(np.diff(Za) >= 0)
    assert np.all(Za <= Zb * (1 + 1e-12))


def test_contraction_zero_without_nonlinearity():
    problem, x = desk(lam=1)
    times = problem.path.times
    ball = TrajectoryBall(5.0, float(times[20]), 20, STEP1)
    rep = measure_contraction(problem, x, ball, 3, nonlinear=False)
    assert rep.kappa == 0.0


def test_contraction_skips_equal_pairs(monkeypatch):
    import snls.picard as pic

    problem, x = desk()
    ball = TrajectoryBall(5.0, float(problem.path.times[10]), 10, STEP1)
    monkeypatch.setattr(pic, "_ball_trajectory", lambda prob, x, ball, rng: np.broadcast_to(x, (11,) + x.shape).copy())
    rep = measure_contraction(problem, x, ball, 4)
    assert rep.skipped == 4 and rep.kappa == 0.0


@pytest.mark.parametrize("alpha", [2.0, 3.0, 3.5])
def test_g_lipschitz_pointwise(rng, alpha):
    y1, y2 = random_field(rng, (4096,)), random_field(rng, (4096,))
    assert pointwise_g_lipschitz_check(y1, y2, alpha)
    assert pointwise_g_lipschitz_check(y1, np.zeros_like(y1), alpha)
    assert pointwise_g_lipschitz_check(y1, y1, alpha)
    with pytest.raises(ValueError):
        pointwise_g_lipschitz_check(y1, y2[:10], alpha)


def test_picard_iteration_converges_geometrically():
    problem, x = desk()
    res = picard_iterate(problem, x, 18, 5)
    inc = res.increments
    assert all(b < a for a, b in zip(inc, inc[1:]))
    assert 0 < res.geometric_ratio < 0.5


def test_step1_setup():
    pair, theta = step1_setup(3, 1)
    assert (pair.p, pair.q) == (3, 12) and theta == F(5, 6)


def test_time_norm_trapezoid():
    t = np.linspace(0, 1, 101)
    assert time_norm(t, np.ones(101), 4) == pytest.approx(1.0)
    assert time_norm(t, t, INF) == 1.0
    assert time_norm(t, t, 2) == pytest.approx(math.sqrt(1 / 3), rel=1e-4)


def test_picard_lab_smoke():
    cfg = scenario("picard-desk", time={"T": 0.05, "dt": 1e-3})
    rep = picard_lab(cfg, samples=3, iterations=4, contraction_pairs=2)
    assert rep["pair"] == ["3", "12"] and rep["theta"] == "5/6"
    assert rep["C_hat"] >= 1.0 - 1e-9
    assert 0 < rep["tau1"] <= 0.05
    assert rep["M1"] > 0 and len(rep["picard_increments"]) == 4
    assert rep["solver_match_linf_l2"] < 1e-3
