import math

import numpy as np
import pytest

from conftest import l2, random_field
from snls.config import parse_config
from snls.diagnostics import fit_slope, rescaled_mass_study
from snls.dynamics import (
    BlowupSuspected,
    Problem,
    Propagator,
    SolverState,
    StabilityError,
    nonlinearity,
    propagate_linear,
    rk4_march,
    solve,
    step_direct,
    step_rescaled,
)
from snls.io import series_csv
from snls.noise import NoiseModel, ProfileSpec, sample_path
from snls.runner import RunFailed, run
from snls.scenarios import desk_noise, scenario
from snls.spectral import Grid

G = Grid(1, 128, 8 * math.pi)


def problem(grid=G, amps=(0.1, 0.1), T=0.1, dt=1e-3, alpha=3.0, lam=1.0, seed=5, **kw):
    profiles = [ProfileSpec(a, w, c) for a, w, c in zip(amps, (1.0, 2.0), (-1.0, 1.0))]
    noise = NoiseModel(profiles, grid)
    return Problem(noise, sample_path(noise.N, T, dt, seed), alpha, lam, **kw)


def gaussian(grid, amp=1.0, width=2.0):
    return amp * np.exp(-(grid.radius**2) / width**2).astype(complex)


def test_zero_stays_zero():
    p = problem()
    traj = solve(p, np.zeros(G.shape), "direct")
    assert not np.any(traj[-1])
    assert not np.any(solve(p, np.zeros(G.shape), "rescaled")[-1])


def test_free_flow_plane_wave_sign():
    # i X_t = X_xx has the plane wave exp(i k x + i k^2 t)
    p = problem(amps=(), lam=0.0, T=0.5, dt=1e-2)
    k = 3 * math.pi / G.L
    x = np.exp(1j * k * G.axis)
    X = solve(p, x, "direct")
    for m in (1, 17, 50):
        want = x * np.exp(1j * k * k * m * 1e-2)
        assert np.max(np.abs(X[m] - want)) < 1e-12
        assert abs(l2(G, X[m]) - l2(G, x)) / l2(G, x) < 1e-13


def test_direct_mass_over_many_steps():
    g = Grid(1, 256, 10 * math.pi)
    p = problem(grid=g, amps=(0.3, 0.3), T=10.0, dt=1e-3, seed=9)
    state = SolverState(gaussian(g), 0)
    n0 = l2(g, state.field)
    worst = 0.0
    for _ in range(10_000):
        state = step_direct(p, state)
        worst = max(worst, abs(l2(g, state.field) - n0) / n0)
    assert worst < 1e-11


def test_zero_noise_cross_solver_second_order():
    x = gaussian(G)
    errs, steps = [], []
    for dt in (4e-3, 2e-3, 1e-3):
        p = problem(amps=(), T=0.2, dt=dt, dealias=False)
        X = solve(p, x, "direct")[-1]
        Y = solve(p, x, "rescaled")[-1]
        errs.append(l2(G, X - Y))
        steps.append(dt)
    assert fit_slope(steps, errs) > 1.8


def test_constant_coefficient_rk4_dispersion():
    p = problem(amps=(), lam=0.0, T=0.2, dt=2e-3)
    x = gaussian(G)
    y = solve(p, x, "rescaled")[-1]
    exact = np.fft.ifft(np.exp(1j * G.k2 * 0.2) * np.fft.fft(x))
    # RK4 local error ~ (k^2 dt)^5 / 120 at the largest resolved wavenumbers
    assert l2(G, y - exact) / l2(G, x) < 1e-6


def test_rescaled_mass_order_four():
    cfg = scenario("desk-focusing", noise=desk_noise(0.25), time={"T": 1.0, "dt": 1e-2}, formulation="rescaled")
    check = rescaled_mass_study(cfg, 3)
    assert check.passed, check.values
    assert check.slope >= 3.5


def test_propagator_identity_and_cocycle(rng):
    p = problem(amps=(0.3, 0.2), T=0.05, dt=1e-3)
    U = Propagator(p)
    x = gaussian(G) * np.exp(0.3j * G.axis)
    assert np.array_equal(propagate_linear(U, x, 7, 7), x)
    one = propagate_linear(U, x, 0, 40)
    two = propagate_linear(U, propagate_linear(U, x, 0, 15), 15, 40)
    assert np.max(np.abs(one - two)) < 1e-9
    with pytest.raises(ValueError):
        propagate_linear(U, x, 10, 3)


def test_propagator_zero_noise_is_free_flow():
    p = problem(amps=(), T=0.1, dt=1e-3)
    x = gaussian(G)
    u = propagate_linear(Propagator(p), x, 0, 100)
    exact = np.fft.ifft(np.exp(1j * G.k2 * 0.1) * np.fft.fft(x))
    assert np.max(np.abs(u - exact)) < 1e-8


def test_propagator_preserves_l2():
    p = problem(amps=(0.3, 0.3), T=0.1, dt=1e-3)
    x = gaussian(G)
    u = propagate_linear(Propagator(p), x, 0, 100)
    assert abs(l2(G, u) - l2(G, x)) / l2(G, x) < 1e-6


@pytest.mark.parametrize("form", ["direct", "rescaled"])
def test_gauge_invariance(form):
    p = problem(T=0.05, dt=1e-3)
    x = gaussian(G)
    phase = np.exp(0.7j)
    a = solve(p, x, form)[-1]
    b = solve(p, phase * x, form)[-1]
    assert np.max(np.abs(b - phase * a)) < 1e-13


def test_stability_guard():
    p = problem(T=0.5, dt=0.05)
    with pytest.raises(StabilityError, match="reduce dt"):
        step_rescaled(p, SolverState(gaussian(G), 0))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_blowup_signalled_on_nonfinite():
    p = problem(T=0.01, dt=1e-3)
    x = gaussian(G)
    x[3] = np.inf
    with pytest.raises(BlowupSuspected):
        step_direct(p, SolverState(x, 0))
    with pytest.raises(BlowupSuspected):
        rk4_march(p, x, 0, 1, guard=False)


def test_problem_validation():
    noise = NoiseModel([ProfileSpec(0.1)], G)
    with pytest.raises(ValueError):
        Problem(noise, sample_path(1, 1.0, 0.1, 0), 1.0, 1)
    with pytest.raises(ValueError):
        Problem(noise, sample_path(2, 1.0, 0.1, 0), 3.0, 1)
    with pytest.raises(ValueError):
        Problem(noise, sample_path(1, 1.0, 0.1, 0), 3.0, 1, noise_placement="middle")
    p = Problem(noise, sample_path(1, 1.0, 0.1, 0), 3.0, 1)
    with pytest.raises(ValueError):
        p.at_step(0.03)
    with pytest.raises(IndexError):
        step_direct(p, SolverState(gaussian(G), 10))
    with pytest.raises(ValueError):
        solve(p, gaussian(G), "implicit")


def test_refined_step_matches_two_fine_steps():
    p = problem(T=0.02, dt=2e-3)
    x = gaussian(G)
    fine = p.at_step(1e-3)
    a = step_direct(p, SolverState(x, 0), dt=1e-3)
    b = step_direct(fine, SolverState(x, 0))
    assert np.array_equal(a.field, b.field)


def test_cubic_fast_path(rng):
    y = random_field(rng, (64,))
    assert np.allclose(nonlinearity(y, 3), np.abs(y) ** 2 * y, rtol=1e-14)
    assert np.allclose(nonlinearity(y, 2.5), np.abs(y) ** 1.5 * y, rtol=1e-14)
    assert nonlinearity(np.zeros(3, complex), 1.5).tolist() == [0, 0, 0]


def test_symmetric_noise_placement_reduces_equivalence_error():
    base = dict(scenario("desk-focusing").to_dict())
    errs = {}
    for placement in ("symmetric", "leading"):
        cfg = parse_config({**base, "time": {"T": 0.2, "dt": 4e-3}, "noise_placement": placement,
                            "grid": {"n": 128, "L": 8 * math.pi}})
        errs[placement] = run(cfg).series["equiv_err"].max()
    assert errs["symmetric"] < errs["leading"]


def test_run_t_zero():
    rec = run(scenario("desk-focusing", time={"T": 0.0, "dt": 1e-3}, grid={"n": 64, "L": 8 * math.pi}))
    assert rec.series["t"].tolist() == [0.0]
    assert rec.metadata["steps"] == 0


def test_run_same_seed_bit_identical():
    cfg = scenario("desk-focusing", time={"T": 0.05, "dt": 1e-3}, grid={"n": 128, "L": 8 * math.pi})
    assert series_csv(run(cfg).series) == series_csv(run(cfg).series)


def test_run_reports_failure_time():
    cfg = scenario("desk-focusing", time={"T": 0.1, "dt": 5e-2}, formulation="rescaled")
    with pytest.raises(RunFailed, match="reduce dt") as info:
        run(cfg)
    assert info.value.time is None or info.value.time >= 0
