"""Time integrators for the stochastic NLS and its rescaled random PDE.

Sign conventions follow ``i dX = lap X dt + lam |X|^(alpha-1) X dt - i mu X dt + i X dW``:
the free flow of ``i X_t = lap X`` is the Fourier multiplier ``exp(+i |k|^2 t)`` and the
pointwise nonlinear flow is ``X -> exp(-i lam |X|^(alpha-1) t) X``.

* ``step_direct`` combines one Strang step nonlinear/free/nonlinear with the
  exact solution of ``dX = -mu X dt + X dW``, multiplication by ``exp(dW)`` where
  ``dW`` is the increment of ``W`` (the Ito correction is absorbed exactly).  With
  ``noise_placement="leading"`` the whole increment is applied before the Strang
  step; with ``"symmetric"`` (default) half of it is applied on each side, which
  removes the coherent ``dt * [lap, W]`` splitting bias.  Every substep preserves
  ``|X|`` pointwise or is unitary, so the discrete mass is conserved to rounding.
* ``step_rescaled`` takes one classical RK4 step of
  ``y_t = -i(lap y + b . grad y + c y) - i lam g(y)`` with spectral derivatives,
  pointwise coefficients and a 2/3-rule dealiased nonlinearity; ``beta`` is linear
  in time inside a step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .noise import BrownianPath, NoiseModel, refine_path
from .spectral import Grid, dealias

__all__ = [
    "Problem",
    "SolverState",
    "StabilityError",
    "BlowupSuspected",
    "nonlinearity",
    "step_direct",
    "step_rescaled",
    "Propagator",
    "propagate_linear",
    "rk4_march",
    "solve",
    "RK4_STABILITY_LIMIT",
    "NOISE_PLACEMENTS",
    "run",
]

# |R(iy)| <= 1 for the RK4 amplification factor only when |y| <= 2*sqrt(2)
RK4_STABILITY_LIMIT = 2.5

NOISE_PLACEMENTS = ("symmetric", "leading")


class StabilityError(RuntimeError):
    """Explicit time step too large for the spectral radius of the generator."""


class BlowupSuspected(FloatingPointError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message: str, index: int | None = None, time: float | None = None):
        super().__init__(message)
        self.index = index
        self.time = time


def nonlinearity(y: np.ndarray, alpha: float) -> np.ndarray:
    """g(y) = |y|^(alpha-1) y."""
    if alpha == 3:
        return (y.real**2 + y.imag**2) * y
    return np.abs(y) ** (alpha - 1.0) * y


@dataclass
class Problem:
    """Everything that defines one pathwise trajectory except the initial data."""

    noise: NoiseModel
    path: BrownianPath
    alpha: float
    lam: float
    dealias: bool = True
    noise_placement: str = "symmetric"
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if self.path.N != self.noise.N:
            raise ValueError(f"path has {self.path.N} channels, noise model has {self.noise.N}")
        if self.noise_placement not in NOISE_PLACEMENTS:
            raise ValueError(f"noise_placement must be one of {NOISE_PLACEMENTS}")

    @property
    def grid(self) -> Grid:
        return self.noise.grid

    @property
    def dt(self) -> float:
        return self.path.dt

    def at_step(self, dt: float) -> "Problem":
        """Same problem on a path refined until its step equals ``dt``."""
        if dt == self.path.dt:
            return self
        ratio = self.path.dt / dt
        r = round(math.log2(ratio)) if ratio > 1 else -1
        if r < 1 or abs(ratio - 2**r) > 1e-9 * ratio:
            raise ValueError(f"dt = {dt} does not divide the path step {self.path.dt} by a power of two")
        path = self.path
        for _ in range(r):
            path = refine_path(path)
        return replace(self, path=path)

    def free_multiplier(self, dt: float) -> np.ndarray:
        key = ("free", dt)
        if key not in self._cache:
            self._cache[key] = np.exp(1j * self.grid.k2 * dt)
        return self._cache[key]


@dataclass
class SolverState:
    field: np.ndarray
    m: int = 0
    formulation: str = "direct"

    @property
    def finite(self) -> bool:
        return bool(np.all(np.isfinite(self.field)))


def _check_dt(problem: Problem, dt: float | None) -> Problem:
    return problem if dt is None else problem.at_step(dt)


def step_direct(problem: Problem, state: SolverState, dt: float | None = None) -> SolverState:
    """One split step of the stochastic equation from ``t_m`` to ``t_{m+1}``."""
    problem = _check_dt(problem, dt)
    m = state.m
    path = problem.path
    if m >= path.M:
        raise IndexError(f"no Brownian increment after step {m}")
    dt = path.dt
    X = state.field
    noisy = problem.noise.N > 0
    symmetric = problem.noise_placement == "symmetric"
    if noisy:
        kick = problem.noise.exp_W(0.5 * path.increments[:, m] if symmetric else path.increments[:, m])
        X = X * kick
    half = 0.5 * dt * problem.lam
    if half:
        X = X * np.exp(-1j * half * np.abs(X) ** (problem.alpha - 1.0))
    X = np.fft.ifftn(problem.free_multiplier(dt) * np.fft.fftn(X))
    if half:
        X = X * np.exp(-1j * half * np.abs(X) ** (problem.alpha - 1.0))
    if noisy and symmetric:
        X = X * kick
    if not np.all(np.isfinite(X)):
        raise BlowupSuspected("non-finite field in direct step", m + 1, (m + 1) * dt)
    return SolverState(X, m + 1, "direct")


def _generator(problem: Problem, beta: np.ndarray, *, include_noise: bool):
    """Return ``(b, c)`` at the given Brownian values, or ``(None, None)`` without noise."""
    if not include_noise or problem.noise.is_zero:
        return None, None
    return problem.noise.b(beta), problem.noise.c(beta)


def _apply_A(grid: Grid, y: np.ndarray, b, c) -> np.ndarray:
    """A y = -i (lap y + b . grad y + c y)."""
    yh = np.fft.fftn(y)
    out = np.fft.ifftn(-grid.k2 * yh)
    if b is not None:
        for kj, bj in zip(grid.k, b):
            out += bj * np.fft.ifftn(1j * kj * yh)
        out += c * y
    return -1j * out


def _spectral_radius_estimate(problem: Problem, b, c) -> float:
    grid = problem.grid
    rho = float(grid.k2.max())
    if b is not None:
        rho += grid.k_max * math.sqrt(sum(float(np.max(np.abs(bj))) ** 2 for bj in b))
        rho += float(np.max(np.abs(c)))
    return rho


def rk4_march(
    problem: Problem,
    y0: np.ndarray,
    m0: int,
    m1: int,
    *,
    nonlinear: bool = True,
    forcing: Callable[[int, float], np.ndarray] | None = None,
    substeps: int = 1,
    keep: bool = True,
    guard: bool = True,
) -> list[np.ndarray] | np.ndarray:
    """RK4 for ``y' = A(t) y [- i lam g(y)] [+ forcing(m, frac)]`` from ``t_{m0}`` to ``t_{m1}``.

    ``forcing(m, frac)`` is evaluated at ``t_m + frac*dt``.  With ``keep`` the
    list of the ``m1 - m0 + 1`` grid slices is returned, otherwise the final field.
    """
    path = problem.path
    if not 0 <= m0 <= m1 <= path.M:
        raise IndexError(f"march {m0} -> {m1} outside 0..{path.M}")
    grid = problem.grid
    lam = problem.lam if nonlinear else 0.0
    alpha = problem.alpha
    h = path.dt / substeps
    y = np.array(y0, dtype=complex).reshape(grid.shape)
    out = [y] if keep else None
    coeffs: dict[tuple[int, float], tuple] = {}

    def coefficients(m, frac):
        key = (m, frac)
        if key not in coeffs:
            if frac >= 1.0:
                beta = path.beta[:, m + 1]
            else:
                beta = path.beta_at(m, frac)
            coeffs[key] = _generator(problem, beta, include_noise=True)
        return coeffs[key]

    def rhs(m, frac, v):
        b, c = coefficients(m, frac)
        r = _apply_A(grid, v, b, c)
        if lam:
            gv = nonlinearity(v, alpha)
            if problem.dealias:
                gv = dealias(grid, gv)
            r -= 1j * lam * gv
        if forcing is not None:
            r += forcing(m, frac)
        return r

    for m in range(m0, m1):
        if guard:
            b, c = coefficients(m, 0.0)
            rho = _spectral_radius_estimate(problem, b, c)
            if lam:
                rho += abs(lam) * float(np.max(np.abs(y))) ** (alpha - 1.0)
            if h * rho > RK4_STABILITY_LIMIT:
                raise StabilityError(
                    f"dt*|A| ~ {h * rho:.3g} exceeds {RK4_STABILITY_LIMIT} at step {m}; "
                    f"reduce dt below {RK4_STABILITY_LIMIT / rho:.3g}"
                )
        for sub in range(substeps):
            f0 = sub / substeps
            fh = (sub + 0.5) / substeps
            f1 = (sub + 1) / substeps
            k1 = rhs(m, f0, y)
            k2 = rhs(m, fh, y + 0.5 * h * k1)
            k3 = rhs(m, fh, y + 0.5 * h * k2)
            k4 = rhs(m, f1, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise BlowupSuspected("non-finite field in RK4 march", m + 1, (m + 1) * path.dt)
        if keep:
            out.append(y)
        coeffs = {k: v for k, v in coeffs.items() if k[0] > m or (k[0] == m and k[1] >= 1.0)}
    return out if keep else y


def step_rescaled(problem: Problem, state: SolverState, dt: float | None = None) -> SolverState:
    """One RK4 step of the rescaled equation from ``t_m`` to ``t_{m+1}``."""
    problem = _check_dt(problem, dt)
    y = rk4_march(problem, state.field, state.m, state.m + 1, keep=False)
    return SolverState(y, state.m + 1, "rescaled")


@dataclass
class Propagator:
    """Evolution operator of ``y' = A(t) y`` on the path's time grid."""

    problem: Problem
    start: int = 0
    substeps: int = 1

    def apply(self, x: np.ndarray, t_index: int, s_index: int | None = None) -> np.ndarray:
        s = self.start if s_index is None else s_index
        if t_index < s:
            raise ValueError("evolution operator needs s <= t")
        if t_index == s:
            return np.array(x, dtype=complex).reshape(self.problem.grid.shape)
        return rk4_march(
            self.problem, x, s, t_index, nonlinear=False, substeps=self.substeps, keep=False
        )


def propagate_linear(U: Propagator, x: np.ndarray, s: int, t: int) -> np.ndarray:
    """``U(t_t, t_s) x`` with grid time indices ``s <= t``."""
    return U.apply(x, t, s)


def solve(
    problem: Problem,
    x: np.ndarray,
    formulation: str,
    *,
    m_end: int | None = None,
    on_step: Callable[[int, np.ndarray], None] | None = None,
) -> list[np.ndarray]:
    """Full trajectory (list of ``M + 1`` slices) for one formulation."""
    M = problem.path.M if m_end is None else m_end
    x = np.array(x, dtype=complex).reshape(problem.grid.shape)
    if formulation == "rescaled":
        traj = rk4_march(problem, x, 0, M)
        if on_step is not None:
            for m, y in enumerate(traj):
                on_step(m, y)
        return traj
    if formulation != "direct":
        raise ValueError(f"unknown formulation {formulation!r}")
    state = SolverState(x, 0, "direct")
    traj = [x]
    if on_step is not None:
        on_step(0, x)
    for _ in range(M):
        state = step_direct(problem, state)
        traj.append(state.field)
        if on_step is not None:
            on_step(state.m, state.field)
    return traj


def run(config):
    """Run a validated config; see ``snls.runner.run``."""
    from .runner import run as _run

    return _run(config)
