"""Conservative multiplicative noise: profiles, Brownian paths and coefficients.

The noise field is ``W(t, xi) = i * sum_j phi_j(xi) beta_j(t)`` with real Gaussian
profiles ``phi_j``.  Everything the solvers need (``W``, ``mu``, the drift
coefficients ``b = 2 grad W`` and ``c = sum_k (d_k W)^2 + lap W``) is assembled
from lattice caches of ``phi_j``, ``grad phi_j`` and ``lap phi_j`` that are
evaluated analytically, never by spectral differentiation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial import hermite

from .spectral import Grid

__all__ = [
    "ProfileSpec",
    "BrownianPath",
    "NoiseModel",
    "H1Report",
    "sample_path",
    "refine_path",
    "evaluate_W",
    "coefficient_b",
    "coefficient_c",
    "mu_profile",
    "check_h1s",
]


@dataclass(frozen=True)
class ProfileSpec:
    """Gaussian profile ``a * exp(-|xi - center|^2 / width^2)``.

    ``width = inf`` is accepted and gives the constant profile ``a``; it is
    bounded but violates the decay hypothesis, which ``check_h1s`` reports.
    """

    amplitude: float
    width: float = 1.0
    center: tuple[float, ...] | float = 0.0
    kind: str = "gaussian"

    def __post_init__(self):
        if self.kind != "gaussian":
            raise ValueError(f"unsupported profile kind {self.kind!r}")
        if not self.width > 0:
            raise ValueError(f"profile width must be positive, got {self.width}")
        if not math.isfinite(self.amplitude):
            raise ValueError("profile amplitude must be finite")

    def center_vector(self, d: int) -> np.ndarray:
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        if c.size == 1:
            c = np.full(d, c[0])
        if c.size != d:
            raise ValueError(f"profile center has {c.size} components, expected {d}")
        return c

    def _axis_factor(self, x: np.ndarray, order: int) -> np.ndarray:
        # d^m/dx^m exp(-(x/w)^2) = (-1/w)^m H_m(x/w) exp(-(x/w)^2)
        if math.isinf(self.width):
            return np.ones_like(x) if order == 0 else np.zeros_like(x)
        u = x / self.width
        coef = np.zeros(order + 1)
        coef[order] = 1.0
        return (-1.0 / self.width) ** order * hermite.hermval(u, coef) * np.exp(-(u**2))

    def derivative(self, grid: Grid, gamma: Sequence[int]) -> np.ndarray:
        """Exact partial derivative ``d^gamma phi`` on the lattice."""
        if len(gamma) != grid.d:
            raise ValueError(f"multi-index {gamma} does not match dimension {grid.d}")
        c = self.center_vector(grid.d)
        out = np.full(grid.shape, float(self.amplitude))
        for ax, (xa, g) in enumerate(zip(grid.coords, gamma)):
            out = out * self._axis_factor(xa - c[ax], g)
        return out

    def value(self, grid: Grid) -> np.ndarray:
        return self.derivative(grid, (0,) * grid.d)


@dataclass(frozen=True)
class BrownianPath:
    """Sampled increments of ``N`` independent Brownian motions on a uniform grid.

    ``increments[j, m]`` is ``beta_j(t_{m+1}) - beta_j(t_m)``.  ``level`` counts how
    many bridge refinements separate this path from the originally sampled one.
    """

    increments: np.ndarray
    dt: float
    seed: int
    level: int = 0
    beta: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=float)
        if inc.ndim != 2:
            raise ValueError("increments must have shape (N, M)")
        inc.setflags(write=False)
        object.__setattr__(self, "increments", inc)
        beta = np.zeros((inc.shape[0], inc.shape[1] + 1))
        np.cumsum(inc, axis=1, out=beta[:, 1:])
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)

    @property
    def N(self) -> int:
        return self.increments.shape[0]

    @property
    def M(self) -> int:
        return self.increments.shape[1]

    @property
    def T(self) -> float:
        return self.M * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.M + 1)

    def beta_at(self, m: int, frac: float = 0.0) -> np.ndarray:
        """beta at ``t_m + frac*dt``, linear between grid values."""
        if not 0 <= m <= self.M:
            raise IndexError(f"time index {m} outside 0..{self.M}")
        if frac == 0.0:
            return self.beta[:, m]
        if m == self.M:
            raise IndexError("cannot interpolate past the last grid time")
        return self.beta[:, m] + frac * self.increments[:, m]

    def __eq__(self, other):
        if not isinstance(other, BrownianPath):
            return NotImplemented
        return (
            self.dt == other.dt
            and self.seed == other.seed
            and self.level == other.level
            and np.array_equal(self.increments, other.increments)
        )

    __hash__ = None


def _stream(seed: int, channel: int, level: int) -> np.random.Generator:
    # Counter-based generator keyed by (seed, channel, level); independent of call order.
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(channel), int(level)))
    return np.random.Generator(np.random.Philox(ss))


# Increments are rounded to multiples of 2**-50 (about 9e-16).  Sums and
# differences of lattice values below 2**3 in magnitude are exact in binary64,
# which makes bridge refinement reproduce every coarse increment bit for bit.
_QUANTUM = 2.0**-50
_LATTICE_BOUND = 8.0


def _quantize(v: np.ndarray) -> np.ndarray:
    q = np.rint(np.asarray(v) / _QUANTUM) * _QUANTUM
    if q.size and np.max(np.abs(q)) >= _LATTICE_BOUND:
        raise ValueError("Brownian increment too large for the exact lattice; use a smaller dt")
    return q


def _step_count(T: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError(f"time step must be positive, got {dt}")
    if T < 0:
        raise ValueError(f"horizon must be nonnegative, got {T}")
    M = int(round(T / dt))
    if abs(M * dt - T) > 1e-9 * max(T, dt):
        raise ValueError(f"T = {T} is not an integer multiple of dt = {dt}")
    return M


def sample_path(N: int, T: float, dt: float, seed: int) -> BrownianPath:
    """Sample ``N`` Brownian channels on ``[0, T]`` with step ``dt``."""
    if N < 0:
        raise ValueError("number of channels must be nonnegative")
    M = _step_count(T, dt)
    inc = np.empty((N, M))
    for j in range(N):
        inc[j] = math.sqrt(dt) * _stream(seed, j, 0).standard_normal(M)
    return BrownianPath(_quantize(inc), dt, int(seed), 0)


def refine_path(path: BrownianPath) -> BrownianPath:
    """Halve the step by Brownian bridge sampling of every midpoint.

    Each pair of fine increments sums (in floating point) to its parent increment
    bit for bit, because every increment lives on the ``2**-50`` lattice.
    """
    level = path.level + 1
    coarse = path.increments
    a = np.empty_like(coarse)
    for j in range(path.N):
        z = _stream(path.seed, j, level).standard_normal(path.M)
        a[j] = 0.5 * coarse[j] + 0.5 * math.sqrt(path.dt) * z
    a = _quantize(a)
    b = coarse - a  # exact: both operands lie on the lattice
    fine = np.empty((path.N, 2 * path.M))
    fine[:, 0::2] = a
    fine[:, 1::2] = b
    return BrownianPath(fine, 0.5 * path.dt, path.seed, level)


class NoiseModel:
    """Profiles evaluated on a grid, with exact derivative caches."""

    def __init__(self, profiles: Sequence[ProfileSpec], grid: Grid):
        self.profiles = tuple(profiles)
        self.grid = grid
        d = grid.d
        shape = grid.shape
        N = len(self.profiles)
        self.phi = np.zeros((N,) + shape)
        self.grad_phi = np.zeros((N, d) + shape)
        self.lap_phi = np.zeros((N,) + shape)
        for j, prof in enumerate(self.profiles):
            self.phi[j] = prof.value(grid)
            for ax in range(d):
                g1 = [0] * d
                g1[ax] = 1
                self.grad_phi[j, ax] = prof.derivative(grid, g1)
                g1[ax] = 2
                self.lap_phi[j] += prof.derivative(grid, g1)
        for arr in (self.phi, self.grad_phi, self.lap_phi):
            arr.setflags(write=False)

    @property
    def N(self) -> int:
        return len(self.profiles)

    @property
    def is_zero(self) -> bool:
        return self.N == 0 or not np.any(self.phi)

    def _check_beta(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float).reshape(-1)
        if beta.size != self.N:
            raise ValueError(f"expected {self.N} Brownian values, got {beta.size}")
        return beta

    def imag_W(self, beta) -> np.ndarray:
        """sum_j phi_j beta_j, i.e. Im W for the given Brownian values."""
        beta = self._check_beta(beta)
        return np.tensordot(beta, self.phi, axes=(0, 0)) if self.N else np.zeros(self.grid.shape)

    def W(self, beta) -> np.ndarray:
        w = np.zeros(self.grid.shape, dtype=complex)
        w.imag = self.imag_W(beta)
        return w

    def exp_W(self, beta) -> np.ndarray:
        return np.exp(1j * self.imag_W(beta))

    def grad_imag_W(self, beta) -> np.ndarray:
        beta = self._check_beta(beta)
        if not self.N:
            return np.zeros((self.grid.d,) + self.grid.shape)
        return np.tensordot(beta, self.grad_phi, axes=(0, 0))

    def b(self, beta) -> list[np.ndarray]:
        out = []
        for g in self.grad_imag_W(beta):
            comp = np.zeros(self.grid.shape, dtype=complex)
            comp.imag = 2.0 * g
            out.append(comp)
        return out

    def c(self, beta) -> np.ndarray:
        beta = self._check_beta(beta)
        g = self.grad_imag_W(beta)
        lap = np.tensordot(beta, self.lap_phi, axes=(0, 0)) if self.N else np.zeros(self.grid.shape)
        out = np.empty(self.grid.shape, dtype=complex)
        # (i g)^2 = -g^2: the square term is real and nonpositive
        out.real = -np.sum(g**2, axis=0)
        out.imag = lap
        return out

    def mu(self) -> np.ndarray:
        return 0.5 * np.sum(self.phi**2, axis=0)


def _check_index(path: BrownianPath, m: int) -> int:
    if not 0 <= m <= path.M:
        raise IndexError(f"time index {m} outside 0..{path.M}")
    return m


def evaluate_W(model: NoiseModel, path: BrownianPath, m: int) -> np.ndarray:
    return model.W(path.beta[:, _check_index(path, m)])


def coefficient_b(model: NoiseModel, path: BrownianPath, m: int) -> list[np.ndarray]:
    return model.b(path.beta[:, _check_index(path, m)])


def coefficient_c(model: NoiseModel, path: BrownianPath, m: int) -> np.ndarray:
    return model.c(path.beta[:, _check_index(path, m)])


def mu_profile(model: NoiseModel) -> np.ndarray:
    return model.mu()


@dataclass
class H1Report:
    s: int
    threshold: float
    shell_max: dict[int, float]
    per_profile: list[dict[int, float]]

    @property
    def passed(self) -> bool:
        return all(v < self.threshold for v in self.shell_max.values())


def decay_weight(grid: Grid) -> np.ndarray:
    r2 = grid.radius**2
    if grid.d == 2:
        return (1.0 + r2) * np.log(3.0 + r2) ** 2
    return 1.0 + r2


def check_h1s(
    model: NoiseModel,
    s: int,
    grid: Grid | None = None,
    *,
    shell_fraction: float = 0.1,
    threshold: float = 1e-10,
) -> H1Report:
    """Finite-box decay certificate for the profiles.

    For every order ``|gamma| <= s + 2`` reports the largest value of
    ``zeta(xi) |d^gamma phi_j(xi)|`` over lattice points in the outer shell
    ``max_i |xi_i| >= (1 - shell_fraction) L``.
    """
    if s not in (0, 1, 2):
        raise ValueError(f"s must be 0, 1 or 2, got {s}")
    grid = grid or model.grid
    shell = np.max(np.abs(np.stack(grid.coords)), axis=0) >= (1.0 - shell_fraction) * grid.L
    zeta = decay_weight(grid)[shell]
    orders = range(s + 3)
    per_profile = []
    for prof in model.profiles:
        vals = {o: 0.0 for o in orders}
        for gamma in itertools.product(range(s + 3), repeat=grid.d):
            o = sum(gamma)
            if o > s + 2:
                continue
            v = float(np.max(zeta * np.abs(prof.derivative(grid, gamma)[shell])))
            vals[o] = max(vals[o], v)
        per_profile.append(vals)
    shell_max = {o: max((p[o] for p in per_profile), default=0.0) for o in orders}
    return H1Report(s, threshold, shell_max, per_profile)
