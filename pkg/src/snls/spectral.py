"""Periodic-box discretization, Fourier transforms and norms.

Fields are plain complex ``ndarray`` objects of shape ``grid.shape`` stored in
row-major (C) order, so ``field.ravel()`` is the length ``n**d`` lattice vector.
The box is ``[-L, L)**d`` with ``n`` points per axis; lattice point ``j`` on an
axis sits at ``-L + j*h`` with ``h = 2L/n``.

Spectral coefficients use numpy's unnormalized ``fftn`` convention and numpy's
natural frequency order along each axis: index ``i`` carries the integer mode
``m = fftfreq(n)[i]*n``, which runs over exactly ``{-n/2, ..., n/2 - 1}``, and the
physical wavenumber is ``m*pi/L``. ``Grid.symmetric_modes`` gives the same set in
ascending order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "NonFiniteFieldError",
    "check_field",
    "fft_forward",
    "fft_inverse",
    "laplacian",
    "gradient",
    "divergence",
    "bessel_multiplier",
    "lebesgue_norm",
    "sobolev_norm",
    "wsp_norm",
    "dealias",
    "boundary_max",
]


class NonFiniteFieldError(FloatingPointError):
    """A field contains NaN or Inf entries."""


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on ``[-L, L)**d``.

    Args:
        d: spatial dimension, one of 1, 2, 3.
        n: points per axis, a power of two and at least 16.
        L: box half length.
    """

    d: int
    n: int
    L: float

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"grid dimension must be 1, 2 or 3, got {self.d}")
        if self.n < 16 or self.n & (self.n - 1):
            raise ValueError(f"points per axis must be a power of two >= 16, got {self.n}")
        if not (self.L > 0 and math.isfinite(self.L)):
            raise ValueError(f"box half length must be positive and finite, got {self.L}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n**self.d

    @property
    def cell_volume(self) -> float:
        return self.h**self.d

    @cached_property
    def axis(self) -> np.ndarray:
        """Coordinates along one axis."""
        return -self.L + self.h * np.arange(self.n)

    @cached_property
    def coords(self) -> tuple[np.ndarray, ...]:
        """Broadcast-ready coordinate arrays, one per axis."""
        return tuple(np.meshgrid(*([self.axis] * self.d), indexing="ij"))

    @cached_property
    def radius(self) -> np.ndarray:
        """|xi| at every lattice point."""
        return np.sqrt(sum(c**2 for c in self.coords))

    @cached_property
    def modes(self) -> np.ndarray:
        """Integer modes along one axis in FFT order."""
        return np.rint(np.fft.fftfreq(self.n) * self.n).astype(int)

    @property
    def symmetric_modes(self) -> np.ndarray:
        return np.arange(-self.n // 2, self.n // 2)

    @cached_property
    def k_axis(self) -> np.ndarray:
        return self.modes * (math.pi / self.L)

    @cached_property
    def k(self) -> tuple[np.ndarray, ...]:
        """Wavenumber arrays, one per axis, on the spectral lattice."""
        return tuple(np.meshgrid(*([self.k_axis] * self.d), indexing="ij"))

    @cached_property
    def k2(self) -> np.ndarray:
        """|k|^2 on the spectral lattice."""
        return sum(kj**2 for kj in self.k)

    @cached_property
    def kabs(self) -> np.ndarray:
        return np.sqrt(self.k2)

    @property
    def k_max(self) -> float:
        """Largest |k| present on the lattice (corner mode)."""
        return math.sqrt(self.d) * (self.n // 2) * math.pi / self.L

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3-rule mask: keep modes with |m| <= n/3 on every axis."""
        keep = np.abs(self.modes) <= self.n // 3
        mask = np.ones(self.shape, dtype=bool)
        for ax in range(self.d):
            sl = [np.newaxis] * self.d
            sl[ax] = slice(None)
            mask = mask & keep[tuple(sl)]
        return mask

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape, dtype=complex)


def check_field(grid: Grid, f: np.ndarray, *, name: str = "field") -> np.ndarray:
    """Validate shape (or flat length) and finiteness; return the shaped view."""
    f = np.asarray(f)
    if f.shape != grid.shape:
        if f.size == grid.size:
            f = f.reshape(grid.shape)
        else:
            raise ValueError(f"{name} has {f.size} entries, grid expects {grid.size}")
    if not np.all(np.isfinite(f)):
        raise NonFiniteFieldError(f"{name} contains non-finite values")
    return f


def fft_forward(grid: Grid, f: np.ndarray) -> np.ndarray:
    return np.fft.fftn(check_field(grid, f))


def fft_inverse(grid: Grid, c: np.ndarray) -> np.ndarray:
    c = np.asarray(c)
    if c.shape != grid.shape:
        if c.size != grid.size:
            raise ValueError(f"coefficients have {c.size} entries, grid expects {grid.size}")
        c = c.reshape(grid.shape)
    return np.fft.ifftn(c)


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    return np.fft.ifftn(-grid.k2 * fft_forward(grid, f))


def gradient(grid: Grid, f: np.ndarray) -> list[np.ndarray]:
    c = fft_forward(grid, f)
    return [np.fft.ifftn(1j * kj * c) for kj in grid.k]


def divergence(grid: Grid, components) -> np.ndarray:
    if len(components) != grid.d:
        raise ValueError(f"expected {grid.d} components, got {len(components)}")
    out = grid.zeros()
    for kj, v in zip(grid.k, components):
        out += np.fft.ifftn(1j * kj * fft_forward(grid, v))
    return out


def bessel_multiplier(grid: Grid, s: float) -> np.ndarray:
    """The symbol <k>^s = (1 + |k|^2)^(s/2)."""
    return (1.0 + grid.k2) ** (0.5 * s)


def _check_p(p) -> float:
    p = float(p)
    if not (p >= 1.0):
        raise ValueError(f"Lebesgue exponent must lie in [1, inf], got {p}")
    return p


def _check_s(s) -> float:
    s = float(s)
    if not (0.0 <= s <= 2.0):
        raise ValueError(f"Sobolev index must lie in [0, 2], got {s}")
    return s


def lebesgue_norm(grid: Grid, f: np.ndarray, p=2.0) -> float:
    """Discrete L^p norm, (h^d sum |f|^p)^(1/p); p = inf gives the max."""
    p = _check_p(p)
    a = np.abs(check_field(grid, f))
    if math.isinf(p):
        return float(a.max())
    amax = a.max()
    if amax == 0.0:
        return 0.0
    # scale out the max so a**p neither overflows nor underflows
    a = a / amax
    if p == 2.0:
        return float(amax * math.sqrt(grid.cell_volume * np.vdot(a, a).real))
    return float(amax * (grid.cell_volume * np.sum(a**p)) ** (1.0 / p))


def sobolev_norm(grid: Grid, f: np.ndarray, s=1.0) -> float:
    """H^s norm through the Bessel multiplier, evaluated on Fourier coefficients."""
    s = _check_s(s)
    if s == 0.0:
        return lebesgue_norm(grid, f, 2.0)
    c = np.abs(fft_forward(grid, f))
    cmax = c.max()
    if cmax == 0.0:
        return 0.0
    w = (c / cmax) ** 2 * (1.0 + grid.k2) ** s
    return float(cmax * math.sqrt(grid.cell_volume / grid.size * w.sum()))


def wsp_norm(grid: Grid, f: np.ndarray, s=1.0, p=2.0) -> float:
    """W^{s,p} norm as the L^p norm of the Bessel potential <D>^s f."""
    s = _check_s(s)
    p = _check_p(p)
    if s == 0.0:
        return lebesgue_norm(grid, f, p)
    g = np.fft.ifftn(bessel_multiplier(grid, s) * fft_forward(grid, f))
    return lebesgue_norm(grid, g, p)


def dealias(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Zero the top third of the spectrum on every axis."""
    return np.fft.ifftn(np.where(grid.dealias_mask, np.fft.fftn(f), 0.0))


def boundary_max(grid: Grid, f: np.ndarray) -> float:
    """Largest |f| on the outermost lattice layer of the box."""
    a = np.abs(check_field(grid, f))
    edges = []
    for ax in range(grid.d):
        edges.append(np.take(a, 0, axis=ax).max())
        edges.append(np.take(a, -1, axis=ax).max())
    return float(max(edges))
