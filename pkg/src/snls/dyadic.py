"""Littlewood-Paley projections and local smoothing norms on the periodic box.

Frequency bands use a smooth cosine partition in ``log2 |k|``: the bump for
band ``k`` is ``cos^2(pi/2 (log2|k| - k))`` on ``2^(k-1) < |k| < 2^(k+1)``, so
neighbouring bumps sum to one.  Only the bands that meet the lattice spectrum are
kept; the zero mode is assigned to the lowest band so the projections resolve
the identity exactly.

Spatial regions are the dyadic balls/annuli ``B_0 = {|xi| <= 2}``,
``B_j = {2^j <= |xi| <= 2^(j+1)}`` intersected with the box.  Time integrals use
the trapezoid rule on the stored time grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import Grid

__all__ = [
    "SpaceTimeField",
    "resolvable_bands",
    "band_symbol",
    "littlewood_paley_project",
    "region_mask",
    "spatial_scales",
    "xk_norm",
    "xtilde_norm",
]


@dataclass
class SpaceTimeField:
    grid: Grid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values)
        if self.times.ndim != 1 or self.times.size < 1:
            raise ValueError("time grid must be a nonempty 1-D array")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("time grid must be strictly increasing")
        want = (self.times.size,) + self.grid.shape
        if self.values.shape != want:
            if self.values.size == math.prod(want):
                self.values = self.values.reshape(want)
            else:
                raise ValueError(f"values shape {self.values.shape} does not match {want}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("space-time field has non-finite slices")

    @property
    def M(self) -> int:
        return self.times.size - 1

    def scaled(self, c) -> "SpaceTimeField":
        return SpaceTimeField(self.grid, self.times, c * self.values)

    def truncated(self, T: float) -> "SpaceTimeField":
        keep = self.times <= T + 1e-12 * max(abs(T), 1.0)
        return SpaceTimeField(self.grid, self.times[keep], self.values[keep])


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    w = np.zeros_like(times)
    if times.size > 1:
        dt = np.diff(times)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
    return w


def resolvable_bands(grid: Grid) -> range:
    """Band indices whose bump meets a nonzero lattice frequency."""
    k_min = math.pi / grid.L
    lo = math.floor(math.log2(k_min))
    hi = math.ceil(math.log2(grid.k_max))
    return range(lo, hi + 1)


def band_symbol(grid: Grid, k: int) -> np.ndarray:
    """Fourier multiplier of the band-``k`` projection on the spectral lattice."""
    bands = resolvable_bands(grid)
    if k not in bands:
        return np.zeros(grid.shape)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.log2(grid.kabs) - k  # -inf at the zero mode
        sym = np.where(np.abs(u) < 1.0, np.cos(0.5 * math.pi * u) ** 2, 0.0)
    if k == bands.start:
        sym = np.where(u <= 0.0, 1.0, sym)
    if k == bands.stop - 1:
        sym = np.where(u >= 0.0, 1.0, sym)
    return sym


def littlewood_paley_project(u: SpaceTimeField, k: int) -> SpaceTimeField:
    sym = band_symbol(u.grid, k)
    axes = tuple(range(1, u.grid.d + 1))
    vals = np.fft.ifftn(sym * np.fft.fftn(u.values, axes=axes), axes=axes)
    return SpaceTimeField(u.grid, u.times, vals)


def spatial_scales(grid: Grid) -> range:
    """Indices j >= 1 of the annuli B_j that meet the box."""
    rmax = float(grid.radius.max())
    if rmax < 2.0:
        return range(1, 1)
    return range(1, int(math.floor(math.log2(rmax))) + 1)


def region_mask(grid: Grid, j: int, *, ball: bool = False) -> np.ndarray:
    """``B_j`` (``B_0`` for j = 0) or, with ``ball=True``, ``B_{<j} = {|xi| <= 2^j}``."""
    r = grid.radius
    if ball:
        return r <= 2.0**j
    if j == 0:
        return r <= 2.0
    return (r >= 2.0**j) & (r <= 2.0 ** (j + 1))


def _region_l2(u: SpaceTimeField, weight: np.ndarray, mask: np.ndarray, tw: np.ndarray) -> float:
    a2 = np.abs(u.values[:, mask]) ** 2 * (weight[mask] ** 2)
    per_slice = u.grid.cell_volume * a2.sum(axis=1)
    return math.sqrt(max(float(np.dot(tw, per_slice)), 0.0))


def xk_norm(u_k: SpaceTimeField, k: int, T: float | None = None) -> float:
    """Local smoothing norm of a field localized at frequency ``2^k``."""
    u = u_k if T is None else u_k.truncated(T)
    grid = u.grid
    tw = trapezoid_weights(u.times)
    r = grid.radius
    ones = np.ones(grid.shape)
    if k >= 0:
        head = _region_l2(u, ones, region_mask(grid, 0), tw)
        w = (1.0 + r**2) ** -0.25
        js = spatial_scales(grid)
    else:
        head = 2.0 ** (k / 2) * _region_l2(u, ones, region_mask(grid, -k, ball=True), tw)
        w = (r + 2.0**-k) ** -0.5
        js = [j for j in spatial_scales(grid) if j >= -k]
    tail = max((_region_l2(u, w, region_mask(grid, j), tw) for j in js), default=0.0)
    return head + tail


def weight_first_term(grid: Grid) -> np.ndarray:
    """``<xi>^-1``, with the extra ``log(2+|xi|)^-1`` factor in two dimensions."""
    r = grid.radius
    w = (1.0 + r**2) ** -0.5
    if grid.d == 2:
        w = w / np.log(2.0 + r)
    return w


def xtilde_norm(u: SpaceTimeField, T: float | None = None, *, bands=None) -> float:
    """Aggregate local smoothing norm summed over the resolvable bands."""
    if T is not None:
        u = u.truncated(T)
    grid = u.grid
    tw = trapezoid_weights(u.times)
    first = _region_l2(u, weight_first_term(grid), np.ones(grid.shape, dtype=bool), tw) ** 2
    total = first
    for k in bands if bands is not None else resolvable_bands(grid):
        total += 2.0**k * xk_norm(littlewood_paley_project(u, k), k) ** 2
    return math.sqrt(total)
