"""Shipped desk-scale scenarios as plain config dictionaries.

``scenario(name, **overrides)`` returns a validated ``RunConfig``; nested keys
such as ``time`` or ``grid`` are merged rather than replaced.
"""

from __future__ import annotations

import copy
import math

from .config import RunConfig, parse_config

__all__ = ["SCENARIOS", "scenario", "desk_noise"]


def desk_noise(amplitude: float = 0.1) -> list[dict]:
    """Two Gaussian channels, off-center, of different widths."""
    return [
        {"amplitude": amplitude, "width": 1.0, "center": -1.0},
        {"amplitude": amplitude, "width": 2.0, "center": 1.0},
    ]


_DESK = {
    "d": 1,
    "grid": {"n": 512, "L": 20 * math.pi},
    "alpha": 3.0,
    "lambda": 1,
    "noise": desk_noise(),
    "seed": 2024,
    "time": {"T": 1.0, "dt": 1e-3},
    "formulation": "both",
    "initial": {"kind": "gaussian", "amplitude": 1.0, "width": 2.0, "center": 0.0},
    "scope": "global-H2",
}

SCENARIOS = {
    # cubic focusing NLS in 1-D: inside the global H^2 range 2 <= alpha < 5
    "desk-focusing": _DESK,
    "desk-defocusing": {**_DESK, "lambda": -1},
    # Picard lab: short horizon, coarser grid, stronger noise
    "picard-desk": {
        **_DESK,
        "grid": {"n": 128, "L": 8 * math.pi},
        "noise": desk_noise(0.25),
        "time": {"T": 0.25, "dt": 5e-4},
        "formulation": "rescaled",
        "initial": {"kind": "gaussian", "amplitude": 0.5, "width": 2.0, "center": 0.0},
    },
    # mass-supercritical focusing: alpha = 7 > 1 + 4/d, outside the global range
    "supercritical-focusing": {
        **_DESK,
        "grid": {"n": 1024, "L": 8.0},
        "alpha": 7.0,
        "time": {"T": 0.15, "dt": 1e-5},
        "formulation": "direct",
        "initial": {"kind": "gaussian", "amplitude": 2.0, "width": 1.0, "center": 0.0},
        "snapshot_stride": 100,
    },
    "desk-2d": {
        **_DESK,
        "d": 2,
        "grid": {"n": 128, "L": 8 * math.pi},
        "noise": [{"amplitude": 0.1, "width": 2.0, "center": [1.0, -1.0]}],
        "time": {"T": 0.2, "dt": 2e-3},
        "initial": {"kind": "gaussian", "amplitude": 1.0, "width": 2.0, "center": [0.0, 0.0]},
        "scope": "local-H2",
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def scenario(name: str, **overrides) -> RunConfig:
    if name not in SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; shipped: {', '.join(SCENARIOS)}")
    raw = _merge(SCENARIOS[name], {("lambda" if k == "lam" else k): v for k, v in overrides.items()})
    return parse_config(raw)
