"""Run configuration: JSON schema, defaults and validation."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from . import exponents
from .dynamics import NOISE_PLACEMENTS
from .noise import ProfileSpec
from .spectral import Grid, boundary_max

__all__ = ["ConfigError", "InitialData", "RunConfig", "parse_config", "default_grid", "BOUNDARY_TOL"]

FORMULATIONS = ("direct", "rescaled", "both")
INITIAL_KINDS = ("gaussian", "plane-wave")
DIAGNOSTICS = (
    "mass_drift",
    "weak_form_residual",
    "equivalence_error",
    "lipschitz_check",
    "blowup_monitor",
)
BOUNDARY_TOL = 1e-12

_DEFAULT_GRID = {1: (512, 20 * math.pi), 2: (128, 20 * math.pi), 3: (32, 8 * math.pi)}


def default_grid(d: int) -> tuple[int, float]:
    return _DEFAULT_GRID[d]


class ConfigError(ValueError):
    """Schema violations, all of them at once."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid config:\n  " + "\n  ".join(self.violations))


@dataclass(frozen=True)
class InitialData:
    kind: str = "gaussian"
    amplitude: float = 1.0
    width: float = 1.0
    center: tuple = (0.0,)
    mode: tuple = (1,)

    def field(self, grid: Grid) -> np.ndarray:
        if self.kind == "gaussian":
            c = np.broadcast_to(np.asarray(self.center, dtype=float), (grid.d,))
            r2 = sum((xi - ci) ** 2 for xi, ci in zip(grid.coords, c))
            return (self.amplitude * np.exp(-r2 / self.width**2)).astype(complex)
        m = np.broadcast_to(np.asarray(self.mode, dtype=int), (grid.d,))
        phase = sum(mi * xi for mi, xi in zip(m, grid.coords)) * (math.pi / grid.L)
        return self.amplitude * np.exp(1j * phase)


@dataclass
class RunConfig:
    d: int = 1
    n: int = 512
    L: float = 20 * math.pi
    alpha: float = 3.0
    lam: int = 1
    noise: list = field(default_factory=list)
    seed: int = 0
    T: float = 1.0
    dt: float = 1e-3
    formulation: str = "direct"
    initial: InitialData = field(default_factory=InitialData)
    output_dir: str | None = None
    diagnostics: list = field(default_factory=list)
    snapshot_stride: int = 1
    noise_placement: str = "symmetric"
    scope: str = "local-H2"
    blowup_factor: float = 1e3
    warnings: list = field(default_factory=list, compare=False)

    @property
    def grid(self) -> Grid:
        return Grid(self.d, self.n, self.L)

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    def to_dict(self) -> dict:
        out = {
            "d": self.d,
            "grid": {"n": self.n, "L": self.L},
            "alpha": self.alpha,
            "lambda": self.lam,
            "noise": [
                {"amplitude": p.amplitude, "width": p.width, "center": list(np.atleast_1d(p.center).tolist())}
                for p in self.noise
            ],
            "seed": self.seed,
            "time": {"T": self.T, "dt": self.dt},
            "formulation": self.formulation,
            "initial": {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.initial).items()},
            "output_dir": self.output_dir,
            "diagnostics": list(self.diagnostics),
            "snapshot_stride": self.snapshot_stride,
            "noise_placement": self.noise_placement,
            "scope": self.scope,
            "blowup_factor": self.blowup_factor,
        }
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _number(errors, obj, key, default, *, kind=float, where=""):
    v = obj.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        errors.append(f"{where}{key}: expected a number, got {v!r}")
        return default
    if kind is int and v != int(v):
        errors.append(f"{where}{key}: expected an integer, got {v!r}")
        return default
    return kind(v)


def _vector(v, d):
    return tuple(float(c) for c in np.broadcast_to(np.atleast_1d(np.asarray(v, dtype=float)), (d,)))


def parse_config(text: str | dict) -> RunConfig:
    """Validate a JSON config and fill defaults; raise ``ConfigError`` listing every violation."""
    if isinstance(text, dict):
        raw = text
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["top level must be a JSON object"])
    errors: list[str] = []
    warnings: list[str] = []
    known = {
        "d", "grid", "alpha", "lambda", "noise", "seed", "time", "formulation", "initial",
        "output_dir", "diagnostics", "snapshot_stride", "noise_placement", "scope", "blowup_factor",
    }
    for key in sorted(set(raw) - known):
        errors.append(f"{key}: unknown field")

    d = _number(errors, raw, "d", 1, kind=int)
    if d not in (1, 2, 3):
        errors.append(f"d: simulations support dimensions 1, 2, 3, got {d}")
        d_ok = False
    else:
        d_ok = True
    n0, L0 = default_grid(d) if d_ok else (512, 20 * math.pi)
    g = raw.get("grid", {})
    if not isinstance(g, dict):
        errors.append("grid: expected an object {n, L}")
        g = {}
    n = _number(errors, g, "n", n0, kind=int, where="grid.")
    L = _number(errors, g, "L", L0, where="grid.")
    if n < 16 or n & (n - 1):
        errors.append(f"grid.n: must be a power of two >= 16, got {n}")
    if not (L > 0 and math.isfinite(L)):
        errors.append(f"grid.L: must be positive, got {L}")

    alpha = _number(errors, raw, "alpha", 3.0)
    if not alpha > 1:
        errors.append(f"alpha: the power nonlinearity requires alpha > 1, got {alpha}")
    lam = _number(errors, raw, "lambda", 1, kind=int)
    if lam not in (1, -1):
        errors.append(f"lambda: must be +1 (focusing) or -1 (defocusing), got {lam}")

    profiles = []
    noise = raw.get("noise", [])
    if not isinstance(noise, list):
        errors.append("noise: expected a list of profiles")
        noise = []
    for i, p in enumerate(noise):
        where = f"noise[{i}]."
        if not isinstance(p, dict):
            errors.append(f"noise[{i}]: expected an object")
            continue
        if p.get("kind", "gaussian") != "gaussian":
            errors.append(f"{where}kind: only 'gaussian' profiles are built in")
        amp = _number(errors, p, "amplitude", 1.0, where=where)
        width = _number(errors, p, "width", 1.0, where=where)
        if not width > 0:
            errors.append(f"{where}width: must be positive, got {width}")
            continue
        try:
            center = _vector(p.get("center", 0.0), d if d_ok else 1)
        except ValueError:
            errors.append(f"{where}center: expected a scalar or a length-{d} list")
            continue
        profiles.append(ProfileSpec(amp, width, center if len(center) > 1 else center[0]))

    seed = _number(errors, raw, "seed", 0, kind=int)
    if not 0 <= seed < 2**64:
        errors.append(f"seed: must be an unsigned 64-bit integer, got {seed}")
    t = raw.get("time", {})
    if not isinstance(t, dict):
        errors.append("time: expected an object {T, dt}")
        t = {}
    T = _number(errors, t, "T", 1.0, where="time.")
    dt = _number(errors, t, "dt", 1e-3, where="time.")
    if not dt > 0:
        errors.append(f"time.dt: must be positive, got {dt}")
    elif T < 0:
        errors.append(f"time.T: must be nonnegative, got {T}")
    elif abs(T / dt - round(T / dt)) > 1e-9 * max(1.0, T / dt):
        errors.append(f"time: dt = {dt} does not divide T = {T}")

    formulation = raw.get("formulation", "direct")
    if formulation not in FORMULATIONS:
        errors.append(f"formulation: one of {FORMULATIONS}, got {formulation!r}")
    placement = raw.get("noise_placement", "symmetric")
    if placement not in NOISE_PLACEMENTS:
        errors.append(f"noise_placement: one of {NOISE_PLACEMENTS}, got {placement!r}")

    ini = raw.get("initial", {})
    initial = InitialData(center=(0.0,) * (d if d_ok else 1))
    if not isinstance(ini, dict):
        errors.append("initial: expected an object")
    else:
        kind = ini.get("kind", "gaussian")
        if kind not in INITIAL_KINDS:
            errors.append(f"initial.kind: one of {INITIAL_KINDS}, got {kind!r}")
        else:
            amp = _number(errors, ini, "amplitude", 1.0, where="initial.")
            width = _number(errors, ini, "width", 1.0, where="initial.")
            if kind == "gaussian" and not width > 0:
                errors.append(f"initial.width: must be positive, got {width}")
            try:
                center = _vector(ini.get("center", 0.0), d if d_ok else 1)
                mode = tuple(int(m) for m in np.broadcast_to(np.atleast_1d(ini.get("mode", 1)), (d if d_ok else 1,)))
                initial = InitialData(kind, amp, width, center, mode)
            except (ValueError, TypeError):
                errors.append("initial: center/mode must be a scalar or a list matching d")

    diagnostics = raw.get("diagnostics", [])
    if not isinstance(diagnostics, list):
        errors.append("diagnostics: expected a list of check names")
        diagnostics = []
    for name in diagnostics:
        if name not in DIAGNOSTICS:
            errors.append(f"diagnostics: unknown check {name!r}; known: {', '.join(DIAGNOSTICS)}")

    stride = _number(errors, raw, "snapshot_stride", 1 if d == 1 else 10, kind=int)
    if stride < 1:
        errors.append(f"snapshot_stride: must be >= 1, got {stride}")
    scope = raw.get("scope", "local-H2")
    if scope not in exponents.SCOPES:
        errors.append(f"scope: one of {exponents.SCOPES}, got {scope!r}")
    blowup_factor = _number(errors, raw, "blowup_factor", 1e3)
    output_dir = raw.get("output_dir")
    if output_dir is not None and not isinstance(output_dir, str):
        errors.append("output_dir: expected a path string")

    if errors:
        raise ConfigError(errors)

    try:
        rng = exponents.power_range(d, scope, lam=lam)
    except ValueError as exc:
        warnings.append(f"alpha range unavailable for scope {scope!r}: {exc}")
    else:
        a = Fraction(repr(alpha))
        if a not in rng:
            warnings.append(f"alpha = {alpha} lies outside the {scope} range {rng} for d = {d} (exploratory run)")
    grid = Grid(d, n, L)
    if initial.kind == "gaussian":
        edge = boundary_max(grid, initial.field(grid))
        if edge > BOUNDARY_TOL:
            warnings.append(
                f"initial data reaches {edge:.2e} on the box boundary (L = {L}); "
                f"wrap-around is not negligible below {BOUNDARY_TOL:g}"
            )
    return RunConfig(
        d=d, n=n, L=L, alpha=alpha, lam=lam, noise=profiles, seed=seed, T=T, dt=dt,
        formulation=formulation, initial=initial, output_dir=output_dir,
        diagnostics=list(diagnostics), snapshot_stride=stride, noise_placement=placement,
        scope=scope, blowup_factor=blowup_factor, warnings=warnings,
    )
