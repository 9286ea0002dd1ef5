"""Exact exponent arithmetic: Strichartz pairs, duals and power ranges.

Everything here is ``fractions.Fraction`` plus a single tagged infinity ``INF``;
floats are rejected at the boundary so closed/open endpoints stay exact.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

__all__ = [
    "INF",
    "Interval",
    "IntervalUnion",
    "StrichartzPair",
    "Certificate",
    "as_exact",
    "reciprocal",
    "positive_part_bound",
    "is_admissible",
    "dual_exponent",
    "power_range",
    "scaling_range",
    "proof_pair",
    "admitted_alpha_range",
    "theta_gap",
    "SCOPES",
    "CONTEXTS",
]


@functools.total_ordering
class _Infinity:
    """Positive infinity that orders above every rational."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __eq__(self, other):
        return other is self

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return other is not self

    def __hash__(self):
        return hash("snls.INF")

    def __repr__(self):
        return "INF"

    def __str__(self):
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()


def as_exact(x):
    """Coerce ints, Fractions, rational strings or INF; refuse floats."""
    if x is INF:
        return INF
    if isinstance(x, bool):
        raise TypeError("booleans are not exponents")
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        if x.strip().lower() in ("inf", "infinity", "oo"):
            return INF
        return Fraction(x)
    raise TypeError(f"exact rational or INF required, got {type(x).__name__}")


def reciprocal(x):
    x = as_exact(x)
    if x is INF:
        return Fraction(0)
    if x == 0:
        return INF
    return 1 / x


def positive_part_bound(num, h):
    """``num / h^+`` with the convention ``1/h^+ = inf`` for ``h <= 0``."""
    h = as_exact(h)
    if h <= 0:
        return INF
    return as_exact(num) / h


def _fmt(x) -> str:
    return str(x)


@dataclass(frozen=True)
class Interval:
    lo: object
    hi: object
    lo_closed: bool = False
    hi_closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "lo", as_exact(self.lo))
        object.__setattr__(self, "hi", as_exact(self.hi))
        if self.hi is INF and self.hi_closed:
            raise ValueError("an interval cannot be closed at infinity")

    @property
    def empty(self) -> bool:
        if self.hi < self.lo:
            return True
        if self.hi == self.lo:
            return not (self.lo_closed and self.hi_closed)
        return False

    def __contains__(self, a) -> bool:
        a = as_exact(a)
        if a is INF:
            return False
        above = a >= self.lo if self.lo_closed else a > self.lo
        below = a <= self.hi if self.hi_closed else a < self.hi
        return above and below

    def issubset(self, other: "Interval") -> bool:
        if self.empty:
            return True
        if self.lo < other.lo or (self.lo == other.lo and self.lo_closed and not other.lo_closed):
            return False
        if self.hi > other.hi or (self.hi == other.hi and self.hi_closed and not other.hi_closed):
            return False
        return True

    def __str__(self):
        return f"{'[' if self.lo_closed else '('}{_fmt(self.lo)}, {_fmt(self.hi)}{']' if self.hi_closed else ')'}"


class IntervalUnion:
    """Finite union of disjoint intervals in ascending order; empty parts dropped."""

    def __init__(self, parts=()):
        self.parts = tuple(sorted((p for p in parts if not p.empty), key=lambda p: (p.lo, not p.lo_closed)))

    def __contains__(self, a) -> bool:
        return any(a in p for p in self.parts)

    def __eq__(self, other):
        if not isinstance(other, IntervalUnion):
            return NotImplemented
        return self.parts == other.parts

    def __hash__(self):
        return hash(self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __len__(self):
        return len(self.parts)

    @property
    def empty(self) -> bool:
        return not self.parts

    def issubset(self, other: "IntervalUnion") -> bool:
        return all(any(p.issubset(q) for q in other.parts) for p in self.parts)

    def __str__(self):
        return " U ".join(str(p) for p in self.parts) if self.parts else "{}"

    def __repr__(self):
        return f"IntervalUnion({self})"


def _open(lo, hi):
    return Interval(lo, hi, False, False)


def _half_open(lo, hi):
    return Interval(lo, hi, True, False)


@dataclass(frozen=True)
class Certificate:
    """Outcome of an admissibility test with the exact quantities checked."""

    d: int
    p: object
    q: object
    lhs: Fraction  # 2/q
    rhs: Fraction  # d/2 - d/p
    scaling_ok: bool
    range_ok: bool

    def __bool__(self):
        return self.scaling_ok and self.range_ok

    @property
    def admissible(self) -> bool:
        return bool(self)


@dataclass(frozen=True)
class StrichartzPair:
    p: object
    q: object
    d: int

    def __post_init__(self):
        object.__setattr__(self, "p", as_exact(self.p))
        object.__setattr__(self, "q", as_exact(self.q))

    @property
    def certificate(self) -> Certificate:
        return is_admissible(self.d, self.p, self.q)

    @property
    def dual(self) -> tuple:
        return dual_exponent(self.p), dual_exponent(self.q)

    def __iter__(self):
        return iter((self.p, self.q))

    def __str__(self):
        return f"({self.p}, {self.q})"


def is_admissible(d: int, p, q) -> Certificate:
    """Scaling relation ``2/q = d/2 - d/p`` plus the dimension-dependent range."""
    p, q = as_exact(p), as_exact(q)
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    for name, v in (("p", p), ("q", q)):
        if v is not INF and v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")
    lhs = 2 * reciprocal(q)
    rhs = Fraction(d, 2) - d * reciprocal(p)
    two = Fraction(2)
    if d == 2:
        range_ok = two <= p and p is not INF and two < q
    else:
        range_ok = two <= p and two <= q
    return Certificate(d, p, q, lhs, rhs, lhs == rhs, bool(range_ok))


def dual_exponent(p):
    """Hoelder conjugate ``p'`` with ``1/p + 1/p' = 1``."""
    p = as_exact(p)
    if p is not INF and p < 1:
        raise ValueError(f"exponent must be >= 1, got {p}")
    return reciprocal(1 - reciprocal(p))


def scaling_range(d: int, s) -> IntervalUnion:
    """``1 < alpha < 1 + 4/(d - 2s)^+``."""
    bound = positive_part_bound(4, d - 2 * as_exact(s))
    return IntervalUnion([_open(1, INF if bound is INF else 1 + bound)])


def _plus(bound, offset=1):
    return INF if bound is INF else offset + bound


SCOPES = (
    "scaling",
    "local-L2",
    "local-H1",
    "local-H2",
    "H2-smooth",
    "global-H1",
    "global-H2",
    "conservative-L2",
    "conservative-H1",
)


def power_range(d: int, scope: str, *, s=None, lam: int | None = None) -> IntervalUnion:
    """Admissible powers ``alpha`` of the nonlinearity for a well-posedness result.

    Scopes:
        ``scaling``: the scaling condition for ``H^s`` (needs ``s``).
        ``local-L2``, ``local-H1``: the scaling condition at s = 0, 1.
        ``local-H2``: the H^2 local theory, three dimension regimes.
        ``H2-smooth``: ``2 <= alpha < 1 + 4/(d-4)^+`` for ``d <= 7``.
        ``global-H1``: depends on the sign ``lam``.
        ``global-H2``: persistence-of-regularity range, ``d <= 7``, needs ``lam``.
        ``conservative-L2``, ``conservative-H1``: earlier results for purely
        imaginary noise.
    """
    if not isinstance(d, int) or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    if scope == "scaling":
        if s is None:
            raise ValueError("scope 'scaling' needs s")
        return scaling_range(d, s)
    if scope == "local-L2":
        return scaling_range(d, 0)
    if scope == "local-H1":
        return scaling_range(d, 1)
    if scope == "local-H2":
        if d <= 4:
            return IntervalUnion([_open(1, INF)])
        low = _open(1, 1 + Fraction(2, d - 2))
        if d <= 7:
            return IntervalUnion([low, _half_open(2, 1 + Fraction(4, d - 4))])
        return IntervalUnion([low])
    if scope == "H2-smooth":
        if d > 7:
            raise ValueError(f"scope 'H2-smooth' requires d <= 7, got {d}")
        return IntervalUnion([_half_open(2, _plus(positive_part_bound(4, d - 4)))])
    if scope in ("global-H1", "global-H2"):
        if lam not in (1, -1):
            raise ValueError(f"scope {scope!r} needs lam = +1 or -1")
        if scope == "global-H2" and d > 7:
            raise ValueError(f"scope 'global-H2' requires d <= 7, got {d}")
        hi = _plus(positive_part_bound(4, d - 2)) if lam == -1 else 1 + Fraction(4, d)
        lo = 1 if scope == "global-H1" else 2
        return IntervalUnion([Interval(lo, hi, scope == "global-H2", False)])
    if scope == "conservative-L2":
        hi = 1 + Fraction(4, d) if d <= 2 else 1 + Fraction(2, d - 1)
        return IntervalUnion([_open(1, hi)])
    if scope == "conservative-H1":
        if d <= 2:
            return IntervalUnion([_open(1, INF)])
        if d == 3:
            return IntervalUnion([_open(1, 5)])
        low = _open(1, 1 + Fraction(2, d - 1))
        if d in (4, 5):
            return IntervalUnion([low, _half_open(2, 1 + Fraction(4, d - 2))])
        return IntervalUnion([low])
    raise ValueError(f"unknown scope {scope!r}")


CONTEXTS = ("step1", "ycor-d4", "ycor-d567", "yglob")


def admitted_alpha_range(d: int, context: str) -> IntervalUnion:
    """Powers for which ``proof_pair(d, alpha, context)`` is defined."""
    if context == "step1":
        return IntervalUnion([Interval(1, _plus(positive_part_bound(2, d - 2)), False, d > 2)])
    if context == "ycor-d4":
        if d != 4:
            raise ValueError("context 'ycor-d4' is for d = 4")
        return IntervalUnion([_half_open(2, INF)])
    if context == "ycor-d567":
        if d not in (5, 6, 7):
            raise ValueError("context 'ycor-d567' is for d = 5, 6, 7")
        return IntervalUnion([_half_open(2, 1 + Fraction(4, d - 4))])
    if context == "yglob":
        if d > 7:
            raise ValueError("context 'yglob' is for d <= 7")
        # the H^1 pair (alpha+1, ...) needs q >= 2 (q > 2 at d = 2), i.e. alpha < 1 + 4/(d-2)^+
        return IntervalUnion([_half_open(2, _plus(positive_part_bound(4, d - 2)))])
    raise ValueError(f"unknown context {context!r}")


def proof_pair(d: int, alpha, context: str) -> StrichartzPair:
    """The Strichartz pair used by a given fixed-point argument."""
    a = as_exact(alpha)
    if a is INF or a not in admitted_alpha_range(d, context):
        raise ValueError(f"alpha = {alpha} outside the range admitted by {context!r} at d = {d}")
    if context == "step1":
        pair = StrichartzPair(4 * a / (a + 1), 8 * a / (d * (a - 1)), d)
    elif context == "ycor-d4":
        pair = StrichartzPair(2 * (a + 2) / (a + 1), a + 2, d)
    elif context == "ycor-d567":
        pair = StrichartzPair(d * (a + 1) / (d + 2 * a - 2), 4 * (a + 1) / ((d - 4) * (a - 1)), d)
    else:
        pair = StrichartzPair(a + 1, 4 * (a + 1) / (d * (a - 1)), d)
    cert = pair.certificate
    if not cert:
        raise ArithmeticError(f"pair {pair} failed admissibility: {cert}")
    return pair


def theta_gap(q):
    """Time-Hoelder gap ``theta`` from ``1 - 1/q = theta + 1/q``."""
    q = as_exact(q)
    if q is not INF and q <= 2:
        raise ValueError(f"q must exceed 2 for a positive gap, got {q}")
    return 1 - 2 * reciprocal(q)
