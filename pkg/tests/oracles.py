"""Slow reference implementations used as test oracles.

Everything here is written with explicit loops or dense DFT matrices so it
shares no code path with the package.
"""

import math

import numpy as np


def dft_matrix(n, L):
    x = -L + (2 * L / n) * np.arange(n)
    m = np.arange(-n // 2, n // 2)
    k = m * math.pi / L
    F = np.exp(-1j * np.outer(k, x))  # forward, symmetric mode order
    return F, k, x


def bump(kabs, band, lo, hi):
    """Cosine bump in log2|k|; edge bands absorb everything beyond them."""
    if kabs == 0.0:
        return 1.0 if band == lo else 0.0
    u = math.log2(kabs) - band
    if band == lo and u <= 0:
        return 1.0
    if band == hi and u >= 0:
        return 1.0
    return math.cos(0.5 * math.pi * u) ** 2 if abs(u) < 1 else 0.0


def band_range(n, L, d):
    lo = math.floor(math.log2(math.pi / L))
    hi = math.ceil(math.log2(math.sqrt(d) * (n // 2) * math.pi / L))
    return lo, hi


def lp_project(values, n, L, d, band):
    """S_band applied slice by slice with a dense DFT (d = 1 or 2)."""
    F, k, _ = dft_matrix(n, L)
    Finv = np.conj(F).T / n
    lo, hi = band_range(n, L, d)
    out = np.empty_like(values, dtype=complex)
    for t in range(values.shape[0]):
        if d == 1:
            c = F @ values[t]
            sym = np.array([bump(abs(kk), band, lo, hi) for kk in k])
            out[t] = Finv @ (sym * c)
        else:
            c = F @ values[t] @ F.T
            sym = np.array([[bump(math.hypot(a, b), band, lo, hi) for b in k] for a in k])
            out[t] = Finv @ (sym * c) @ Finv.T
    return out


def trapezoid(times, per_slice):
    total = 0.0
    for i in range(len(times) - 1):
        total += 0.5 * (times[i + 1] - times[i]) * (per_slice[i] + per_slice[i + 1])
    return total


def _points(n, L, d):
    _, _, x = dft_matrix(n, L)
    h = 2 * L / n
    if d == 1:
        return [((i,), abs(x[i])) for i in range(n)], h
    return [((i, j), math.hypot(x[i], x[j])) for i in range(n) for j in range(n)], h * h


def region_l2(values, times, n, L, d, inside, weight):
    pts, vol = _points(n, L, d)
    per = []
    for t in range(len(times)):
        s = 0.0
        for idx, r in pts:
            if inside(r):
                s += abs(values[(t,) + idx]) ** 2 * weight(r) ** 2
        per.append(vol * s)
    return math.sqrt(trapezoid(times, per))


def xk(values, times, n, L, d, k):
    rmax = max(r for _, r in _points(n, L, d)[0])
    jmax = int(math.floor(math.log2(rmax))) if rmax >= 2 else 0
    if k >= 0:
        head = region_l2(values, times, n, L, d, lambda r: r <= 2, lambda r: 1.0)
        js = range(1, jmax + 1)
        w = lambda r: (1 + r * r) ** -0.25
    else:
        head = 2 ** (k / 2) * region_l2(values, times, n, L, d, lambda r: r <= 2.0**-k, lambda r: 1.0)
        js = range(max(1, -k), jmax + 1)
        w = lambda r: (r + 2.0**-k) ** -0.5
    tail = 0.0
    for j in js:
        tail = max(tail, region_l2(values, times, n, L, d, lambda r, j=j: 2**j <= r <= 2 ** (j + 1), w))
    return head + tail


def xtilde(values, times, n, L, d):
    if d == 2:
        w0 = lambda r: (1 + r * r) ** -0.5 / math.log(2 + r)
    else:
        w0 = lambda r: (1 + r * r) ** -0.5
    total = region_l2(values, times, n, L, d, lambda r: True, w0) ** 2
    lo, hi = band_range(n, L, d)
    for band in range(lo, hi + 1):
        total += 2.0**band * xk(lp_project(values, n, L, d, band), times, n, L, d, band) ** 2
    return math.sqrt(total)


# --- power ranges as explicit interval lists ---------------------------------
# Each entry is (lo, lo_closed, hi, hi_closed) with hi = None for +infinity.


def _cap(num, h):
    """1 + num / h^+ ; None when h <= 0."""
    from fractions import Fraction

    return None if h <= 0 else 1 + Fraction(num, h)


def expected_range(d, scope, lam=None, s=None):
    """Nonempty parts only."""
    return [p for p in _expected(d, scope, lam, s)
            if p[2] is None or p[2] > p[0] or (p[2] == p[0] and p[1] and p[3])]


def _expected(d, scope, lam=None, s=None):
    from fractions import Fraction

    two = Fraction(2)
    if scope == "scaling":
        return [(1, False, _cap(4, d - 2 * s), False)]
    if scope == "local-L2":
        return _expected(d, "scaling", s=0)
    if scope == "local-H1":
        return _expected(d, "scaling", s=1)
    if scope == "local-H2":
        if d <= 4:
            return [(1, False, None, False)]
        if d <= 7:
            return [(1, False, 1 + Fraction(2, d - 2), False), (two, True, 1 + Fraction(4, d - 4), False)]
        return [(1, False, 1 + Fraction(2, d - 2), False)]
    if scope == "H2-smooth":
        return [(two, True, _cap(4, d - 4), False)]
    if scope in ("global-H1", "global-H2"):
        lo, closed = (1, False) if scope == "global-H1" else (two, True)
        hi = _cap(4, d - 2) if lam == -1 else 1 + Fraction(4, d)
        return [(lo, closed, hi, False)]
    if scope == "conservative-L2":
        return [(1, False, 1 + Fraction(4, d) if d <= 2 else 1 + Fraction(2, d - 1), False)]
    if scope == "conservative-H1":
        if d <= 2:
            return [(1, False, None, False)]
        if d == 3:
            return [(1, False, Fraction(5), False)]
        if d in (4, 5):
            return [(1, False, 1 + Fraction(2, d - 1), False), (two, True, 1 + Fraction(4, d - 2), False)]
        return [(1, False, 1 + Fraction(2, d - 1), False)]
    raise ValueError(scope)
