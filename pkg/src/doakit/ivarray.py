"""Vectorized interval kernels with outward rounding.

Every kernel takes endpoint arrays (or plain floats) and returns a ``(lo, hi)``
pair of float64 arrays. Domain violations are reported as NaN endpoints; the
caller decides whether to raise or widen.

Addition and multiplication use error-free transforms (TwoSum, Dekker's
TwoProduct) to learn the sign of the rounding error, so a bound is moved one
representable step outward only when the float result is actually inexact on
that side. When numba is available, addition, multiplication and integer
powers run through equivalent single-pass kernels (``doakit._fast``). Library
transcendental functions carry no correct-rounding
guarantee and are widened by ``TRANSCENDENTAL_ULPS`` steps.
"""

import numpy as np

try:  # optional fused kernels; the array code below is the reference
    from doakit import _fast
except ImportError:  # pragma: no cover - exercised only without numba
    _fast = None

TRANSCENDENTAL_ULPS = 2

_SPLITTER = 134217729.0  # 2**27 + 1
_TWO_PI = 2.0 * np.pi
# beyond this magnitude period reduction in float64 is meaningless
_TRIG_REDUCTION_LIMIT = 1e6

_NEG_INF = -np.inf
_POS_INF = np.inf


def _arr(x):
    return np.asarray(x, dtype=np.float64)


def two_sum(a, b):
    s = a + b
    bp = s - a
    e = (a - (s - bp)) + (b - bp)
    return s, e


def _split(a):
    t = _SPLITTER * a
    hi = t - (t - a)
    return hi, a - hi


def two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


_TINY = 5e-324  # smallest positive subnormal


def _step(x, toward_neg, mask):
    """One representable step toward -inf/+inf where ``mask`` holds.

    Works on the IEEE bit pattern: for positive floats the integer view grows
    with the value, for negative floats it grows with the magnitude. This is a
    large constant factor cheaper than ``np.nextafter``.
    """
    bits = x.view(np.int64)
    away = (x < 0) if toward_neg else (x > 0)
    delta = np.where(away, 1, -1) * mask
    # -0.0 is INT64_MIN and may wrap here; zeros are overwritten just below
    with np.errstate(over="ignore"):
        out = (bits + delta).view(np.float64)
    zero = x == 0
    if zero.any():
        out = np.where(zero & mask, -_TINY if toward_neg else _TINY, out)
    # infinities stay put, except the finite extreme reached from the other side
    stuck = np.isinf(x) & ((x < 0) if toward_neg else (x > 0))
    if stuck.any():
        out = np.where(stuck, x, out)
    return out


_UNDERFLOW_GUARD = 2.0**-960  # TwoProduct error terms may underflow below this


def _round_pair(s, e, unsure):
    """Directed bounds of ``s + e`` (the exact result); ``unsure`` widens both sides."""
    down = _step(s, True, (e < 0) | unsure)
    up = _step(s, False, (e > 0) | unsure)
    return down, up


def nudge_down(x, steps=1):
    x = _arr(x)
    for _ in range(steps):
        x = _step(x, True, np.isfinite(x))
    return x


def nudge_up(x, steps=1):
    x = _arr(x)
    for _ in range(steps):
        x = _step(x, False, np.isfinite(x))
    return x


def _finite_pair(a, b):
    return np.isfinite(a) & np.isfinite(b)


def sum_bounds(a, b):
    """Lower and upper float bounds of the exact sum ``a + b``."""
    a, b = _arr(a), _arr(b)
    with np.errstate(invalid="ignore", over="ignore"):
        s, e = two_sum(a, b)
        # a non-finite error from finite inputs means the sum overflowed
        return _round_pair(s, e, _finite_pair(a, b) & ~np.isfinite(e))


def mul_bounds(a, b):
    """Lower and upper float bounds of the exact product ``a * b``."""
    a, b = _arr(a), _arr(b)
    with np.errstate(invalid="ignore", over="ignore"):
        p, e = two_prod(a, b)
        nan = np.isnan(p)  # 0 * inf convention
        p = np.where(nan, 0.0, p)
        e = np.where(nan, 0.0, e)
        unsure = _finite_pair(a, b) & (
            ~np.isfinite(e) | ((np.abs(p) < _UNDERFLOW_GUARD) & (a != 0) & (b != 0))
        )
        return _round_pair(p, e, unsure)


def add_down(a, b):
    return sum_bounds(a, b)[0]


def add_up(a, b):
    return sum_bounds(a, b)[1]


def mul_down(a, b):
    return mul_bounds(a, b)[0]


def mul_up(a, b):
    return mul_bounds(a, b)[1]


# ---------------------------------------------------------------------------
# arithmetic


def neg(alo, ahi):
    return -_arr(ahi), -_arr(alo)


def _operands(*xs):
    """Broadcast to one contiguous 1-D float64 shape, as the kernels expect."""
    xs = [_arr(x) for x in xs]
    shape = np.broadcast_shapes(*(x.shape for x in xs))
    flat = []
    for x in xs:
        if x.shape != shape:
            x = np.broadcast_to(x, shape)
        flat.append(np.ascontiguousarray(x).reshape(-1))
    return shape, flat


def add_reference(alo, ahi, blo, bhi):
    return add_down(alo, blo), add_up(ahi, bhi)


def mul_reference(alo, ahi, blo, bhi):
    bounds = [mul_bounds(x, y) for x in (alo, ahi) for y in (blo, bhi)]
    return (
        np.minimum.reduce([d for d, _ in bounds]),
        np.maximum.reduce([u for _, u in bounds]),
    )


def add(alo, ahi, blo, bhi):
    if _fast is None:
        return add_reference(alo, ahi, blo, bhi)
    shape, ops = _operands(alo, ahi, blo, bhi)
    lo, hi = _fast.add_bounds(*ops)
    return lo.reshape(shape), hi.reshape(shape)


def sub(alo, ahi, blo, bhi):
    return add(alo, ahi, -_arr(bhi), -_arr(blo))


def mul(alo, ahi, blo, bhi):
    if _fast is None:
        return mul_reference(alo, ahi, blo, bhi)
    shape, ops = _operands(alo, ahi, blo, bhi)
    lo, hi = _fast.mul_interval(*ops)
    return lo.reshape(shape), hi.reshape(shape)


def div(alo, ahi, blo, bhi):
    """Quotient; NaN where the divisor interval touches zero."""
    alo, ahi, blo, bhi = map(_arr, (alo, ahi, blo, bhi))
    bad = (blo <= 0) & (bhi >= 0)
    safe_lo = np.where(bad, 1.0, blo)
    safe_hi = np.where(bad, 1.0, bhi)
    with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
        q = [x / y for x in (alo, ahi) for y in (safe_lo, safe_hi)]
        q = [np.where(np.isnan(v), 0.0, v) for v in q]
    lo = nudge_down(np.minimum.reduce(q))
    hi = nudge_up(np.maximum.reduce(q))
    return np.where(bad, np.nan, lo), np.where(bad, np.nan, hi)


# ---------------------------------------------------------------------------
# elementary functions


def iabs(alo, ahi):
    alo, ahi = _arr(alo), _arr(ahi)
    lo = np.where(alo >= 0, alo, np.where(ahi <= 0, -ahi, 0.0))
    hi = np.where(alo >= 0, ahi, np.where(ahi <= 0, -alo, np.maximum(-alo, ahi)))
    return lo, hi


def pow_magnitude_reference(v, k):
    # v >= 0, so chaining directed bounds keeps each side rigorous
    down, up = mul_bounds(v, v)
    for _ in range(k - 2):
        down = mul_bounds(down, v)[0]
        up = mul_bounds(up, v)[1]
    return down, up


def _pow_mag(v, k):
    if _fast is None:
        return pow_magnitude_reference(v, k)
    shape, (flat,) = _operands(v)
    lo, hi = _fast.pow_magnitude(flat, k)
    return lo.reshape(shape), hi.reshape(shape)


def pow_int(alo, ahi, k):
    """Integer power ``k >= 0`` with exact monotone-piece handling."""
    alo, ahi = _arr(alo), _arr(ahi)
    if k < 0:
        raise ValueError("exponent must be nonnegative")
    if k == 0:
        return np.ones_like(alo), np.ones_like(ahi)
    if k == 1:
        return alo, ahi
    d_lo, u_lo = _pow_mag(np.abs(alo), k)
    d_hi, u_hi = _pow_mag(np.abs(ahi), k)
    nonneg = alo >= 0
    nonpos = ahi <= 0
    if k % 2 == 0:
        lo = np.where(nonneg, d_lo, np.where(nonpos, d_hi, 0.0))
        hi = np.where(nonneg, u_hi, np.where(nonpos, u_lo, np.maximum(u_lo, u_hi)))
    else:
        lo = np.where(alo >= 0, d_lo, -u_lo)
        hi = np.where(ahi >= 0, u_hi, -d_hi)
    return lo, hi


def sqrt(alo, ahi):
    alo, ahi = _arr(alo), _arr(ahi)
    bad = ahi < 0
    clo = np.where(bad, 0.0, np.maximum(alo, 0.0))
    chi = np.where(bad, 0.0, ahi)
    rlo, rhi = np.sqrt(clo), np.sqrt(chi)
    # sqrt is correctly rounded; compare r*r against the argument to find the side
    plo, elo = two_prod(rlo, rlo)
    phi, ehi = two_prod(rhi, rhi)
    lo = np.where((plo > clo) | ((plo == clo) & (elo > 0)), np.nextafter(rlo, _NEG_INF), rlo)
    hi = np.where((phi < chi) | ((phi == chi) & (ehi < 0)), np.nextafter(rhi, _POS_INF), rhi)
    lo = np.maximum(lo, 0.0)
    return np.where(bad, np.nan, lo), np.where(bad, np.nan, hi)


def exp(alo, ahi):
    with np.errstate(over="ignore"):
        lo = nudge_down(np.exp(_arr(alo)), TRANSCENDENTAL_ULPS)
        hi = nudge_up(np.exp(_arr(ahi)), TRANSCENDENTAL_ULPS)
    return np.maximum(lo, 0.0), hi


def tanh(alo, ahi):
    lo = nudge_down(np.tanh(_arr(alo)), TRANSCENDENTAL_ULPS)
    hi = nudge_up(np.tanh(_arr(ahi)), TRANSCENDENTAL_ULPS)
    return np.maximum(lo, -1.0), np.minimum(hi, 1.0)


def _hits(a, b, phase):
    """Whether some ``phase + 2*pi*k`` lies in ``[a, b]`` (errs toward True)."""
    tol = 1e-9 * (1.0 + np.abs(a) + np.abs(b))
    k = np.ceil((a - tol - phase) / _TWO_PI)
    t = phase + _TWO_PI * k
    return t <= b + tol


def _trig(alo, ahi, fn, max_phase, min_phase):
    alo, ahi = _arr(alo), _arr(ahi)
    fa, fb = fn(alo), fn(ahi)
    lo = nudge_down(np.minimum(fa, fb), TRANSCENDENTAL_ULPS)
    hi = nudge_up(np.maximum(fa, fb), TRANSCENDENTAL_ULPS)
    whole = ((ahi - alo) >= _TWO_PI) | (np.maximum(np.abs(alo), np.abs(ahi)) > _TRIG_REDUCTION_LIMIT)
    hi = np.where(whole | _hits(alo, ahi, max_phase), 1.0, hi)
    lo = np.where(whole | _hits(alo, ahi, min_phase), -1.0, lo)
    return np.maximum(lo, -1.0), np.minimum(hi, 1.0)


def sin(alo, ahi):
    return _trig(alo, ahi, np.sin, 0.5 * np.pi, -0.5 * np.pi)


def cos(alo, ahi):
    return _trig(alo, ahi, np.cos, 0.0, np.pi)


UNARY = {
    "neg": neg,
    "abs": iabs,
    "sqrt": sqrt,
    "exp": exp,
    "tanh": tanh,
    "sin": sin,
    "cos": cos,
}

BINARY = {"+": add, "-": sub, "*": mul, "/": div}
