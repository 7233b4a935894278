"""Fused compiled kernels for the hot interval operations.

These compute exactly the same bounds as the reference array code in
:mod:`doakit.ivarray` (TwoSum / TwoProduct error terms, one representable step
outward only on the inexact side) but in a single pass per operation. The
outward step is done on the integer view of the result buffer, which keeps the
loop free of data-dependent branches.

Rare situations the error-free transforms cannot describe (overflow inside
the transform, gradual underflow of a product) fall back to an unconditional
step on both sides.
"""

import numpy as np
import numba as nb

_SPLITTER = 134217729.0  # 2**27 + 1
# below this magnitude the TwoProduct error term may itself underflow
_UNDERFLOW_GUARD = 2.0**-960
_INF = np.inf


@nb.njit(cache=True, inline="always")
def _isfinite(v):
    return abs(v) < _INF


@nb.njit(cache=True, inline="always")
def _prod_err(x, y):
    p = x * y
    t = _SPLITTER * x
    xh = t - (t - x)
    xl = x - xh
    t = _SPLITTER * y
    yh = t - (t - y)
    yl = y - yh
    e = ((xh * yh - p) + xh * yl + xl * yh) + xl * yl
    return p, e


@nb.njit(cache=True, inline="always")
def _sum_err(x, y):
    s = x + y
    bp = s - x
    e = (x - (s - bp)) + (y - bp)
    return s, e


@nb.njit(cache=True, inline="always")
def _emit(lo, hi, li, hii, i, v, e_down, e_up):
    """Store ``v`` into slot ``i`` of both buffers and step outward as needed.

    ``e_down``/``e_up`` are error terms whose sign decides the step on each
    side. Branch-free so the loop vectorizes.
    """
    lo[i] = v
    hi[i] = v
    s = np.int64(v < 0) - np.int64(v > 0)
    li[i] += np.int64(e_down < 0) * s
    hii[i] -= np.int64(e_up > 0) * s


@nb.njit(cache=True)
def _widen_flagged(lo, hi, flags):
    # rare path: the error-free transform could not be trusted
    for i in range(flags.size):
        if flags[i]:
            v = lo[i]
            if v > -_INF:
                lo[i] = np.nextafter(v, -_INF)
            v = hi[i]
            if v < _INF:
                hi[i] = np.nextafter(v, _INF)


@nb.njit(cache=True, inline="always")
def _mul_scalar(x, y, lo, hi, li, hii, i):
    """Directed product bounds into slot ``i``; returns the widen-both flag."""
    p, e = _prod_err(x, y)
    nan = p != p  # 0 * inf
    p = 0.0 if nan else p
    e = 0.0 if nan else e
    fin_in = _isfinite(x) and _isfinite(y)
    flag = fin_in and (
        not _isfinite(e) or (abs(p) < _UNDERFLOW_GUARD and x != 0.0 and y != 0.0)
    )
    # flagged slots get exactly one step, from the fix-up pass
    e = 0.0 if flag else e
    _emit(lo, hi, li, hii, i, p, e, e)
    return flag


@nb.njit(cache=True)
def add_bounds(alo, ahi, blo, bhi):
    n = alo.size
    lo = np.empty(n)
    hi = np.empty(n)
    lo_flag = np.zeros(n, dtype=np.bool_)
    hi_flag = np.zeros(n, dtype=np.bool_)
    li = lo.view(np.int64)
    hii = hi.view(np.int64)
    for i in range(n):
        s, e = _sum_err(alo[i], blo[i])
        lo[i] = s
        lo_flag[i] = _isfinite(alo[i]) and _isfinite(blo[i]) and not _isfinite(e)
        li[i] += np.int64(e < 0 and not lo_flag[i]) * (np.int64(s < 0) - np.int64(s > 0))
        s, e = _sum_err(ahi[i], bhi[i])
        hi[i] = s
        hi_flag[i] = _isfinite(ahi[i]) and _isfinite(bhi[i]) and not _isfinite(e)
        hii[i] -= np.int64(e > 0 and not hi_flag[i]) * (np.int64(s < 0) - np.int64(s > 0))
    for i in range(n):
        if lo_flag[i] and lo[i] > -_INF:
            lo[i] = np.nextafter(lo[i], -_INF)
        if hi_flag[i] and hi[i] < _INF:
            hi[i] = np.nextafter(hi[i], _INF)
    return lo, hi


@nb.njit(cache=True)
def mul_bounds(a, b):
    n = a.size
    lo = np.empty(n)
    hi = np.empty(n)
    flags = np.zeros(n, dtype=np.bool_)
    li = lo.view(np.int64)
    hii = hi.view(np.int64)
    for i in range(n):
        flags[i] = _mul_scalar(a[i], b[i], lo, hi, li, hii, i)
    _widen_flagged(lo, hi, flags)
    return lo, hi


@nb.njit(cache=True)
def mul_interval(alo, ahi, blo, bhi):
    lo, hi = mul_bounds(alo, blo)
    for x, y in ((alo, bhi), (ahi, blo), (ahi, bhi)):
        d, u = mul_bounds(x, y)
        for i in range(lo.size):
            lo[i] = min(lo[i], d[i])
            hi[i] = max(hi[i], u[i])
    return lo, hi


@nb.njit(cache=True)
def pow_magnitude(v, k):
    """Directed bounds of ``v**k`` for ``v >= 0`` by chained products."""
    lo, hi = mul_bounds(v, v)
    for _ in range(k - 2):
        lo = mul_bounds(lo, v)[0]
        hi = mul_bounds(hi, v)[1]
    return lo, hi
