"""Closed floating-point intervals and axis-aligned boxes.

Scalar arithmetic delegates to the kernels in :mod:`doakit.ivarray`, so the
scalar and batched evaluation paths share one rounding implementation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from doakit import ivarray
from doakit.errors import DegenerateBoxError, DomainError


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("interval bounds must not be NaN")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @classmethod
    def point(cls, x: float) -> Interval:
        return cls(x, x)

    @property
    def is_empty(self) -> bool:
        return self.lo > self.hi

    @property
    def width(self) -> float:
        return 0.0 if self.is_empty else self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * self.lo + 0.5 * self.hi

    def contains(self, x) -> bool:
        if isinstance(x, Interval):
            return x.is_empty or (self.lo <= x.lo and x.hi <= self.hi)
        return self.lo <= x <= self.hi

    def intersect(self, other: Interval) -> Interval:
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        return Interval(lo, hi) if lo <= hi else EMPTY

    def hull(self, other: Interval) -> Interval:
        if self.is_empty:
            return other
        if other.is_empty:
            return self
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def __add__(self, other):
        return iv_add(self, _coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return iv_sub(self, _coerce(other))

    def __rsub__(self, other):
        return iv_sub(_coerce(other), self)

    def __mul__(self, other):
        return iv_mul(self, _coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return iv_div(self, _coerce(other))

    def __rtruediv__(self, other):
        return iv_div(_coerce(other), self)

    def __neg__(self):
        return iv_neg(self)

    def __pow__(self, k: int):
        return iv_pow_int(self, k)

    def __repr__(self):
        if self.is_empty:
            return "Interval(empty)"
        return f"Interval({self.lo!r}, {self.hi!r})"


# explicit sentinel rather than NaN bounds
EMPTY = Interval(math.inf, -math.inf)


def _coerce(x) -> Interval:
    if isinstance(x, Interval):
        return x
    return Interval.point(float(x))


def _wrap(pair, what: str) -> Interval:
    lo, hi = (float(v) for v in pair)
    if math.isnan(lo) or math.isnan(hi):
        raise DomainError(f"{what}: argument outside the function domain")
    return Interval(lo, hi)


def _check(*args: Interval):
    for a in args:
        if a.is_empty:
            raise ValueError("operation on an empty interval")


def iv_add(a: Interval, b: Interval) -> Interval:
    _check(a, b)
    return _wrap(ivarray.add(a.lo, a.hi, b.lo, b.hi), "add")


def iv_sub(a: Interval, b: Interval) -> Interval:
    _check(a, b)
    return _wrap(ivarray.sub(a.lo, a.hi, b.lo, b.hi), "sub")


def iv_mul(a: Interval, b: Interval) -> Interval:
    _check(a, b)
    return _wrap(ivarray.mul(a.lo, a.hi, b.lo, b.hi), "mul")


def iv_div(a: Interval, b: Interval) -> Interval:
    _check(a, b)
    if b.lo <= 0.0 <= b.hi:
        raise DomainError(f"division by an interval containing zero: {b}")
    return _wrap(ivarray.div(a.lo, a.hi, b.lo, b.hi), "div")


def iv_neg(a: Interval) -> Interval:
    _check(a)
    return Interval(-a.hi, -a.lo)


def _unary(name):
    kernel = ivarray.UNARY[name]

    def op(a: Interval) -> Interval:
        _check(a)
        return _wrap(kernel(a.lo, a.hi), name)

    op.__name__ = f"iv_{name}"
    return op


iv_sin = _unary("sin")
iv_cos = _unary("cos")
iv_exp = _unary("exp")
iv_sqrt = _unary("sqrt")
iv_abs = _unary("abs")
iv_tanh = _unary("tanh")


def iv_pow_int(a: Interval, k: int) -> Interval:
    _check(a)
    if int(k) != k or k < 0:
        raise ValueError(f"exponent must be a nonnegative integer, got {k!r}")
    return _wrap(ivarray.pow_int(a.lo, a.hi, int(k)), "pow")


# ---------------------------------------------------------------------------
# boxes


@dataclass(frozen=True)
class IvBox:
    """Interval vector ``(x; u)``: ``n_state`` state dims then ``m_ctrl`` control dims."""

    dims: tuple
    n_state: int
    m_ctrl: int = 0

    def __post_init__(self):
        dims = tuple(d if isinstance(d, Interval) else Interval(*d) for d in self.dims)
        object.__setattr__(self, "dims", dims)
        if len(dims) != self.n_state + self.m_ctrl:
            raise ValueError(
                f"box has {len(dims)} dims but n_state + m_ctrl = {self.n_state + self.m_ctrl}"
            )

    @classmethod
    def from_bounds(cls, lo: Sequence[float], hi: Sequence[float], n_state=None, m_ctrl=0) -> IvBox:
        if len(lo) != len(hi):
            raise ValueError("lo and hi lengths differ")
        if n_state is None:
            n_state = len(lo) - m_ctrl
        return cls(tuple(Interval(a, b) for a, b in zip(lo, hi)), n_state, m_ctrl)

    @property
    def dim(self) -> int:
        return len(self.dims)

    @property
    def lo(self) -> np.ndarray:
        return np.array([d.lo for d in self.dims])

    @property
    def hi(self) -> np.ndarray:
        return np.array([d.hi for d in self.dims])

    @property
    def is_empty(self) -> bool:
        return any(d.is_empty for d in self.dims)

    @property
    def state(self) -> IvBox:
        return IvBox(self.dims[: self.n_state], self.n_state, 0)

    @property
    def control(self) -> IvBox:
        return IvBox(self.dims[self.n_state :], self.m_ctrl, 0)

    def volume(self) -> float:
        if self.is_empty:
            return 0.0
        return math.prod(d.width for d in self.dims)

    def __iter__(self):
        return iter(self.dims)

    def __getitem__(self, i):
        return self.dims[i]

    def __len__(self):
        return len(self.dims)


def width(b: IvBox) -> float:
    return max((d.width for d in b.dims), default=0.0)


def midpoint(b: IvBox) -> np.ndarray:
    return np.array([d.mid for d in b.dims])


def contains_point(b: IvBox, p: Iterable[float]) -> bool:
    p = list(p)
    if len(p) != b.dim:
        raise ValueError(f"point has {len(p)} coordinates, box has {b.dim}")
    return all(d.lo <= x <= d.hi for d, x in zip(b.dims, p))


def intersect(b1: IvBox, b2: IvBox):
    """Componentwise intersection, or ``None`` when the boxes are disjoint."""
    if b1.dim != b2.dim:
        raise ValueError("dimension mismatch")
    dims = tuple(a.intersect(c) for a, c in zip(b1.dims, b2.dims))
    if any(d.is_empty for d in dims):
        return None
    return IvBox(dims, b1.n_state, b1.m_ctrl)


def subset_of(b1: IvBox, b2: IvBox) -> bool:
    if b1.dim != b2.dim:
        raise ValueError("dimension mismatch")
    return all(c.contains(a) for a, c in zip(b1.dims, b2.dims))


def hull(b1: IvBox, b2: IvBox) -> IvBox:
    return IvBox(tuple(a.hull(c) for a, c in zip(b1.dims, b2.dims)), b1.n_state, b1.m_ctrl)


def bisect(b: IvBox) -> tuple[IvBox, IvBox]:
    """Split along the widest dimension (lowest index on ties) at its midpoint."""
    widths = [d.width for d in b.dims]
    w = max(widths, default=0.0)
    if not w > 0.0:
        raise DegenerateBoxError("cannot bisect a zero-width box")
    j = widths.index(w)
    d = b.dims[j]
    m = d.mid
    left = b.dims[:j] + (Interval(d.lo, m),) + b.dims[j + 1 :]
    right = b.dims[:j] + (Interval(m, d.hi),) + b.dims[j + 1 :]
    return IvBox(left, b.n_state, b.m_ctrl), IvBox(right, b.n_state, b.m_ctrl)
