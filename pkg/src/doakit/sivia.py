"""Set inversion via interval analysis.

Classifies boxes of an initial paving as inside, outside or on the boundary of
``{z : p(z) in Y}``. The work list is processed one generation at a time with
vectorized inclusion functions; since each box is classified independently,
the canonically ordered inner/outer/boundary pavings are identical to those
of a depth-first (LIFO) traversal.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from doakit.errors import ConfigError
from doakit.expr import Binary, Node, PlantModel, eval_interval_batch, substitute, variables
from doakit.interval import Interval
from doakit.paving import Paving, covers_boxes, intersects_boxes


@dataclass(frozen=True)
class SiviaTarget:
    """Either one interval per output component or a paving in output space."""

    intervals: tuple | None = None
    paving: Paving | None = None

    def __post_init__(self):
        if (self.intervals is None) == (self.paving is None):
            raise ConfigError("exactly one of intervals or paving must be given")
        if self.intervals is not None:
            ivs = tuple(i if isinstance(i, Interval) else Interval(*i) for i in self.intervals)
            object.__setattr__(self, "intervals", ivs)

    @classmethod
    def interval(cls, *ivs) -> SiviaTarget:
        return cls(intervals=tuple(ivs))

    @classmethod
    def of_paving(cls, p: Paving) -> SiviaTarget:
        return cls(paving=p)

    @property
    def arity(self) -> int:
        return len(self.intervals) if self.intervals is not None else self.paving.dim


@dataclass
class SiviaStats:
    boxes_processed: int = 0
    max_depth: int = 0


@dataclass
class SiviaResult:
    inner: Paving
    outer: Paving
    boundary: Paving
    stats: SiviaStats = field(default_factory=SiviaStats)


def _classify(outs, target: SiviaTarget):
    if target.intervals is not None:
        inner = np.ones(outs[0][0].shape[0], dtype=bool)
        outer = np.zeros_like(inner)
        for (lo, hi), y in zip(outs, target.intervals):
            inner &= (lo >= y.lo) & (hi <= y.hi)
            outer |= (hi < y.lo) | (lo > y.hi)
        return inner, outer
    lo = np.column_stack([o[0] for o in outs])
    hi = np.column_stack([o[1] for o in outs])
    inner = covers_boxes(target.paving, lo, hi)
    outer = ~intersects_boxes(target.paving, lo, hi)
    return inner, outer


def sivia(
    p: Sequence[Node],
    target: SiviaTarget,
    init: Paving,
    eps: float,
    strict: bool = True,
) -> SiviaResult:
    """Inner, outer and boundary pavings of ``p^{-1}(target)`` within ``init``.

    Undetermined boxes narrower than ``eps`` go to the boundary; all others
    are bisected along their widest dimension.
    """
    if not eps > 0:
        raise ConfigError(f"eps must be positive, got {eps!r}")
    p = list(p)
    if len(p) != target.arity:
        raise ConfigError(f"function has {len(p)} outputs but target has arity {target.arity}")
    n, m = init.n_state, init.m_ctrl
    d = init.dim
    acc = {"inner": ([], []), "outer": ([], []), "boundary": ([], [])}
    stats = SiviaStats()

    lo = np.array(init.lo)
    hi = np.array(init.hi)
    depth = np.zeros(lo.shape[0], dtype=np.int64)
    while lo.shape[0]:
        stats.boxes_processed += lo.shape[0]
        stats.max_depth = max(stats.max_depth, int(depth.max()))
        outs = [eval_interval_batch(f, lo, hi, n, strict) for f in p]
        inner, outer = _classify(outs, target)
        widths = hi - lo
        small = widths.max(axis=1) < eps
        undetermined = ~inner & ~outer
        for name, mask in (
            ("inner", inner),
            ("outer", outer & ~inner),
            ("boundary", undetermined & small),
        ):
            if mask.any():
                acc[name][0].append(lo[mask])
                acc[name][1].append(hi[mask])
        split = undetermined & ~small
        if not split.any():
            break
        slo, shi, sdepth = lo[split], hi[split], depth[split]
        axis = np.argmax(shi - slo, axis=1)  # first maximum: lowest index wins ties
        rows = np.arange(slo.shape[0])
        mid = 0.5 * slo[rows, axis] + 0.5 * shi[rows, axis]
        left_hi = shi.copy()
        left_hi[rows, axis] = mid
        right_lo = slo.copy()
        right_lo[rows, axis] = mid
        lo = np.vstack([slo, right_lo])
        hi = np.vstack([left_hi, shi])
        depth = np.concatenate([sdepth, sdepth]) + 1

    def build(name):
        los, his = acc[name]
        if not los:
            return Paving.empty(n, m)
        return Paving(np.vstack(los), np.vstack(his), n, m)

    return SiviaResult(build("inner"), build("outer"), build("boundary"), stats)


def delta_l(plant: PlantModel, L: Node) -> Node:
    """Lyapunov difference ``L(f(x, u)) - L(x)`` as one expression over ``(x; u)``."""
    refs = variables(L)
    if any(kind == "u" for kind, _ in refs):
        raise ConfigError("Lyapunov candidate must depend on state variables only")
    if any(idx > plant.n for _, idx in refs):
        raise ConfigError("Lyapunov candidate references a state index beyond n")
    mapping = {("x", i + 1): f for i, f in enumerate(plant.dynamics)}
    return Binary("-", substitute(L, mapping), L)
