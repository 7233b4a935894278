"""Domain-of-attraction estimation from a Lyapunov candidate.

The pipeline computes an inner approximation of the state-control set on
which the Lyapunov difference is negative definite, shrinks it to an
invariant subset by repeated set inversion, projects it onto the state space
and closes the hole around the origin with a box on which a linear controller
takes over. A classical level-set estimate is provided for comparison.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from doakit.errors import ConfigError, OriginCoveredError
from doakit.expr import Node, PlantModel, eval_interval_batch, eval_points
from doakit.interval import IvBox
from doakit.paving import (
    Paving,
    covers_boxes,
    measure,
    normalize,
    origin_gap,
    project,
    union,
)
from doakit.sivia import SiviaResult, SiviaTarget, delta_l, sivia


@dataclass(frozen=True)
class NegDefSpec:
    """Everything needed to run the pipeline for one Lyapunov candidate."""

    plant: PlantModel
    lyapunov: Node
    cons: IvBox
    alpha: float
    eps: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ConfigError(f"alpha must be positive and finite, got {self.alpha!r}")
        if not (self.eps > 0 and math.isfinite(self.eps)):
            raise ConfigError(f"eps must be positive and finite, got {self.eps!r}")
        if not (np.all(np.isfinite(self.cons.lo)) and np.all(np.isfinite(self.cons.hi))):
            raise ConfigError("the constraint box must have finite bounds")
        if self.cons.n_state != self.plant.n or self.cons.m_ctrl != self.plant.m:
            raise ConfigError(
                f"constraint box has shape ({self.cons.n_state}, {self.cons.m_ctrl}), "
                f"plant has ({self.plant.n}, {self.plant.m})"
            )

    @property
    def state_cons(self) -> IvBox:
        return IvBox.from_bounds(self.cons.lo[: self.plant.n], self.cons.hi[: self.plant.n])

    def with_lyapunov(self, lyapunov: Node) -> NegDefSpec:
        return NegDefSpec(self.plant, lyapunov, self.cons, self.alpha, self.eps)


@dataclass
class DoaEstimate:
    ndef: Paving
    ni_set: Paving
    proj: Paving
    x0: IvBox | None
    doa_region: Paving
    volume: float
    iterations: int
    degenerate: bool = False
    timings: dict = field(default_factory=dict)
    box_counts: dict = field(default_factory=dict)


def _box_paving(box: IvBox) -> Paving:
    return Paving(box.lo[None, :], box.hi[None, :], box.n_state, box.m_ctrl)


def negdef_result(spec: NegDefSpec) -> SiviaResult:
    """Set inversion of ``L(f(x, u)) - L(x) <= -alpha`` over the constraint box."""
    dl = delta_l(spec.plant, spec.lyapunov)
    target = SiviaTarget.interval((-np.inf, -spec.alpha))
    return sivia([dl], target, _box_paving(spec.cons), spec.eps)


def negdef_set(spec: NegDefSpec) -> Paving:
    """Inner approximation of ``{(x, u) in cons : L(f(x, u)) - L(x) <= -alpha}``."""
    return negdef_result(spec).inner


def refinement_target(proj: Paving, cons: IvBox | None) -> Paving:
    """State-space set that successors must reach: ``proj``, plus the origin box if known."""
    if cons is None or proj.is_empty:
        return proj
    try:
        gap = origin_gap(proj, cons)
    except OriginCoveredError:
        return proj
    return union(proj, _box_paving(gap))


def invariant_refine(
    plant: PlantModel,
    w0: Paving,
    eps: float,
    cons: IvBox | None = None,
    history: list | None = None,
) -> tuple[Paving, int]:
    """Shrink ``w0`` until every box maps into the target built from its own projection.

    Each pass keeps the boxes ``w`` (bisected down to ``eps`` where needed)
    whose image ``[f](w)`` lies inside the target; it stops once a pass
    changes nothing. With ``cons`` given, the target also contains the box
    around the origin that the linear controller handles, so successors may
    leave the projection toward the origin. The measure of each iterate is
    appended to ``history`` when a list is passed.
    """
    current = w0
    iterations = 0
    while True:
        iterations += 1
        if history is not None:
            history.append(measure(current))
        if current.is_empty:
            return current, iterations
        target = refinement_target(project(current, strict=False), cons)
        nxt = sivia(plant.dynamics, SiviaTarget.of_paving(target), current, eps).inner
        if nxt == current:
            return current, iterations
        current = nxt


def negdef_violations(spec: NegDefSpec, ni_set: Paving) -> int:
    """Number of boxes whose enclosure of the Lyapunov difference exceeds ``-alpha``."""
    if ni_set.is_empty:
        return 0
    dl = delta_l(spec.plant, spec.lyapunov)
    _, hi = eval_interval_batch(dl, ni_set.lo, ni_set.hi, spec.plant.n)
    return int(np.count_nonzero(hi > -spec.alpha))


def invariance_violations(plant: PlantModel, ni_set: Paving, target: Paving) -> int:
    """Number of boxes whose image enclosure is not covered by ``target``."""
    if ni_set.is_empty:
        return 0
    outs = [eval_interval_batch(f, ni_set.lo, ni_set.hi, plant.n) for f in plant.dynamics]
    lo = np.column_stack([o[0] for o in outs])
    hi = np.column_stack([o[1] for o in outs])
    return int(np.count_nonzero(~covers_boxes(target, lo, hi)))


def doa_pipeline(spec: NegDefSpec) -> DoaEstimate:
    """Negative-definite set, invariant refinement, projection and origin box."""
    timings = {}
    t0 = time.perf_counter()
    ndef = negdef_set(spec)
    t1 = time.perf_counter()
    ni_set, iterations = invariant_refine(spec.plant, ndef, spec.eps, cons=spec.cons)
    t2 = time.perf_counter()
    proj = project(ni_set, strict=False)
    timings.update(negdef_s=t1 - t0, refine_s=t2 - t1)
    counts = {"ndef": len(ndef), "ni_set": len(ni_set), "proj": len(proj)}

    if proj.is_empty:
        empty = Paving.empty(spec.plant.n)
        timings["total_s"] = time.perf_counter() - t0
        return DoaEstimate(
            ndef, ni_set, proj, None, empty, 0.0, iterations, True, timings, counts
        )
    try:
        x0 = origin_gap(proj, spec.cons)
        region = union(proj, _box_paving(x0))
    except OriginCoveredError:
        x0 = None
        region = proj
    timings["total_s"] = time.perf_counter() - t0
    return DoaEstimate(
        ndef, ni_set, proj, x0, region, measure(region), iterations, False, timings, counts
    )


# ---------------------------------------------------------------------------
# level-set baseline


def _face_boxes(cons: IvBox) -> list[tuple[np.ndarray, np.ndarray]]:
    faces = []
    for axis in range(len(cons.dims)):
        for end in (cons.lo[axis], cons.hi[axis]):
            lo, hi = cons.lo.copy(), cons.hi.copy()
            lo[axis] = hi[axis] = end
            faces.append((lo, hi))
    return faces


def boundary_minimum(L: Node, cons: IvBox, tol: float = 1e-3, max_rounds: int = 60) -> float:
    """Guaranteed lower bound of ``min L`` over the boundary of ``cons``.

    Branch and bound over the faces: boxes whose enclosure cannot beat the best
    sampled value are pruned, the rest are bisected until the bound gap is
    within ``tol`` (relative) or no box can be split further.
    """
    n = len(cons.dims)
    lo = np.array([f[0] for f in _face_boxes(cons)])
    hi = np.array([f[1] for f in _face_boxes(cons)])
    best = math.inf
    bound = -math.inf
    for _ in range(max_rounds):
        elo, _ = eval_interval_batch(L, lo, hi, n)
        mid = 0.5 * lo + 0.5 * hi
        best = min(best, float(np.min(eval_points(L, mid))))
        keep = elo <= best
        lo, hi, elo = lo[keep], hi[keep], elo[keep]
        bound = float(np.min(elo))
        widths = hi - lo
        if best - bound <= tol * max(1.0, abs(best)) or not np.any(widths > 0):
            break
        axis = np.argmax(widths, axis=1)
        rows = np.arange(lo.shape[0])
        cut = 0.5 * lo[rows, axis] + 0.5 * hi[rows, axis]
        left_hi, right_lo = hi.copy(), lo.copy()
        left_hi[rows, axis] = cut
        right_lo[rows, axis] = cut
        lo, hi = np.vstack([lo, right_lo]), np.vstack([left_hi, hi])
    return bound


def levelset_baseline(
    L: Node, region: Paving, cons: IvBox, eps: float, rel_tol: float = 1e-4
) -> tuple[float, Paving]:
    """Largest level ``c`` whose inner sublevel paving stays inside ``region``.

    The sublevel set ``{x in cons : L(x) <= c}`` is inverted with ``eps``;
    ``c`` is found by bisection to relative tolerance ``rel_tol`` and is
    capped at a lower bound of ``L`` on the boundary of ``cons`` so that the
    level set never reaches past the constraint box.
    """
    if region.is_empty:
        raise ConfigError("region must be non-empty")
    n = region.n_state
    state = IvBox.from_bounds(cons.lo[:n], cons.hi[:n])
    init = _box_paving(state)

    def sublevel(c):
        return sivia([L], SiviaTarget.interval((-np.inf, c)), init, eps).inner

    def admissible(inner):
        return inner.is_empty or bool(covers_boxes(region, inner.lo, inner.hi).all())

    cap = boundary_minimum(L, state)
    best = sublevel(cap)
    if admissible(best):
        return cap, best
    lo_c, hi_c = 0.0, cap
    best = sublevel(lo_c)
    while hi_c - lo_c > rel_tol * max(abs(hi_c), 1e-300):
        c = 0.5 * (lo_c + hi_c)
        inner = sublevel(c)
        if admissible(inner):
            lo_c, best = c, inner
        else:
            hi_c = c
    return lo_c, best
