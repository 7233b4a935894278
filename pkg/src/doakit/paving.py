"""Pavings: finite collections of interior-disjoint boxes.

Boxes are stored as two ``(k, dim)`` endpoint arrays in canonical order
(lexicographic on ``lo1, hi1, lo2, hi2, ...``), so equality of pavings is
plain array equality.
"""

from __future__ import annotations

import json
import math
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from doakit.errors import InvalidProjection, OriginCoveredError
from doakit.interval import IvBox


def _canonical_order(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    if lo.shape[0] == 0:
        return np.arange(0)
    keys = []
    for j in range(lo.shape[1]):
        keys.append(lo[:, j])
        keys.append(hi[:, j])
    return np.lexsort(keys[::-1])


class Paving:
    """Immutable canonical list of boxes over ``n_state + m_ctrl`` dimensions."""

    def __init__(self, lo, hi, n_state: int, m_ctrl: int = 0):
        dim = n_state + m_ctrl
        lo = np.asarray(lo, dtype=np.float64).reshape(-1, dim)
        hi = np.asarray(hi, dtype=np.float64).reshape(-1, dim)
        if lo.shape != hi.shape:
            raise ValueError("lo and hi shapes differ")
        order = _canonical_order(lo, hi)
        self.lo = lo[order]
        self.hi = hi[order]
        self.lo.flags.writeable = False
        self.hi.flags.writeable = False
        self.n_state = n_state
        self.m_ctrl = m_ctrl

    @classmethod
    def empty(cls, n_state: int, m_ctrl: int = 0) -> Paving:
        d = n_state + m_ctrl
        return cls(np.zeros((0, d)), np.zeros((0, d)), n_state, m_ctrl)

    @classmethod
    def from_boxes(cls, boxes: Iterable[IvBox], n_state: int, m_ctrl: int = 0) -> Paving:
        boxes = list(boxes)
        d = n_state + m_ctrl
        if not boxes:
            return cls.empty(n_state, m_ctrl)
        lo = np.array([b.lo for b in boxes]).reshape(-1, d)
        hi = np.array([b.hi for b in boxes]).reshape(-1, d)
        return cls(lo, hi, n_state, m_ctrl)

    @property
    def dim(self) -> int:
        return self.n_state + self.m_ctrl

    @property
    def boxes(self) -> list[IvBox]:
        return [
            IvBox.from_bounds(l, h, n_state=self.n_state, m_ctrl=self.m_ctrl)
            for l, h in zip(self.lo.tolist(), self.hi.tolist())
        ]

    def __len__(self) -> int:
        return self.lo.shape[0]

    def __iter__(self):
        return iter(self.boxes)

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def measure(self) -> float:
        return measure(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Paving):
            return NotImplemented
        return equals(self, other)

    __hash__ = None

    @cached_property
    def components(self) -> tuple[np.ndarray, np.ndarray]:
        """Maximal disjoint pieces of the union (1-D: connected components)."""
        return _union(self.lo, self.hi)

    def state_lo_hi(self):
        return self.lo[:, : self.n_state], self.hi[:, : self.n_state]

    def intervals(self) -> list[tuple[float, float]]:
        """Connected components of a 1-D paving as ``(lo, hi)`` pairs."""
        if self.dim != 1:
            raise ValueError("intervals() is only defined for 1-D pavings")
        clo, chi = self.components
        return list(zip(clo[:, 0].tolist(), chi[:, 0].tolist()))

    def __repr__(self):
        return f"Paving(boxes={len(self)}, n_state={self.n_state}, m_ctrl={self.m_ctrl})"


# ---------------------------------------------------------------------------
# set algebra


def _union(lo: np.ndarray, hi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Canonical disjoint decomposition of a union of boxes (null sets dropped)."""
    keep = np.all(hi > lo, axis=1) if lo.shape[0] else np.zeros(0, dtype=bool)
    lo, hi = lo[keep], hi[keep]
    d = lo.shape[1]
    if lo.shape[0] == 0:
        return np.zeros((0, d)), np.zeros((0, d))
    if d == 1:
        order = np.argsort(lo[:, 0], kind="stable")
        a, b = lo[order, 0], hi[order, 0]
        reach = np.maximum.accumulate(b)
        starts = np.ones(a.shape[0], dtype=bool)
        starts[1:] = a[1:] > reach[:-1]
        first = np.flatnonzero(starts)
        last = np.append(first[1:] - 1, a.shape[0] - 1)
        return a[first][:, None], reach[last][:, None]

    # slab decomposition along the first axis; equal consecutive sections merge
    cuts = np.unique(np.concatenate([lo[:, 0], hi[:, 0]]))
    out_lo, out_hi = [], []
    run_start = None
    run_section = None

    def flush(end):
        if run_section is None:
            return
        slo, shi = run_section
        k = slo.shape[0]
        out_lo.append(np.column_stack([np.full(k, run_start), slo]))
        out_hi.append(np.column_stack([np.full(k, end), shi]))

    prev_b = None
    for a, b in zip(cuts[:-1], cuts[1:]):
        mask = (lo[:, 0] <= a) & (hi[:, 0] >= b)
        if mask.any():
            section = _union(lo[mask, 1:], hi[mask, 1:])
            if section[0].shape[0] == 0:
                section = None
        else:
            section = None
        same = (
            section is not None
            and run_section is not None
            and np.array_equal(section[0], run_section[0])
            and np.array_equal(section[1], run_section[1])
        )
        if not same:
            flush(prev_b)
            run_section = section
            run_start = a
        prev_b = b
    flush(prev_b)
    if not out_lo:
        return np.zeros((0, d)), np.zeros((0, d))
    rlo, rhi = np.vstack(out_lo), np.vstack(out_hi)
    order = _canonical_order(rlo, rhi)
    return rlo[order], rhi[order]


def normalize(boxes, n_state: int | None = None, m_ctrl: int = 0) -> Paving:
    """Disjoint canonical paving with the same union as ``boxes``.

    ``boxes`` may be a :class:`Paving`, a list of :class:`IvBox`, or a
    ``(lo, hi)`` pair of arrays. Zero-volume boxes are dropped.
    """
    if isinstance(boxes, Paving):
        lo, hi = boxes.lo, boxes.hi
        n_state, m_ctrl = boxes.n_state, boxes.m_ctrl
    elif isinstance(boxes, tuple) and len(boxes) == 2 and not isinstance(boxes[0], IvBox):
        lo, hi = boxes
    else:
        boxes = list(boxes)
        if not boxes:
            if n_state is None:
                raise ValueError("n_state is required for an empty box list")
            return Paving.empty(n_state, m_ctrl)
        lo = np.array([b.lo for b in boxes])
        hi = np.array([b.hi for b in boxes])
        if n_state is None:
            n_state, m_ctrl = boxes[0].n_state, boxes[0].m_ctrl
    if n_state is None:
        n_state = lo.shape[1] - m_ctrl
    lo = np.asarray(lo, dtype=np.float64).reshape(-1, n_state + m_ctrl)
    hi = np.asarray(hi, dtype=np.float64).reshape(-1, n_state + m_ctrl)
    ulo, uhi = _union(lo, hi)
    return Paving(ulo, uhi, n_state, m_ctrl)


def union(*pavings: Paving) -> Paving:
    first = pavings[0]
    lo = np.vstack([p.lo for p in pavings])
    hi = np.vstack([p.hi for p in pavings])
    return normalize((lo, hi), first.n_state, first.m_ctrl)


def project(p: Paving, strict: bool = True) -> Paving:
    """Shadow of ``p`` on the state space, normalized.

    A paving that already has no control dimensions raises
    :class:`InvalidProjection` unless ``strict`` is false, in which case it is
    returned normalized.
    """
    if p.m_ctrl == 0:
        if strict:
            raise InvalidProjection("paving has no control dimensions to project out")
        return normalize(p)
    n = p.n_state
    return normalize((p.lo[:, :n], p.hi[:, :n]), n, 0)


def measure(p: Paving) -> float:
    if p.is_empty:
        return 0.0
    return math.fsum(np.prod(p.hi - p.lo, axis=1).tolist())


def equals(p1: Paving, p2: Paving) -> bool:
    return (
        p1.n_state == p2.n_state
        and p1.m_ctrl == p2.m_ctrl
        and np.array_equal(p1.lo, p2.lo)
        and np.array_equal(p1.hi, p2.hi)
    )


def audit_disjoint(p: Paving) -> bool:
    """O(k^2) check that no two boxes share interior points."""
    for i in range(len(p) - 1):
        lo_i, hi_i = p.lo[i], p.hi[i]
        rest_lo, rest_hi = p.lo[i + 1 :], p.hi[i + 1 :]
        overlap = np.all((rest_lo < hi_i) & (rest_hi > lo_i), axis=1)
        if overlap.any():
            return False
    return True


def _as_arrays(b) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(b, IvBox):
        return b.lo, b.hi
    lo, hi = b
    return np.asarray(lo, dtype=np.float64), np.asarray(hi, dtype=np.float64)


def _touching(p: Paving, blo, bhi) -> np.ndarray:
    return np.all((p.lo <= bhi) & (p.hi >= blo), axis=1)


def covers_box(p: Paving, b) -> bool:
    """Whether box ``b`` lies inside the union of ``p`` (recursive subtraction)."""
    blo, bhi = _as_arrays(b)
    if blo.shape[0] != p.dim:
        raise ValueError("dimension mismatch")
    idx = np.flatnonzero(_touching(p, blo, bhi))
    if idx.size == 0:
        return False
    pieces = [(blo.copy(), bhi.copy())]
    for i in idx:
        qlo, qhi = p.lo[i], p.hi[i]
        remaining = []
        for plo, phi in pieces:
            if not np.all((plo <= qhi) & (phi >= qlo)):
                remaining.append((plo, phi))
                continue
            clo, chi = plo.copy(), phi.copy()
            for j in range(p.dim):
                if clo[j] < qlo[j]:
                    nlo, nhi = clo.copy(), chi.copy()
                    nhi[j] = qlo[j]
                    remaining.append((nlo, nhi))
                    clo[j] = qlo[j]
                if chi[j] > qhi[j]:
                    nlo, nhi = clo.copy(), chi.copy()
                    nlo[j] = qhi[j]
                    remaining.append((nlo, nhi))
                    chi[j] = qhi[j]
        pieces = remaining
        if not pieces:
            return True
    return not pieces


def intersects_box(p: Paving, b) -> bool:
    """Closed intersection test: shared faces count."""
    blo, bhi = _as_arrays(b)
    if blo.shape[0] != p.dim:
        raise ValueError("dimension mismatch")
    return bool(_touching(p, blo, bhi).any()) if len(p) else False


def covers_boxes(p: Paving, lo, hi) -> np.ndarray:
    """Vectorized :func:`covers_box` over rows of ``lo``/``hi``."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if len(p) == 0:
        return np.zeros(lo.shape[0], dtype=bool)
    if p.dim == 1:
        clo, chi = p.components
        if clo.shape[0] == 0:
            return np.zeros(lo.shape[0], dtype=bool)
        i = np.searchsorted(clo[:, 0], lo[:, 0], side="right") - 1
        ok = i >= 0
        j = np.where(ok, i, 0)
        return ok & (chi[j, 0] >= hi[:, 0])
    return np.array([covers_box(p, (l, h)) for l, h in zip(lo, hi)], dtype=bool)


def intersects_boxes(p: Paving, lo, hi) -> np.ndarray:
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if len(p) == 0:
        return np.zeros(lo.shape[0], dtype=bool)
    if p.dim == 1:
        order = np.argsort(p.lo[:, 0], kind="stable")
        a = p.lo[order, 0]
        reach = np.maximum.accumulate(p.hi[order, 0])
        i = np.searchsorted(a, hi[:, 0], side="right") - 1
        ok = i >= 0
        j = np.where(ok, i, 0)
        return ok & (reach[j] >= lo[:, 0])
    return np.array([intersects_box(p, (l, h)) for l, h in zip(lo, hi)], dtype=bool)


def contains_points(p: Paving, X) -> np.ndarray:
    """Closed membership of each row of ``X`` in the union of ``p``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if len(p) == 0:
        return np.zeros(X.shape[0], dtype=bool)
    inside = (X[:, None, :] >= p.lo[None, :, :]) & (X[:, None, :] <= p.hi[None, :, :])
    return np.all(inside, axis=2).any(axis=1)


def origin_gap(p: Paving, cons: IvBox) -> IvBox:
    """Largest box around the origin grown greedily, one axis direction at a time.

    Growth order is dim 1 negative, dim 1 positive, dim 2 negative, ...; each
    direction stops at the first paving box whose interior it would enter, or
    at the boundary of ``cons``.
    """
    n = p.dim
    clo, chi = cons.lo[:n], cons.hi[:n]
    if np.any(clo > 0) or np.any(chi < 0):
        raise ValueError("origin is outside the constraint box")
    zero = np.zeros(n)
    if len(p) and bool(np.all((p.lo <= zero) & (p.hi >= zero), axis=1).any()):
        raise OriginCoveredError("the origin is covered by the paving")
    blo, bhi = zero.copy(), zero.copy()
    for j in range(n):
        others = [i for i in range(n) if i != j]
        overlap = np.ones(len(p), dtype=bool)
        for i in others:
            if blo[i] < bhi[i]:
                overlap &= (p.lo[:, i] < bhi[i]) & (p.hi[:, i] > blo[i])
            else:
                overlap &= (p.lo[:, i] <= blo[i]) & (p.hi[:, i] >= blo[i])
        below = overlap & (p.hi[:, j] <= blo[j])
        blo[j] = max(clo[j], p.hi[below, j].max()) if below.any() else clo[j]
        above = overlap & (p.lo[:, j] >= bhi[j])
        bhi[j] = min(chi[j], p.lo[above, j].min()) if above.any() else chi[j]
    return IvBox.from_bounds(blo, bhi, n_state=n)


# ---------------------------------------------------------------------------
# JSON-lines file format


def save_jsonl(
    path,
    paving: Paving,
    boundary: Paving | None = None,
    epsilon: float | None = None,
    alpha: float | None = None,
) -> None:
    """Write a header line then one box per line labelled inner or boundary."""
    header = {
        "dim": paving.dim,
        "n_state": paving.n_state,
        "m_ctrl": paving.m_ctrl,
        "epsilon": epsilon,
        "alpha": alpha,
    }
    lines = [json.dumps(header)]
    for label, pv in (("inner", paving), ("boundary", boundary)):
        if pv is None:
            continue
        for lo, hi in zip(pv.lo.tolist(), pv.hi.tolist()):
            lines.append(json.dumps({"lo": lo, "hi": hi, "label": label}))
    Path(path).write_text("\n".join(lines) + "\n")


def load_jsonl(path, label: str = "inner") -> Paving:
    with open(path) as fh:
        header = json.loads(fh.readline())
        n, m = int(header["n_state"]), int(header["m_ctrl"])
        lo, hi = [], []
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec.get("label", "inner") != label:
                continue
            lo.append(rec["lo"])
            hi.append(rec["hi"])
    if not lo:
        return Paving.empty(n, m)
    return Paving(np.array(lo), np.array(hi), n, m)


def read_header(path) -> dict:
    with open(path) as fh:
        return json.loads(fh.readline())
