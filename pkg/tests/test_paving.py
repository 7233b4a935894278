import itertools
import json
from fractions import Fraction

import numpy as np
import pytest

from doakit.errors import InvalidProjection, OriginCoveredError
from doakit.interval import IvBox
from doakit.paving import (
    Paving,
    audit_disjoint,
    contains_points,
    covers_box,
    covers_boxes,
    intersects_box,
    intersects_boxes,
    load_jsonl,
    measure,
    normalize,
    origin_gap,
    project,
    read_header,
    save_jsonl,
    union,
)


def pv(boxes, n_state=None, m_ctrl=0):
    lo = np.array([b[0] for b in boxes], dtype=float)
    hi = np.array([b[1] for b in boxes], dtype=float)
    if n_state is None:
        n_state = lo.shape[1] - m_ctrl
    return Paving(lo, hi, n_state, m_ctrl)


def grid_volume(lo, hi):
    """Volume of a union of boxes by coordinate compression, in exact arithmetic."""
    d = lo.shape[1]
    cuts = [sorted(set(lo[:, j].tolist()) | set(hi[:, j].tolist())) for j in range(d)]
    total = Fraction(0)
    for cell in itertools.product(*(range(len(c) - 1) for c in cuts)):
        a = [cuts[j][k] for j, k in enumerate(cell)]
        b = [cuts[j][k + 1] for j, k in enumerate(cell)]
        mid = [(x + y) / 2 for x, y in zip(a, b)]
        if np.any(np.all((lo <= mid) & (hi >= mid), axis=1)):
            vol = Fraction(1)
            for x, y in zip(a, b):
                vol *= Fraction(y) - Fraction(x)
            total += vol
    return total


def test_project_merges_overlapping_shadows():
    p = pv([([0, 0], [1, 1]), ([0.5, 3], [2, 4])], n_state=1, m_ctrl=1)
    assert project(p).intervals() == [(0.0, 2.0)]


def test_project_of_empty_and_state_only():
    assert project(Paving.empty(1, 1)).is_empty
    with pytest.raises(InvalidProjection):
        project(Paving.empty(1))
    q = pv([([0], [1])])
    assert project(q, strict=False) == q


def test_project_idempotent(rng):
    lo = rng.integers(-8, 8, size=(20, 2)) / 4
    p = normalize((lo, lo + rng.integers(1, 4, size=(20, 2)) / 4), 1, 1)
    once = project(p)
    assert project(once, strict=False) == once
    assert audit_disjoint(once)


def test_measure_examples():
    assert measure(pv([([0, 0], [1, 1])])) == 1.0
    three = pv([([-2], [-0.02344]), ([0.02344], [0.1406]), ([1.07], [2])])
    assert measure(three) == pytest.approx(1.97656 + 0.11716 + 0.93, abs=1e-12)
    assert measure(three) == pytest.approx(3.024, abs=1e-3)


def test_normalize_examples():
    p = normalize(([[0.0], [1.0]], [[2.0], [3.0]]), 1)
    assert p.intervals() == [(0.0, 3.0)] and measure(p) == 3.0
    nested = normalize((np.array([[0.0], [1.0]]), np.array([[4.0], [2.0]])), 1)
    assert measure(nested) == 4.0
    disjoint = pv([([2], [3]), ([0], [1])])
    assert normalize(disjoint) == disjoint
    assert disjoint.lo[0, 0] == 0.0


@pytest.mark.parametrize("seed", range(100))
def test_measure_matches_compression_oracle(seed):
    rng = np.random.default_rng(seed)
    d = 1 + seed % 3
    k = int(rng.integers(2, 7))
    lo = rng.integers(-8, 8, size=(k, d)) / 8
    hi = lo + rng.integers(1, 9, size=(k, d)) / 8
    p = normalize((lo, hi), d)
    assert audit_disjoint(p)
    assert Fraction(measure(p)) == grid_volume(lo, hi)


def test_union_is_normalized():
    u = union(pv([([0], [1])]), pv([([0.5], [2])]))
    assert u.intervals() == [(0.0, 2.0)]


def test_covers_box_examples():
    seam = pv([([0], [1]), ([1], [2])])
    assert covers_box(seam, IvBox.from_bounds([0.5], [1.5]))
    assert not covers_box(pv([([0], [1])]), IvBox.from_bounds([0.5], [1.5]))
    assert covers_boxes(seam, [[0.5]], [[1.5]])[0]


def test_covers_box_2d_seam():
    p = pv([([0, 0], [1, 2]), ([1, 0], [2, 1]), ([1, 1], [2, 2])])
    assert covers_box(p, IvBox.from_bounds([0.5, 0.5], [1.5, 1.5]))
    assert not covers_box(p, IvBox.from_bounds([0.5, 0.5], [2.5, 1.5]))


@pytest.mark.parametrize("seed", range(20))
def test_covers_box_against_sampling(seed):
    rng = np.random.default_rng(seed)
    d = 1 + seed % 2
    lo = rng.uniform(0, 1, size=(6, d))
    p = normalize((lo, lo + rng.uniform(0.05, 0.6, size=(6, d))), d)
    blo = rng.uniform(0, 1, d)
    bhi = blo + rng.uniform(0.01, 0.3, d)
    pts = rng.uniform(blo, bhi, size=(10_000, d))
    all_in = bool(contains_points(p, pts).all())
    covered = covers_box(p, (blo, bhi))
    if covered:
        assert all_in
    if not all_in:
        assert not covered
    if covered:
        assert intersects_box(p, (blo, bhi))


def test_intersects_examples():
    one = pv([([0], [1])])
    assert intersects_box(one, IvBox.from_bounds([1], [2]))
    assert not intersects_box(one, IvBox.from_bounds([2], [3]))
    sq = pv([([0, 0], [1, 1])])
    assert intersects_box(sq, IvBox.from_bounds([0.5, 0.5], [2, 2]))
    assert list(intersects_boxes(one, [[1.0], [2.0]], [[2.0], [3.0]])) == [True, False]


def test_vectorized_queries_agree_with_scalar(rng):
    lo = rng.uniform(-1, 1, size=(10, 1))
    p = normalize((lo, lo + 0.2), 1)
    blo = rng.uniform(-1.2, 1.2, size=(200, 1))
    bhi = blo + rng.uniform(0, 0.3, size=(200, 1))
    cov = covers_boxes(p, blo, bhi)
    hit = intersects_boxes(p, blo, bhi)
    for i in range(200):
        assert cov[i] == covers_box(p, (blo[i], bhi[i]))
        assert hit[i] == intersects_box(p, (blo[i], bhi[i]))


def test_origin_gap_examples():
    cons = IvBox.from_bounds([-1], [1])
    assert origin_gap(Paving.empty(1), cons) == cons
    p = pv([([-2], [-0.25]), ([0.125], [2])])
    gap = origin_gap(p, IvBox.from_bounds([-2], [2]))
    assert (gap.lo[0], gap.hi[0]) == (-0.25, 0.125)
    with pytest.raises(OriginCoveredError):
        origin_gap(pv([([-1], [1])]), cons)


def test_jsonl_round_trip(tmp_path):
    p = pv([([0, 0], [0.5, 1]), ([1, 1], [2, 2])], n_state=1, m_ctrl=1)
    b = pv([([0.5, 0], [0.75, 0.25])], n_state=1, m_ctrl=1)
    path = tmp_path / "p.jsonl"
    save_jsonl(path, p, boundary=b, epsilon=0.01, alpha=1e-15)
    assert read_header(path) == {"dim": 2, "n_state": 1, "m_ctrl": 1, "epsilon": 0.01, "alpha": 1e-15}
    assert load_jsonl(path) == p
    assert load_jsonl(path, "boundary") == b
    rows = [json.loads(line) for line in path.read_text().splitlines()[1:]]
    assert {r["label"] for r in rows} == {"inner", "boundary"}


def test_paving_is_immutable():
    p = pv([([0], [1])])
    with pytest.raises(ValueError):
        p.lo[0, 0] = 5.0
