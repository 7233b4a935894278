import math

import numpy as np
import pytest

from doakit.errors import ConfigError, DomainError
from doakit.expr import PlantModel, eval_points, eval_scalar, parse
from doakit.paving import Paving, audit_disjoint, measure, project, union
from doakit.sivia import SiviaTarget, delta_l, sivia

DISC = parse("x1^2 + x2^2", 2)


def square(a):
    return Paving(np.array([[-a, -a]]), np.array([[a, a]]), 2)


@pytest.fixture(scope="module")
def disc_results():
    return {eps: sivia([DISC], SiviaTarget.interval((0, 1)), square(2.0), eps) for eps in (0.04, 0.02, 0.01)}


def test_disc_area_bounds(disc_results):
    r = disc_results[0.01]
    inner = measure(r.inner)
    assert 3.10 <= inner <= math.pi
    assert inner + measure(r.boundary) >= math.pi


def test_halving_eps_never_shrinks_inner(disc_results):
    m = [measure(disc_results[e].inner) for e in (0.04, 0.02, 0.01)]
    assert m[0] <= m[1] <= m[2]


def test_partition_is_exact(disc_results):
    r = disc_results[0.01]
    total = measure(r.inner) + measure(r.outer) + measure(r.boundary)
    assert total == 16.0
    merged = union(r.inner, r.outer, r.boundary)
    assert measure(merged) == 16.0
    for part in (r.inner, r.outer, r.boundary):
        assert audit_disjoint(part)


def test_boundary_boxes_are_small(disc_results):
    b = disc_results[0.01].boundary
    assert np.all((b.hi - b.lo).max(axis=1) < 0.01)


def test_inner_boxes_are_sound(disc_results, rng):
    r = disc_results[0.01]
    for lo, hi in zip(r.inner.lo, r.inner.hi):
        pts = rng.uniform(lo, hi, size=(10, 2))
        vals = eval_points(DISC, pts)
        assert np.all((vals >= 0) & (vals <= 1))


def test_deterministic():
    a = sivia([DISC], SiviaTarget.interval((0, 1)), square(2.0), 0.05)
    b = sivia([DISC], SiviaTarget.interval((0, 1)), square(2.0), 0.05)
    assert a.inner == b.inner and a.outer == b.outer and a.boundary == b.boundary
    assert a.inner.lo.tobytes() == b.inner.lo.tobytes()
    assert a.stats == b.stats


def test_disjoint_target_gives_all_outer():
    init = square(2.0)
    r = sivia([DISC], SiviaTarget.interval((100, 200)), init, 0.01)
    assert r.inner.is_empty and r.boundary.is_empty
    assert r.outer == init


def test_paving_target():
    f = parse("2*x1", 1)
    target = Paving(np.array([[0.0]]), np.array([[1.0]]), 1)
    init = Paving(np.array([[-1.0]]), np.array([[1.0]]), 1)
    r = sivia([f], SiviaTarget.of_paving(target), init, 1e-3)
    assert r.inner.intervals() == [(0.0, 0.5)]


def test_bad_arguments():
    with pytest.raises(ConfigError):
        sivia([DISC], SiviaTarget.interval((0, 1)), square(1.0), 0.0)
    with pytest.raises(ConfigError):
        sivia([DISC], SiviaTarget.interval((0, 1), (0, 1)), square(1.0), 0.1)
    with pytest.raises(ConfigError):
        SiviaTarget()


def test_domain_error_carries_box():
    f = parse("sqrt(x1)", 1)
    init = Paving(np.array([[-3.0]]), np.array([[-1.0]]), 1)
    with pytest.raises(DomainError) as info:
        sivia([f], SiviaTarget.interval((0, 1)), init, 0.1)
    assert info.value.box is not None


def test_square_lyapunov_negdef_projection(spec_square):
    dl = delta_l(spec_square.plant, spec_square.lyapunov)
    init = Paving(spec_square.cons.lo[None], spec_square.cons.hi[None], 1, 1)
    r = sivia([dl], SiviaTarget.interval((-np.inf, -1e-15)), init, 0.01)
    got = project(r.inner).intervals()
    expected = [(-2, -0.02344), (0.02344, 0.1406), (1.07, 2)]
    assert len(got) == 3
    for (a, b), (c, d) in zip(got, expected):
        assert abs(a - c) <= 0.02 and abs(b - d) <= 0.02


def test_delta_l_values(plant):
    dl = delta_l(plant, parse("x1^2", 1))
    assert eval_scalar(dl, [0.0], [0.0]) == 0.0
    assert eval_scalar(dl, [-1.5], [0.0]) == pytest.approx((math.sin(3) + 0.3) ** 2 - 2.25, abs=1e-12)
    assert eval_scalar(dl, [-1.5], [0.0]) == pytest.approx(-2.0554, abs=1e-4)
    assert eval_scalar(dl, [0.05], [0.0]) == pytest.approx(0.009563, abs=1e-6)


def test_delta_l_on_linear_plant():
    p = PlantModel.from_strings(["x1 + u1"], 1, 1)
    assert eval_scalar(delta_l(p, parse("x1^2", 1)), [0.0], [0.0]) == 0.0


def test_delta_l_rejects_control_variables(plant):
    with pytest.raises(ConfigError):
        delta_l(plant, parse("x1^2 + u1", 1, 1))
