import math

import numpy as np
import pytest

from doakit.errors import ConfigError, DomainError, ParseError
from doakit.expr import (
    Binary,
    Const,
    PlantModel,
    Var,
    eval_interval,
    eval_points,
    eval_scalar,
    gradient,
    jacobian_at,
    parse,
)
from doakit.interval import Interval, IvBox


def test_parse_and_evaluate_mixed_variables():
    ast = parse("x1 + u1^2", 1, 1)
    assert eval_scalar(ast, [1.0], [2.0]) == 5.0


def test_non_integer_exponent_rejected():
    with pytest.raises(ParseError):
        parse("x1 ^ u1", 1, 1)


def test_parse_error_reports_position():
    with pytest.raises(ParseError) as info:
        parse("x1 + * 2", 1)
    assert info.value.position is not None


def test_unknown_variable_rejected():
    with pytest.raises(ParseError):
        parse("x3", 2)


def test_precedence_and_unary_minus():
    ast = parse("-x1^2 + 2*3", 1)
    assert eval_scalar(ast, [3.0]) == -3.0
    assert eval_scalar(parse("2^3^1", 1), [0.0]) == 8.0


def test_plant_value(plant):
    val = plant.step([1.0], [0.5])[0]
    expected = -math.sin(2) - 0.5 - 0.2 - 0.25 + 0.5
    assert val == pytest.approx(expected, abs=1e-12)
    assert val == pytest.approx(-1.35930, abs=1e-5)


def test_plant_rejects_nonzero_equilibrium():
    with pytest.raises(ConfigError):
        PlantModel.from_strings(["x1 + 1"], 1, 0)


def test_interval_of_identity_is_exact():
    box = IvBox.from_bounds([0.0], [1.0])
    assert eval_interval(parse("x1", 1), box) == Interval(0.0, 1.0)


def test_natural_form_dependency():
    box = IvBox.from_bounds([0.0, -1.0], [1.0, 1.0], n_state=1, m_ctrl=1)
    assert eval_interval(parse("x1 + u1", 1, 1), box) == Interval(-1.0, 2.0)
    r = eval_interval(parse("x1 - x1", 1), IvBox.from_bounds([0.0], [1.0]))
    assert r == Interval(-1.0, 1.0)


def test_sin_enclosure():
    r = eval_interval(parse("sin(x1)", 1), IvBox.from_bounds([0.0], [math.pi]))
    assert r.hi == 1.0 and -1e-15 < r.lo <= 0.0


def test_strict_domain_error_and_lenient_widening():
    ast = parse("sqrt(x1)", 1)
    box = IvBox.from_bounds([-2.0], [-1.0])
    with pytest.raises(DomainError) as info:
        eval_interval(ast, box)
    assert info.value.box is not None
    r = eval_interval(ast, box, strict=False)
    assert r.lo == -math.inf and r.hi == math.inf


def test_eval_points_rejects_undefined():
    with pytest.raises(DomainError):
        eval_points(parse("sqrt(x1)", 1), [[-1.0]])


def test_jacobian_at_origin(plant):
    A, B = jacobian_at(plant, [0.0], [0.0])
    assert A[0, 0] == pytest.approx(-2.2)
    assert B[0, 0] == pytest.approx(1.0)


def test_gradient_matches_finite_differences(plant, rng):
    f = plant.dynamics[0]
    h = 1e-6
    for x, u in rng.uniform(-2, 2, size=(100, 2)):
        g = gradient(f, [x], [u])
        fd_x = (eval_scalar(f, [x + h], [u]) - eval_scalar(f, [x - h], [u])) / (2 * h)
        fd_u = (eval_scalar(f, [x], [u + h]) - eval_scalar(f, [x], [u - h])) / (2 * h)
        assert g[0] == pytest.approx(fd_x, abs=1e-6)
        assert g[1] == pytest.approx(fd_u, abs=1e-6)


def test_enclosure_contains_sampled_values(plant, rng):
    f = plant.dynamics[0]
    for _ in range(50):
        c = rng.uniform(-2, 2, 2)
        w = rng.uniform(0, 0.5, 2)
        box = IvBox.from_bounds(c - w, c + w, n_state=1, m_ctrl=1)
        r = eval_interval(f, box)
        pts = rng.uniform(c - w, c + w, size=(200, 2))
        vals = eval_points(f, pts[:, :1], pts[:, 1:])
        assert np.all(vals >= r.lo) and np.all(vals <= r.hi)


def test_inexact_literal_is_enclosed():
    ast = parse("0.1", 1)
    r = eval_interval(ast, IvBox.from_bounds([0.0], [0.0]))
    assert r.lo <= 0.1 <= r.hi


def test_ast_construction_by_hand():
    ast = Binary("*", Const(2.0), Var("x", 1))
    assert eval_scalar(ast, [3.0]) == 6.0
