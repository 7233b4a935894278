import itertools
import math

import numpy as np
import pytest

from doakit.doa import negdef_set
from doakit.errors import ConfigError
from doakit.expr import Binary, Const, eval_points, eval_scalar
from doakit.lyapunov import (
    PENALTY,
    PsoConfig,
    SosLyapunov,
    monomial_count,
    monomial_exponents,
    monomial_vector,
    objective,
    polynomial_coefficients,
    pso_maximize,
    pso_optimize,
    sos_to_expr,
)

OPT_GRAM = np.array([[2.4468, 1.7093], [1.7093, 1.4524]])


def test_monomial_examples():
    assert np.array_equal(monomial_vector([2.0], 1, 2), [2.0, 4.0])
    assert np.array_equal(monomial_vector([3.0, 5.0], 2, 1), [3.0, 5.0])
    assert monomial_count(2, 2) == 5
    assert monomial_exponents(2, 2) == [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]


@pytest.mark.parametrize("n,d", list(itertools.product(range(1, 4), range(1, 4))))
def test_count_matches_enumeration(n, d):
    brute = [e for e in itertools.product(range(d + 1), repeat=n) if 1 <= sum(e) <= d]
    exps = monomial_exponents(n, d)
    assert len(exps) == len(brute) == monomial_count(n, d) == math.comb(n + d, d) - 1
    assert set(exps) == set(brute)
    assert [sum(e) for e in exps] == sorted(sum(e) for e in exps)


def test_identity_gives_square_plus_quartic():
    L = sos_to_expr(SosLyapunov(1, 2, np.eye(2)))
    for x in (-1.5, 0.3, 2.0):
        assert eval_scalar(L, [x]) == pytest.approx(x**2 + x**4)


def test_expanded_polynomial_from_gram():
    P = np.linalg.cholesky(OPT_GRAM).T
    lyap = SosLyapunov(1, 2, P)
    np.testing.assert_allclose(lyap.gram, OPT_GRAM, atol=1e-12)
    coeffs = polynomial_coefficients(lyap)
    assert coeffs[(2,)] == pytest.approx(2.4468)
    assert coeffs[(3,)] == pytest.approx(3.4186)
    assert coeffs[(4,)] == pytest.approx(1.4524)
    assert eval_scalar(sos_to_expr(lyap), [1.0]) == pytest.approx(7.3178)


def test_rank_guard():
    with pytest.raises(ConfigError):
        sos_to_expr(SosLyapunov(1, 2, np.zeros((2, 2))))
    with pytest.raises(ConfigError):
        SosLyapunov(1, 2, np.eye(3))


def test_positive_away_from_origin(rng):
    checked = 0
    while checked < 1000:
        P = rng.uniform(-3, 3, (2, 2))
        lyap = SosLyapunov(1, 2, P)
        if not lyap.full_rank():
            continue
        x = rng.uniform(-2, 2)
        if x == 0:
            continue
        L = sos_to_expr(lyap)
        assert eval_scalar(L, [x]) > 0
        assert lyap([x]) > 0
        checked += 1


def test_positive_two_state(rng):
    for _ in range(100):
        lyap = SosLyapunov(2, 2, rng.uniform(-3, 3, (5, 5)))
        if not lyap.full_rank():
            continue
        X = rng.uniform(-2, 2, (20, 2))
        vals = eval_points(sos_to_expr(lyap), X)
        assert np.all(vals > 0)
        np.testing.assert_allclose(vals, [lyap(x) for x in X], rtol=1e-9)


def test_objective_penalty_and_square_baseline(spec_square):
    assert objective(np.zeros((2, 2)), spec_square, 2) == PENALTY
    assert objective(np.diag([1.0, 1e-3]), spec_square, 2) == pytest.approx(3.02, abs=0.02)


def test_scale_covariance(spec_square, spec_quartic):
    for spec in (spec_square, spec_quartic):
        scaled = type(spec)(spec.plant, Binary("*", Const(2.0), spec.lyapunov), spec.cons, 2 * spec.alpha, spec.eps)
        assert negdef_set(scaled) == negdef_set(spec)


def test_pso_without_iterations_returns_initial_best():
    fn = lambda z: -float(np.sum(z**2))
    cfg = PsoConfig(swarm=7, iterations=0, seed=4)
    res = pso_maximize(fn, 3, cfg)
    start = np.random.default_rng(4).uniform(-3, 3, size=(7, 3))
    best = max(fn(p) for p in start)
    assert res.best_value == best and res.history == [best]


def test_pso_history_monotone_and_deterministic():
    fn = lambda z: -float(np.sum((z - 1.0) ** 2))
    for seed in range(5):
        cfg = PsoConfig(swarm=10, iterations=25, seed=seed)
        a, b = pso_maximize(fn, 4, cfg), pso_maximize(fn, 4, cfg)
        assert all(y >= x for x, y in zip(a.history, a.history[1:]))
        assert a.history == b.history
        assert np.array_equal(a.best_position, b.best_position)
    assert a.best_value > -0.05


def test_pso_respects_bounds():
    seen = []
    def fn(z):
        seen.append(z.copy())
        return float(z.sum())
    pso_maximize(fn, 2, PsoConfig(swarm=5, iterations=10, bounds=(-1.0, 0.5), seed=1))
    seen = np.array(seen)
    assert seen.min() >= -1.0 and seen.max() <= 0.5


def test_small_search_on_plant(spec_square):
    cfg = PsoConfig(swarm=3, iterations=1, seed=0)
    P, res = pso_optimize(cfg, spec_square, 2)
    assert P.shape == (2, 2)
    assert res.best_value == objective(P, spec_square, 2)
    assert len(res.history) == 2


def test_config_validation():
    with pytest.raises(ConfigError):
        PsoConfig(swarm=0)
    with pytest.raises(ConfigError):
        PsoConfig(bounds=(1.0, 1.0))
