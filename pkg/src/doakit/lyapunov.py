"""Sum-of-squares Lyapunov candidates and a particle swarm search over them.

A candidate is ``L(x) = s(x)' P'P s(x)`` where ``s`` lists every monomial of
total degree 1..d in graded-lexicographic order. The search maximizes the
measure of the projected invariant set produced by :func:`doakit.doa.doa_pipeline`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable

import numpy as np

from doakit.doa import NegDefSpec, doa_pipeline
from doakit.errors import ConfigError, DoaKitError
from doakit.expr import Binary, Const, Node, Pow, Var

RANK_TOL = 1e-6


def monomial_exponents(n: int, d: int) -> list[tuple[int, ...]]:
    """Exponent vectors of all monomials of degree 1..d, graded then lexicographic."""
    if n < 1 or d < 1:
        raise ConfigError("need n >= 1 and d >= 1")
    out = []
    for deg in range(1, d + 1):
        for combo in combinations_with_replacement(range(n), deg):
            e = [0] * n
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def monomial_count(n: int, d: int) -> int:
    return math.comb(n + d, d) - 1


def monomial_vector(x, n: int, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(n)
    return np.array([np.prod(x ** np.array(e)) for e in monomial_exponents(n, d)])


@dataclass(frozen=True)
class SosLyapunov:
    n: int
    d: int
    P: np.ndarray = field(compare=False)

    def __post_init__(self):
        P = np.atleast_2d(np.asarray(self.P, dtype=np.float64))
        r = monomial_count(self.n, self.d)
        if P.shape != (r, r):
            raise ConfigError(f"P must be {r}x{r} for n={self.n}, d={self.d}, got {P.shape}")
        object.__setattr__(self, "P", P)

    @property
    def r(self) -> int:
        return self.P.shape[0]

    @property
    def gram(self) -> np.ndarray:
        return self.P.T @ self.P

    def full_rank(self) -> bool:
        return abs(float(np.linalg.det(self.P))) >= RANK_TOL

    def __call__(self, x) -> float:
        s = monomial_vector(x, self.n, self.d)
        return float(s @ self.gram @ s)


def _monomial_expr(e: tuple[int, ...]) -> Node | None:
    factors = []
    for i, k in enumerate(e):
        if k == 1:
            factors.append(Var("x", i + 1))
        elif k > 1:
            factors.append(Pow(Var("x", i + 1), k))
    if not factors:
        return None
    node = factors[0]
    for f in factors[1:]:
        node = Binary("*", node, f)
    return node


def polynomial_coefficients(lyap: SosLyapunov) -> dict[tuple[int, ...], float]:
    """Coefficient of each monomial after expanding ``s' M s`` with ``M = P'P``."""
    exps = monomial_exponents(lyap.n, lyap.d)
    M = lyap.gram
    coeffs: dict[tuple[int, ...], float] = {}
    for i, ei in enumerate(exps):
        for j, ej in enumerate(exps):
            key = tuple(a + b for a, b in zip(ei, ej))
            coeffs[key] = coeffs.get(key, 0.0) + M[i, j]
    return dict(sorted(coeffs.items(), key=lambda kv: (sum(kv[0]), [-v for v in kv[0]])))


def sos_to_expr(lyap: SosLyapunov) -> Node:
    """Expanded polynomial expression of the candidate."""
    if not lyap.full_rank():
        raise ConfigError(f"P is rank deficient (|det P| < {RANK_TOL})")
    node = None
    for e, c in polynomial_coefficients(lyap).items():
        if c == 0.0:
            continue
        term = Binary("*", Const(c), _monomial_expr(e))
        node = term if node is None else Binary("+", node, term)
    return node if node is not None else Const(0.0)


PENALTY = -1.0


def objective(P, template: NegDefSpec, d: int) -> float:
    """Measure of the projected invariant set for ``L = s'P'Ps``; failures score ``-1``."""
    try:
        lyap = SosLyapunov(template.plant.n, d, P)
        if not lyap.full_rank():
            return PENALTY
        est = doa_pipeline(template.with_lyapunov(sos_to_expr(lyap)))
    except (DoaKitError, ArithmeticError, np.linalg.LinAlgError):
        return PENALTY
    return float(est.proj.measure())


@dataclass
class PsoConfig:
    swarm: int = 20
    iterations: int = 30
    inertia: float = 0.729
    cognitive: float = 1.49445
    social: float = 1.49445
    bounds: tuple[float, float] = (-3.0, 3.0)
    seed: int = 0

    def __post_init__(self):
        if self.swarm < 1 or self.iterations < 0:
            raise ConfigError("swarm must be >= 1 and iterations >= 0")
        lo, hi = self.bounds
        if not lo < hi:
            raise ConfigError("bounds must satisfy lo < hi")


@dataclass
class PsoResult:
    best_position: np.ndarray
    best_value: float
    history: list[float]
    best_positions: list[np.ndarray]


def pso_maximize(fn: Callable[[np.ndarray], float], dim: int, cfg: PsoConfig, callback=None) -> PsoResult:
    """Global-best particle swarm maximization of ``fn`` over a box.

    Particles are evaluated in index order; the global best changes only on a
    strict improvement, so the recorded history never decreases.
    """
    rng = np.random.default_rng(cfg.seed)
    lo, hi = cfg.bounds
    pos = rng.uniform(lo, hi, size=(cfg.swarm, dim))
    vel = rng.uniform(-(hi - lo), hi - lo, size=(cfg.swarm, dim)) * 0.1
    vals = np.array([fn(p) for p in pos])
    pbest, pbest_val = pos.copy(), vals.copy()
    g = int(np.argmax(vals))
    gbest, gbest_val = pos[g].copy(), float(vals[g])
    history, best_positions = [gbest_val], [gbest.copy()]
    if callback is not None:
        callback(0, gbest_val, gbest)
    for it in range(1, cfg.iterations + 1):
        r1 = rng.random((cfg.swarm, dim))
        r2 = rng.random((cfg.swarm, dim))
        vel = (
            cfg.inertia * vel
            + cfg.cognitive * r1 * (pbest - pos)
            + cfg.social * r2 * (gbest - pos)
        )
        pos = np.clip(pos + vel, lo, hi)
        for i in range(cfg.swarm):
            v = fn(pos[i])
            if v > pbest_val[i]:
                pbest[i], pbest_val[i] = pos[i].copy(), v
            if v > gbest_val:
                gbest, gbest_val = pos[i].copy(), float(v)
        history.append(gbest_val)
        best_positions.append(gbest.copy())
        if callback is not None:
            callback(it, gbest_val, gbest)
    return PsoResult(gbest, gbest_val, history, best_positions)


def pso_optimize(cfg: PsoConfig, template: NegDefSpec, d: int, callback=None) -> tuple[np.ndarray, PsoResult]:
    """Search ``P`` (an ``r x r`` matrix) maximizing :func:`objective`."""
    r = monomial_count(template.plant.n, d)
    result = pso_maximize(lambda z: objective(z.reshape(r, r), template, d), r * r, cfg, callback)
    return result.best_position.reshape(r, r), result
