"""scikit-learn style front end.

:class:`DoaEstimator` wraps the whole pipeline: ``fit`` computes the certified
sets and the controller, ``predict`` returns control values for states and
``score`` reports the fraction of given states inside the estimate.
:class:`LyapunovSearch` runs the swarm search and exposes the best candidate.
Hyperparameters follow the usual convention: constructor arguments are stored
untouched and validated in ``fit``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from doakit.control import TableController, build_table, linear_gain, validate_gain
from doakit.doa import NegDefSpec, doa_pipeline
from doakit.errors import ConfigError, OutOfDomainError
from doakit.expr import PlantModel, parse
from doakit.interval import IvBox
from doakit.lyapunov import PsoConfig, SosLyapunov, pso_optimize, sos_to_expr
from doakit.paving import contains_points


def _plant(dynamics, n_state, n_control) -> PlantModel:
    if isinstance(dynamics, str):
        dynamics = [dynamics]
    return PlantModel.from_strings(list(dynamics), n_state, n_control)


def _cons(cons_lo, cons_hi, n, m) -> IvBox:
    lo = np.asarray(cons_lo, dtype=np.float64).ravel()
    hi = np.asarray(cons_hi, dtype=np.float64).ravel()
    if lo.shape != (n + m,) or hi.shape != (n + m,):
        raise ConfigError(f"constraint bounds must have {n + m} entries")
    return IvBox.from_bounds(lo, hi, n_state=n, m_ctrl=m)


class DoaEstimator(BaseEstimator):
    """Certified domain-of-attraction estimate and controller for one Lyapunov candidate.

    Parameters
    ----------
    dynamics : list of str
        One expression per state component in ``x1..xn`` and ``u1..um``.
    n_state, n_control : int
    lyapunov : str
        Candidate function of the state variables.
    cons_lo, cons_hi : array-like of length ``n_state + n_control``
        Bounds of the state-control constraint box.
    alpha : float
        Required decrease margin of the Lyapunov function per step.
    eps : float
        Box width below which set inversion stops bisecting.
    gain : array-like of shape (n_control, n_state), optional
        Linear gain used near the origin; computed by LQR when omitted.
    """

    def __init__(
        self,
        dynamics=None,
        n_state=1,
        n_control=1,
        lyapunov="x1^2",
        cons_lo=None,
        cons_hi=None,
        alpha=1e-15,
        eps=0.01,
        gain=None,
    ):
        self.dynamics = dynamics
        self.n_state = n_state
        self.n_control = n_control
        self.lyapunov = lyapunov
        self.cons_lo = cons_lo
        self.cons_hi = cons_hi
        self.alpha = alpha
        self.eps = eps
        self.gain = gain

    def _spec(self) -> NegDefSpec:
        if self.dynamics is None or self.cons_lo is None or self.cons_hi is None:
            raise ConfigError("dynamics, cons_lo and cons_hi are required")
        plant = _plant(self.dynamics, self.n_state, self.n_control)
        cons = _cons(self.cons_lo, self.cons_hi, self.n_state, self.n_control)
        return NegDefSpec(plant, parse(self.lyapunov, self.n_state), cons, self.alpha, self.eps)

    def fit(self, X=None, y=None):
        """Run the pipeline; ``X`` and ``y`` are ignored and accepted for API compatibility."""
        spec = self._spec()
        self.spec_ = spec
        self.estimate_ = doa_pipeline(spec)
        if self.gain is None:
            self.gain_ = linear_gain(spec.plant)
        else:
            self.gain_ = np.atleast_2d(np.asarray(self.gain, dtype=np.float64))
            validate_gain(spec.plant, self.gain_)
        self.table_ = None if self.estimate_.degenerate else build_table(self.estimate_.ni_set)
        self.volume_ = self.estimate_.volume
        return self

    def _states(self, X):
        check_is_fitted(self, "estimate_")
        return check_array(X, ensure_min_samples=1, dtype=np.float64).reshape(-1, self.n_state)

    def contains(self, X) -> np.ndarray:
        """Boolean mask of the states inside the estimated domain of attraction."""
        X = self._states(X)
        return contains_points(self.estimate_.doa_region, X)

    def predict(self, X) -> np.ndarray:
        """Control values for each state; raises for states outside the estimate."""
        X = self._states(X)
        if self.table_ is None:
            raise OutOfDomainError("the estimate is empty; no controller is available")
        ctrl = TableController(self.table_, self.gain_, self.estimate_.x0)
        return np.array([ctrl(x) for x in X])

    def score(self, X, y=None) -> float:
        """Fraction of the given states that lie in the estimate."""
        return float(np.mean(self.contains(X)))


class LyapunovSearch(BaseEstimator):
    """Particle swarm search over sum-of-squares candidates of degree ``2 * degree``."""

    def __init__(
        self,
        dynamics=None,
        n_state=1,
        n_control=1,
        degree=2,
        cons_lo=None,
        cons_hi=None,
        alpha=1e-15,
        eps=0.01,
        swarm=20,
        iterations=30,
        bounds=(-3.0, 3.0),
        random_state=0,
    ):
        self.dynamics = dynamics
        self.n_state = n_state
        self.n_control = n_control
        self.degree = degree
        self.cons_lo = cons_lo
        self.cons_hi = cons_hi
        self.alpha = alpha
        self.eps = eps
        self.swarm = swarm
        self.iterations = iterations
        self.bounds = bounds
        self.random_state = random_state

    def fit(self, X=None, y=None, callback=None):
        if self.dynamics is None or self.cons_lo is None or self.cons_hi is None:
            raise ConfigError("dynamics, cons_lo and cons_hi are required")
        plant = _plant(self.dynamics, self.n_state, self.n_control)
        cons = _cons(self.cons_lo, self.cons_hi, self.n_state, self.n_control)
        # placeholder candidate; every evaluation substitutes its own
        template = NegDefSpec(plant, parse("x1^2", self.n_state), cons, self.alpha, self.eps)
        cfg = PsoConfig(
            swarm=self.swarm,
            iterations=self.iterations,
            bounds=tuple(self.bounds),
            seed=self.random_state,
        )
        P, result = pso_optimize(cfg, template, self.degree, callback)
        self.P_ = P
        self.best_score_ = result.best_value
        self.history_ = result.history
        self.lyapunov_ = str(sos_to_expr(SosLyapunov(self.n_state, self.degree, P)))
        return self
