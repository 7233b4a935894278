"""Controllers on the certified set and closed-loop simulation.

Inside the origin box a linear state feedback ``u = K x`` is used. Elsewhere
in the domain-of-attraction estimate the control comes from the invariant
state-control paving, either through a lookup table that picks the midpoint of
a box's control interval, or by sampling uniformly among all admissible
controls for the current state.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from doakit.errors import (
    ConfigError,
    InvarianceViolation,
    OutOfDomainError,
    StabilizabilityError,
)
from doakit.expr import Node, PlantModel, eval_scalar, jacobian_at
from doakit.interval import IvBox, contains_point
from doakit.paving import Paving, contains_points, normalize


def _as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# linear gain


def spectral_radius(M) -> float:
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


def linearization(plant: PlantModel):
    return jacobian_at(plant, np.zeros(plant.n), np.zeros(plant.m))


def validate_gain(plant: PlantModel, K) -> float:
    """Spectral radius of the closed-loop linearization; raises when it is not below 1."""
    A, B = linearization(plant)
    K = np.atleast_2d(np.asarray(K, dtype=np.float64))
    if K.shape != (plant.m, plant.n):
        raise ConfigError(f"gain must have shape ({plant.m}, {plant.n}), got {K.shape}")
    rho = spectral_radius(A + B @ K)
    if not rho < 1.0:
        raise StabilizabilityError(f"u = Kx does not stabilize the linearization (radius {rho:.6g})")
    return rho


def linear_gain(
    plant: PlantModel,
    q_weight=None,
    r_weight=None,
    tol: float = 1e-12,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Discrete-time LQR gain by fixed-point iteration of the Riccati equation.

    Returns ``K`` such that ``u = K x`` stabilizes the linearization at the
    origin (``K = -(R + B'PB)^{-1} B'PA``).
    """
    A, B = linearization(plant)
    Q = np.eye(plant.n) if q_weight is None else np.atleast_2d(np.asarray(q_weight, dtype=float))
    R = np.eye(plant.m) if r_weight is None else np.atleast_2d(np.asarray(r_weight, dtype=float))
    if Q.shape != (plant.n, plant.n) or R.shape != (plant.m, plant.m):
        raise ConfigError("weight matrices do not match the plant dimensions")
    P = Q.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        with np.errstate(over="ignore", invalid="ignore"):
            gain_term = np.linalg.solve(R + BtP @ B, BtP @ A)
            P_next = Q + A.T @ P @ A - (A.T @ P @ B) @ gain_term
        if not np.all(np.isfinite(P_next)):
            break
        if np.max(np.abs(P_next - P)) < tol:
            P = P_next
            K = -np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)
            validate_gain(plant, K)
            return K
        P = P_next
    raise StabilizabilityError("Riccati iteration did not converge; (A, B) may not be stabilizable")


# ---------------------------------------------------------------------------
# lookup table


@dataclass
class ControllerTable:
    """One cell per source box: its state part and the midpoint of its control part."""

    state_lo: np.ndarray
    state_hi: np.ndarray
    u_value: np.ndarray
    margin: np.ndarray
    source: Paving

    def __len__(self):
        return self.u_value.shape[0]

    def cell_index(self, x) -> int | None:
        """Index of the cell used at ``x``, or ``None`` if no cell covers it.

        Among covering cells the one with the widest control interval wins
        (its midpoint is farthest from the edge of the admissible set); ties
        go to the first cell in canonical order.
        """
        x = np.asarray(x, dtype=np.float64)
        inside = np.all((self.state_lo <= x) & (x <= self.state_hi), axis=1)
        if not inside.any():
            return None
        margins = np.where(inside, self.margin, -np.inf)
        return int(np.argmax(margins))

    def lookup(self, x) -> np.ndarray | None:
        i = self.cell_index(x)
        return None if i is None else self.u_value[i].copy()


def build_table(ni_set: Paving) -> ControllerTable:
    if ni_set.is_empty:
        raise ConfigError("cannot build a controller table from an empty set")
    if ni_set.m_ctrl == 0:
        raise ConfigError("controller table needs a state-control paving")
    n = ni_set.n_state
    clo, chi = ni_set.lo[:, n:], ni_set.hi[:, n:]
    u_value = 0.5 * clo + 0.5 * chi
    margin = np.min(chi - clo, axis=1)
    return ControllerTable(
        ni_set.lo[:, :n].copy(), ni_set.hi[:, :n].copy(), u_value, margin, ni_set
    )


def mu(x, table: ControllerTable, K, x0: IvBox | None) -> np.ndarray:
    """Feedback law: table lookup on the certified set, ``K x`` on the origin box."""
    x = np.asarray(x, dtype=np.float64)
    u = table.lookup(x)
    if u is not None:
        return u
    if x0 is not None and contains_point(x0, x):
        return np.atleast_2d(K) @ x
    raise OutOfDomainError(f"state {x.tolist()} is outside the domain of the controller")


def admissible_controls(ni_set: Paving, x) -> Paving:
    """Union of the control intervals of all boxes whose state part contains ``x``."""
    n = ni_set.n_state
    x = np.asarray(x, dtype=np.float64)
    hit = np.all((ni_set.lo[:, :n] <= x) & (x <= ni_set.hi[:, :n]), axis=1)
    if not hit.any():
        raise OutOfDomainError(f"state {x.tolist()} is not covered by the state-control set")
    return normalize((ni_set.lo[hit, n:], ni_set.hi[hit, n:]), ni_set.m_ctrl, 0)


def sample_paving(p: Paving, size: int, seed=None) -> np.ndarray:
    """Uniform samples from a paving (boxes chosen by volume); returns ``(size, dim)``."""
    rng = _as_generator(seed)
    if p.is_empty:
        raise ConfigError("cannot sample from an empty paving")
    vols = np.prod(p.hi - p.lo, axis=1)
    if vols.sum() <= 0:
        raise ConfigError("cannot sample from a paving of zero volume")
    idx = rng.choice(len(p), size=size, p=vols / vols.sum())
    return p.lo[idx] + rng.random((size, p.dim)) * (p.hi[idx] - p.lo[idx])


def sample_admissible(ni_set: Paving, x, seed=None) -> np.ndarray:
    """One control drawn uniformly from the admissible set at ``x``."""
    return sample_paving(admissible_controls(ni_set, x), 1, seed)[0]


# ---------------------------------------------------------------------------
# closed loop


class TableController:
    """``mu`` packaged as a callable ``x -> u``."""

    def __init__(self, table: ControllerTable, K, x0: IvBox | None):
        self.table, self.K, self.x0 = table, np.atleast_2d(K), x0

    def __call__(self, x):
        return mu(x, self.table, self.K, self.x0)


class SampledController:
    """Uniformly random admissible control on the certified set, ``K x`` on the origin box."""

    def __init__(self, ni_set: Paving, K, x0: IvBox | None, seed=None):
        self.ni_set, self.K, self.x0 = ni_set, np.atleast_2d(K), x0
        self.rng = _as_generator(seed)

    def __call__(self, x):
        x = np.asarray(x, dtype=np.float64)
        try:
            return sample_admissible(self.ni_set, x, self.rng)
        except OutOfDomainError:
            if self.x0 is not None and contains_point(self.x0, x):
                return self.K @ x
            raise


class LinearController:
    def __init__(self, K):
        self.K = np.atleast_2d(np.asarray(K, dtype=np.float64))

    def __call__(self, x):
        return self.K @ np.asarray(x, dtype=np.float64)


@dataclass
class Trajectory:
    states: np.ndarray
    controls: np.ndarray
    converged: bool
    steps_to_converge: int | None = None
    meta: dict = field(default_factory=dict)


def simulate(
    plant: PlantModel,
    controller: Callable,
    x_init,
    max_steps: int = 200,
    conv_tol: float = 1e-3,
    region: Paving | None = None,
) -> Trajectory:
    """Iterate ``x(k+1) = f(x(k), u(k))`` until ``|x|_inf <= conv_tol`` or ``max_steps``.

    If ``region`` is given, every visited state must lie in it; leaving it
    raises :class:`InvarianceViolation`.
    """
    x = np.asarray(x_init, dtype=np.float64).reshape(plant.n)
    states, controls = [x], []
    for k in range(max_steps + 1):
        if region is not None and not contains_points(region, x[None, :])[0]:
            raise InvarianceViolation(f"state {x.tolist()} at step {k} left the region")
        if np.max(np.abs(x), initial=0.0) <= conv_tol:
            return Trajectory(np.array(states), _stack(controls, plant.m), True, k)
        if k == max_steps:
            break
        u = np.asarray(controller(x), dtype=np.float64).reshape(plant.m)
        x = plant.step(x, u)
        controls.append(u)
        states.append(x)
    return Trajectory(np.array(states), _stack(controls, plant.m), False, None)


def _stack(rows, width):
    return np.array(rows) if rows else np.zeros((0, width))


def lyapunov_increases(L: Node, traj: Trajectory, proj: Paving) -> int:
    """Steps that start in ``proj`` and do not strictly decrease ``L``."""
    count = 0
    for k in range(len(traj.controls)):
        x, y = traj.states[k], traj.states[k + 1]
        if contains_points(proj, x[None, :])[0] and not eval_scalar(L, y) < eval_scalar(L, x):
            count += 1
    return count


def verify_x0(
    plant: PlantModel,
    K,
    x0: IvBox,
    runs: int = 100,
    seed=0,
    max_steps: int = 200,
    conv_tol: float = 1e-3,
) -> int:
    """Number of runs from uniform points of ``x0`` that converge under ``u = K x``."""
    validate_gain(plant, K)
    box = Paving(x0.lo[None, :], x0.hi[None, :], x0.n_state)
    if box.measure() == 0:
        starts = np.repeat(x0.lo[None, :], runs, axis=0)
    else:
        starts = sample_paving(box, runs, seed)
    ctrl = LinearController(K)
    return sum(simulate(plant, ctrl, s, max_steps, conv_tol).converged for s in starts)


def write_trajectories_csv(path, trajectories: Sequence[Trajectory], n: int, m: int) -> None:
    """Write ``step, x1..xn, u1..um`` rows; ``step`` restarts at 0 for each trajectory.

    The final state of a trajectory has no control, so its control fields are empty.
    """
    header = ["step"] + [f"x{i + 1}" for i in range(n)] + [f"u{j + 1}" for j in range(m)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for traj in trajectories:
            for k, x in enumerate(traj.states):
                u = traj.controls[k] if k < len(traj.controls) else [""] * m
                w.writerow([k, *(repr(float(v)) for v in x), *(v if v == "" else repr(float(v)) for v in u)])
