"""JSON run configuration.

Example::

    {
      "plant": {"n": 1, "m": 1, "dynamics": ["-sin(2*x1) - x1*u1 - 0.2*x1 - u1^2 + u1"]},
      "cons": {"lo": [-2, -2], "hi": [2, 2]},
      "alpha": 1e-15,
      "eps": 0.01,
      "lyapunov": {"mode": "explicit", "expr": "x1^2"},
      "controller": {"mode": "gain", "K": [[1.8649]]},
      "sim": {"trajectories": 200, "max_steps": 200, "conv_tol": 0.001, "seed": 0},
      "output_dir": "out"
    }

``lyapunov`` may instead be ``{"mode": "sos", "n": 1, "d": 2, "P": [[...], [...]]}``
and ``controller`` may be ``{"mode": "lqr", "Q": [[1]], "R": [[1]]}``. An
optional ``pso`` section (``swarm``, ``iterations``, ``bounds``, ``seed``)
enables the optimize command; an optional ``baseline`` section with
``region`` bounds compares against a fixed region instead of the estimate.
``sim.init`` may give ``lo``/``hi`` bounds to draw initial states from a box
instead of the estimate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from doakit.errors import ConfigError, ParseError
from doakit.expr import Node, PlantModel, parse
from doakit.interval import IvBox
from doakit.lyapunov import PsoConfig, SosLyapunov, sos_to_expr


def _matrix(value, shape, what) -> np.ndarray:
    try:
        M = np.atleast_2d(np.asarray(value, dtype=np.float64))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a numeric matrix") from exc
    if M.shape != shape:
        raise ConfigError(f"{what} must have shape {shape}, got {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ConfigError(f"{what} must be finite")
    return M


def _positive(value, what) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a number") from exc
    if not (v > 0 and math.isfinite(v)):
        raise ConfigError(f"{what} must be positive and finite, got {value!r}")
    return v


def _section(doc, key, required=True) -> dict:
    sec = doc.get(key)
    if sec is None:
        if required:
            raise ConfigError(f"missing section {key!r}")
        return {}
    if not isinstance(sec, dict):
        raise ConfigError(f"section {key!r} must be an object")
    return sec


def _bounds_box(sec, n, m, what) -> IvBox:
    lo = np.asarray(sec.get("lo", []), dtype=np.float64).ravel()
    hi = np.asarray(sec.get("hi", []), dtype=np.float64).ravel()
    if lo.shape != (n + m,) or hi.shape != (n + m,):
        raise ConfigError(f"{what} needs lo/hi with {n + m} entries")
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise ConfigError(f"{what} bounds must be finite")
    if np.any(lo > hi):
        raise ConfigError(f"{what} has lo > hi")
    return IvBox.from_bounds(lo, hi, n_state=n, m_ctrl=m)


@dataclass
class SimConfig:
    trajectories: int = 200
    max_steps: int = 200
    conv_tol: float = 1e-3
    seed: int = 0
    init: IvBox | None = None


@dataclass
class RunConfig:
    plant: PlantModel
    cons: IvBox
    alpha: float
    eps: float
    lyapunov_mode: str
    lyapunov: Node | None
    sos: SosLyapunov | None
    sos_degree: int | None
    controller_mode: str
    K: np.ndarray | None = None
    Q: np.ndarray | None = None
    R: np.ndarray | None = None
    pso: PsoConfig | None = None
    sim: SimConfig = field(default_factory=SimConfig)
    baseline_region: IvBox | None = None
    output_dir: str = "out"
    raw: dict = field(default_factory=dict, repr=False)

    def with_overrides(self, eps=None, seed=None, output_dir=None) -> RunConfig:
        cfg = self
        if eps is not None:
            cfg = replace(cfg, eps=_positive(eps, "eps"))
        if seed is not None:
            sim = replace(cfg.sim, seed=int(seed))
            pso = replace(cfg.pso, seed=int(seed)) if cfg.pso is not None else None
            cfg = replace(cfg, sim=sim, pso=pso)
        if output_dir is not None:
            cfg = replace(cfg, output_dir=str(output_dir))
        return cfg


def from_dict(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a JSON object")
    psec = _section(doc, "plant")
    try:
        n, m = int(psec["n"]), int(psec["m"])
        dynamics = list(psec["dynamics"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("plant needs integer n, m and a list of dynamics") from exc
    if n < 1 or m < 0:
        raise ConfigError("plant needs n >= 1 and m >= 0")
    plant = PlantModel.from_strings(dynamics, n, m)
    cons = _bounds_box(_section(doc, "cons"), n, m, "cons")
    alpha = _positive(doc.get("alpha"), "alpha")
    eps = _positive(doc.get("eps"), "eps")

    lsec = _section(doc, "lyapunov")
    mode = lsec.get("mode")
    lyap = sos = degree = None
    if mode == "explicit":
        if not isinstance(lsec.get("expr"), str):
            raise ConfigError("explicit lyapunov needs an 'expr' string")
        lyap = parse(lsec["expr"], n)
    elif mode == "sos":
        if int(lsec.get("n", n)) != n:
            raise ConfigError("lyapunov.n must equal plant.n")
        degree = int(lsec.get("d", 0))
        if degree < 1:
            raise ConfigError("lyapunov.d must be >= 1")
        r = math.comb(n + degree, degree) - 1
        P = _matrix(lsec.get("P", np.eye(r)), (r, r), "lyapunov.P")
        sos = SosLyapunov(n, degree, P)
        lyap = sos_to_expr(sos)
    else:
        raise ConfigError(f"lyapunov.mode must be 'explicit' or 'sos', got {mode!r}")

    csec = _section(doc, "controller", required=False) or {"mode": "lqr"}
    cmode = csec.get("mode")
    K = Q = R = None
    if cmode == "gain":
        K = _matrix(csec.get("K"), (m, n), "controller.K")
    elif cmode == "lqr":
        Q = _matrix(csec.get("Q", np.eye(n)), (n, n), "controller.Q")
        R = _matrix(csec.get("R", np.eye(m)), (m, m), "controller.R")
    else:
        raise ConfigError(f"controller.mode must be 'lqr' or 'gain', got {cmode!r}")

    pso = None
    if "pso" in doc:
        s = _section(doc, "pso")
        try:
            pso = PsoConfig(
                swarm=int(s.get("swarm", 20)),
                iterations=int(s.get("iterations", 30)),
                bounds=tuple(float(b) for b in s.get("bounds", (-3.0, 3.0))),
                seed=int(s.get("seed", 0)),
                inertia=float(s.get("inertia", 0.729)),
                cognitive=float(s.get("cognitive", 1.49445)),
                social=float(s.get("social", 1.49445)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid pso section: {exc}") from exc

    ssec = _section(doc, "sim", required=False)
    init = _bounds_box(ssec["init"], n, 0, "sim.init") if "init" in ssec else None
    sim = SimConfig(
        trajectories=int(ssec.get("trajectories", 200)),
        max_steps=int(ssec.get("max_steps", 200)),
        conv_tol=_positive(ssec.get("conv_tol", 1e-3), "sim.conv_tol"),
        seed=int(ssec.get("seed", 0)),
        init=init,
    )
    bsec = _section(doc, "baseline", required=False)
    region = _bounds_box(bsec["region"], n, 0, "baseline.region") if "region" in bsec else None

    return RunConfig(
        plant=plant,
        cons=cons,
        alpha=alpha,
        eps=eps,
        lyapunov_mode=mode,
        lyapunov=lyap,
        sos=sos,
        sos_degree=degree,
        controller_mode=cmode,
        K=K,
        Q=Q,
        R=R,
        pso=pso,
        sim=sim,
        baseline_region=region,
        output_dir=str(doc.get("output_dir", "out")),
        raw=doc,
    )


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    try:
        return from_dict(doc)
    except ParseError as exc:
        raise ConfigError(f"bad expression in config: {exc}") from exc
