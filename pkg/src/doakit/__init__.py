"""Certified domain-of-attraction estimation for discrete-time nonlinear plants.

Interval arithmetic with outward rounding, set inversion over box pavings,
a negative-definite and invariant state-control set for a Lyapunov candidate,
controllers derived from that set, and a particle swarm search over
sum-of-squares Lyapunov candidates.
"""

from doakit.control import (
    ControllerTable,
    Trajectory,
    build_table,
    linear_gain,
    mu,
    sample_admissible,
    simulate,
)
from doakit.doa import (
    DoaEstimate,
    NegDefSpec,
    doa_pipeline,
    invariant_refine,
    levelset_baseline,
    negdef_set,
)
from doakit.estimator import DoaEstimator, LyapunovSearch
from doakit.expr import PlantModel, eval_interval, eval_scalar, jacobian_at, parse
from doakit.interval import Interval, IvBox
from doakit.lyapunov import PsoConfig, SosLyapunov, monomial_vector, pso_optimize, sos_to_expr
from doakit.paving import Paving, load_jsonl, measure, normalize, project, save_jsonl
from doakit.sivia import SiviaTarget, sivia

__version__ = "0.1.0"

__all__ = [
    "ControllerTable",
    "DoaEstimate",
    "DoaEstimator",
    "Interval",
    "IvBox",
    "LyapunovSearch",
    "NegDefSpec",
    "Paving",
    "PlantModel",
    "PsoConfig",
    "SiviaTarget",
    "SosLyapunov",
    "Trajectory",
    "build_table",
    "doa_pipeline",
    "eval_interval",
    "eval_scalar",
    "invariant_refine",
    "jacobian_at",
    "levelset_baseline",
    "linear_gain",
    "load_jsonl",
    "measure",
    "monomial_vector",
    "mu",
    "negdef_set",
    "normalize",
    "parse",
    "project",
    "pso_optimize",
    "sample_admissible",
    "save_jsonl",
    "simulate",
    "sivia",
    "sos_to_expr",
]
