"""Command-line front end: ``doa-kit <command> --config <path>``.

Exit codes: 0 success, 2 configuration error, 3 numeric or domain error,
4 verification failure. ``--config example:<name>`` loads one of the bundled
configurations (``square``, ``quartic``, ``search``).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np

from doakit import config as config_mod
from doakit.control import (
    SampledController,
    TableController,
    build_table,
    linear_gain,
    linearization,
    lyapunov_increases,
    sample_paving,
    simulate,
    spectral_radius,
    validate_gain,
    verify_x0,
    write_trajectories_csv,
)
from doakit.doa import (
    NegDefSpec,
    doa_pipeline,
    invariance_violations,
    invariant_refine,
    levelset_baseline,
    negdef_result,
    negdef_violations,
    refinement_target,
)
from doakit.errors import (
    ConfigError,
    DoaKitError,
    DomainError,
    InvarianceViolation,
    OutOfDomainError,
    StabilizabilityError,
)
from doakit.interval import IvBox
from doakit.lyapunov import SosLyapunov, pso_optimize, sos_to_expr
from doakit.paving import Paving, load_jsonl, project, save_jsonl

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4
COMMANDS = ("check", "nset", "niset", "doa", "controller", "simulate", "optimize", "baseline")


class VerificationFailure(DoaKitError):
    pass


def _load(args) -> config_mod.RunConfig:
    path = args.config
    if path.startswith("example:"):
        name = path.split(":", 1)[1]
        res = resources.files("doakit") / "data" / f"{name}.json"
        if not res.is_file():
            raise ConfigError(f"no bundled example named {name!r}")
        cfg = config_mod.from_dict(json.loads(res.read_text()))
    else:
        cfg = config_mod.load_config(path)
    return cfg.with_overrides(eps=args.eps, seed=args.seed, output_dir=args.out)


def _spec(cfg) -> NegDefSpec:
    return NegDefSpec(cfg.plant, cfg.lyapunov, cfg.cons, cfg.alpha, cfg.eps)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _paving_summary(p: Paving) -> dict:
    doc = {"boxes": len(p), "measure": p.measure()}
    if p.dim == 1:
        doc["intervals"] = [list(iv) for iv in p.intervals()]
    return doc


def _box_doc(box: IvBox | None):
    return None if box is None else {"lo": box.lo.tolist(), "hi": box.hi.tolist()}


def _gain(cfg) -> np.ndarray:
    if cfg.controller_mode == "gain":
        validate_gain(cfg.plant, cfg.K)
        return cfg.K
    return linear_gain(cfg.plant, cfg.Q, cfg.R)


def _timings(out: Path, name: str, timings: dict) -> None:
    # kept apart from the reports so that those stay byte-identical across runs
    path = out / "timings.json"
    doc = json.loads(path.read_text()) if path.exists() else {}
    doc[name] = timings
    _write_json(path, doc)


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg, out: Path) -> dict:
    A, B = linearization(cfg.plant)
    n = cfg.plant.n
    ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(n)]) if cfg.plant.m else np.zeros((n, 0))
    rank = int(np.linalg.matrix_rank(ctrb)) if ctrb.size else 0
    report = {
        "A": A.tolist(),
        "B": B.tolist(),
        "open_loop_spectral_radius": spectral_radius(A),
        "controllability_rank": rank,
        "controllable": rank == n,
    }
    K = _gain(cfg)
    report["K"] = K.tolist()
    report["closed_loop_spectral_radius"] = spectral_radius(A + B @ K)
    _write_json(out / "check.json", report)
    if rank != n:
        raise VerificationFailure("the linearization at the origin is not controllable")
    return report


def cmd_nset(cfg, out: Path) -> dict:
    t0 = time.perf_counter()
    res = negdef_result(_spec(cfg))
    save_jsonl(out / "ndef.jsonl", res.inner, boundary=res.boundary, epsilon=cfg.eps, alpha=cfg.alpha)
    _timings(out, "nset", {"negdef_s": time.perf_counter() - t0})
    report = {
        "ndef": _paving_summary(res.inner),
        "proj": _paving_summary(project(res.inner, strict=False)),
        "boundary_boxes": len(res.boundary),
        "boxes_processed": res.stats.boxes_processed,
    }
    _write_json(out / "nset_report.json", report)
    return report


def cmd_niset(cfg, out: Path) -> dict:
    spec = _spec(cfg)
    t0 = time.perf_counter()
    res = negdef_result(spec)
    history = []
    ni, iterations = invariant_refine(cfg.plant, res.inner, cfg.eps, cons=cfg.cons, history=history)
    save_jsonl(out / "ndef.jsonl", res.inner, boundary=res.boundary, epsilon=cfg.eps, alpha=cfg.alpha)
    save_jsonl(out / "niset.jsonl", ni, epsilon=cfg.eps, alpha=cfg.alpha)
    _timings(out, "niset", {"total_s": time.perf_counter() - t0})
    report = {
        "ni_set": _paving_summary(ni),
        "proj": _paving_summary(project(ni, strict=False)),
        "iterations": iterations,
        "iterate_measures": history,
    }
    _write_json(out / "niset_report.json", report)
    return report


def _doa_artifacts(cfg, spec, out: Path, name="doa") -> dict:
    est = doa_pipeline(spec)
    save_jsonl(out / "ndef.jsonl", est.ndef, epsilon=spec.eps, alpha=spec.alpha)
    save_jsonl(out / "niset.jsonl", est.ni_set, epsilon=spec.eps, alpha=spec.alpha)
    save_jsonl(out / "proj.jsonl", est.proj, epsilon=spec.eps, alpha=spec.alpha)
    save_jsonl(out / "doa.jsonl", est.doa_region, epsilon=spec.eps, alpha=spec.alpha)
    target = refinement_target(est.proj, spec.cons)
    report = {
        "lyapunov": str(spec.lyapunov),
        "alpha": spec.alpha,
        "eps": spec.eps,
        "proj": _paving_summary(est.proj),
        "x0": _box_doc(est.x0),
        "doa": _paving_summary(est.doa_region),
        "volume": est.volume,
        "iterations": est.iterations,
        "degenerate": est.degenerate,
        "box_counts": est.box_counts,
        "negdef_violations": negdef_violations(spec, est.ni_set),
        "invariance_violations": invariance_violations(spec.plant, est.ni_set, target),
    }
    _write_json(out / "doa_report.json", report)
    _timings(out, name, est.timings)
    if report["negdef_violations"] or report["invariance_violations"]:
        raise VerificationFailure("post-checks failed on the invariant set")
    return report


def cmd_doa(cfg, out: Path) -> dict:
    return _doa_artifacts(cfg, _spec(cfg), out)


def _load_doa(out: Path):
    ni_path, rep_path = out / "niset.jsonl", out / "doa_report.json"
    if not (ni_path.exists() and rep_path.exists()):
        raise ConfigError(f"no estimate found in {out}; run the doa command first")
    report = json.loads(rep_path.read_text())
    ni = load_jsonl(ni_path)
    region = load_jsonl(out / "doa.jsonl")
    x0 = report.get("x0")
    x0_box = None if x0 is None else IvBox.from_bounds(x0["lo"], x0["hi"])
    return ni, region, x0_box, report


def cmd_controller(cfg, out: Path) -> dict:
    ni, _, _, _ = _load_doa(out)
    table = build_table(ni)
    with open(out / "table.jsonl", "w") as fh:
        fh.write(json.dumps({"n_state": ni.n_state, "m_ctrl": ni.m_ctrl, "cells": len(table)}) + "\n")
        for lo, hi, u, margin in zip(table.state_lo, table.state_hi, table.u_value, table.margin):
            fh.write(json.dumps({"lo": lo.tolist(), "hi": hi.tolist(), "u": u.tolist(), "margin": float(margin)}) + "\n")
    report = {"cells": len(table), "K": _gain(cfg).tolist()}
    _write_json(out / "controller_report.json", report)
    return report


def _run_batch(cfg, controller, starts, region, proj):
    trajs, failures, increases = [], [], 0
    for i, s in enumerate(starts):
        try:
            tr = simulate(cfg.plant, controller, s, cfg.sim.max_steps, cfg.sim.conv_tol, region)
        except (InvarianceViolation, OutOfDomainError) as exc:
            failures.append({"index": i, "start": s.tolist(), "error": str(exc)})
            continue
        trajs.append(tr)
        increases += lyapunov_increases(cfg.lyapunov, tr, proj)
    converged = sum(t.converged for t in trajs)
    summary = {
        "trajectories": len(starts),
        "converged": converged,
        "failures": failures,
        "lyapunov_increases": increases,
        "region_kept": not failures,
        "max_steps_to_converge": max((t.steps_to_converge or 0 for t in trajs), default=0),
    }
    return trajs, summary


def cmd_simulate(cfg, out: Path) -> dict:
    ni, region, x0, _ = _load_doa(out)
    K = _gain(cfg)
    proj = project(ni, strict=False)
    table = build_table(ni)
    rng = np.random.default_rng(cfg.sim.seed)
    init = region
    if cfg.sim.init is not None:
        init = Paving(cfg.sim.init.lo[None, :], cfg.sim.init.hi[None, :], cfg.plant.n)
    starts = sample_paving(init, cfg.sim.trajectories, rng)
    table_trajs, table_sum = _run_batch(cfg, TableController(table, K, x0), starts, region, proj)
    sampled = SampledController(ni, K, x0, rng)
    sampled_trajs, sampled_sum = _run_batch(cfg, sampled, starts, region, proj)
    write_trajectories_csv(out / "traj.csv", table_trajs, cfg.plant.n, cfg.plant.m)
    write_trajectories_csv(out / "traj_sampled.csv", sampled_trajs, cfg.plant.n, cfg.plant.m)
    x0_runs = verify_x0(cfg.plant, K, x0, seed=cfg.sim.seed) if x0 is not None else None
    report = {
        "table": table_sum,
        "sampled": sampled_sum,
        "gap_avoidance": table_sum["region_kept"] and sampled_sum["region_kept"],
        "x0_linear_runs": None if x0_runs is None else {"runs": 100, "converged": x0_runs},
        "closed_loop_spectral_radius": validate_gain(cfg.plant, K),
    }
    _write_json(out / "verify.json", report)
    ok = all(
        s["converged"] == s["trajectories"] and s["region_kept"] and s["lyapunov_increases"] == 0
        for s in (table_sum, sampled_sum)
    ) and (x0_runs is None or x0_runs == 100)
    if not ok:
        raise VerificationFailure("closed-loop verification failed; see verify.json")
    return report


def cmd_optimize(cfg, out: Path) -> dict:
    if cfg.pso is None:
        raise ConfigError("the optimize command needs a pso section")
    if cfg.lyapunov_mode != "sos":
        raise ConfigError("the optimize command needs lyapunov.mode = 'sos'")
    spec = _spec(cfg)
    rows = []
    t0 = time.perf_counter()
    P, result = pso_optimize(
        cfg.pso, spec, cfg.sos_degree, callback=lambda i, v, g: rows.append([i, v, *g.tolist()])
    )
    with open(out / "optimize_log.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        r = P.shape[0]
        w.writerow(["iteration", "best_objective"] + [f"p{i + 1}{j + 1}" for i in range(r) for j in range(r)])
        for row in rows:
            w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])
    L = sos_to_expr(SosLyapunov(cfg.plant.n, cfg.sos_degree, P))
    _timings(out, "optimize", {"pso_s": time.perf_counter() - t0})
    doa = _doa_artifacts(cfg, spec.with_lyapunov(L), out)
    report = {"best_P": P.tolist(), "best_objective": result.best_value, "history": result.history, "lyapunov": str(L), "doa": doa}
    _write_json(out / "optimize_report.json", report)
    return report


def cmd_baseline(cfg, out: Path) -> dict:
    spec = _spec(cfg)
    if cfg.baseline_region is not None:
        b = cfg.baseline_region
        region = Paving(b.lo[None, :], b.hi[None, :], cfg.plant.n)
        source = "config"
    else:
        region = doa_pipeline(spec).doa_region
        source = "estimate"
    if region.is_empty:
        raise VerificationFailure("the estimate is empty; nothing to compare against")
    c, level = levelset_baseline(cfg.lyapunov, region, cfg.cons, cfg.eps)
    save_jsonl(out / "levelset.jsonl", level, epsilon=cfg.eps, alpha=cfg.alpha)
    report = {"c": c, "region_source": source, "region": _paving_summary(region), "set": _paving_summary(level)}
    _write_json(out / "baseline_report.json", report)
    return report


HANDLERS = {
    "check": cmd_check,
    "nset": cmd_nset,
    "niset": cmd_niset,
    "doa": cmd_doa,
    "controller": cmd_controller,
    "simulate": cmd_simulate,
    "optimize": cmd_optimize,
    "baseline": cmd_baseline,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="doa-kit", description="Certified domain-of-attraction estimation.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON config path, or example:<name>")
    ap.add_argument("--out", default=None, help="output directory (overrides output_dir)")
    ap.add_argument("--eps", type=float, default=None, help="override eps")
    ap.add_argument("--seed", type=int, default=None, help="override the sim and pso seeds")
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = _load(args)
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = HANDLERS[args.command](cfg, out)
    except VerificationFailure as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DomainError, StabilizabilityError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, DoaKitError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps({"command": args.command, "output_dir": str(out), "summary": _short(report)}, sort_keys=True))
    return EXIT_OK


def _short(report: dict) -> dict:
    return {k: v for k, v in report.items() if not isinstance(v, (list, dict)) or k in ("proj", "doa", "set")}


if __name__ == "__main__":
    sys.exit(main())
