"""Command-line front end: evaluate | pareto | scalarize | mesh-dump | flow-dump | elast-dump.

Every command writes its CSV files plus ``manifest.json`` into ``--out``.  Each CSV
starts with one comment line naming the manifest and the configuration digest;
the rest of the file depends only on the configuration and the package version.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import datetime as _dt
import json
import math
import os
import sys
import traceback

import numpy as np

from . import __version__
from .config import Config, load_config
from .elasticity import coupled_run, write_elasticity_csv
from .errors import InfeasibleProblem, ParetoShapeError
from .geometry import boundary_geometry, realize_shape, resolution_for
from .mesh import mesh_fluid, mesh_solid, write_mesh_csv
from .multicrit import DesignPool, TIE_TOL, front_maximality_check, nondominated_mask
from .pipeline import build_pool, evaluate_coefficients, evaluate_many, resolve_workers
from .potential_flow import write_flow_csv
from .scalarization import (INFEASIBLE, ScalarizationSpec, epsilon_monotonicity, excess,
                            coefficient_distance, shape_distance, solve_scalarized)

MANIFEST = "manifest.json"


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


class Run:
    """Collects outputs and writes the manifest."""

    def __init__(self, command, cfg: Config, out, workers, seed, argv):
        self.command, self.cfg, self.out = command, cfg, out
        self.workers, self.seed, self.argv = workers, seed, argv
        self.outputs = []
        self.started = _now()
        os.makedirs(out, exist_ok=True)

    def path(self, name):
        return os.path.join(self.out, name)

    def stamp(self, path):
        """Prefix a written CSV with the manifest reference."""
        with open(path) as fh:
            body = fh.read()
        with open(path, "w", newline="") as fh:
            fh.write(f"# manifest={MANIFEST} config_hash={self.cfg.digest}\n")
            fh.write(body)
        self.outputs.append(os.path.basename(path))

    def manifest(self, status, error=None, extra=None):
        run = self.cfg.run
        doc = {
            "command": self.command,
            "status": status,
            "error": error,
            "config_path": self.cfg.source,
            "config_hash": self.cfg.digest,
            "tool_version": __version__,
            "started": self.started,
            "finished": _now(),
            "argv": self.argv,
            "workers": self.workers,
            "seed": self.seed,
            "tolerances": {
                "flow.rel_tol": run.flow.rel_tol,
                "elasticity.rel_tol": run.solid.rel_tol,
                "flow.compatibility": 1e-10,
                "cmb.bisection_log_tol": 1e-10,
                "pareto.tie_tol": TIE_TOL,
                "argmin.delta_tol": "1e-9*|tau| + 1e-12",
            },
            "outputs": self.outputs,
            "resolved_config": self.cfg.resolved(),
        }
        if extra:
            doc.update(extra)
        with open(self.path(MANIFEST), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=str)


def _f(x):
    return repr(float(x))


def _write_objectives(path, designs, ids=None, front=None):
    """shape_id, c_1..c_n, J_E, J_R, PoF[, is_nondominated]"""
    n = len(designs[0].coefficients) if designs else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["shape_id"] + [f"c_{i + 1}" for i in range(n)] + ["J_E", "J_R", "PoF"]
                   + (["is_nondominated"] if front is not None else []))
        for k, d in enumerate(designs):
            row = [k if ids is None else ids[k]] + [_f(c) for c in d.coefficients]
            row += [_f(v) for v in d.objectives.values] + [_f(d.provenance.get("pof", math.nan))]
            if front is not None:
                row.append(int(front[k]))
            w.writerow(row)


# ---------------------------------------------------------------------------
# commands

def cmd_evaluate(run: Run):
    cfg = run.cfg
    coeffs = cfg.evaluate.coefficients or (tuple(0.0 for _ in range(cfg.run.shape_space.n_modes)),)
    designs = evaluate_many(coeffs, cfg.run, run.workers)
    p = run.path("objectives.csv")
    _write_objectives(p, designs)
    run.stamp(p)
    return {"n_shapes": len(designs)}


def _pool(run: Run) -> DesignPool:
    return build_pool(run.cfg.run, run.workers, seed=run.seed)


def cmd_pareto(run: Run):
    pool = _pool(run)
    nd = nondominated_mask(pool.objective_matrix())
    p = run.path("pool.csv")
    _write_objectives(p, pool.designs, front=nd)
    run.stamp(p)
    idx = np.flatnonzero(nd)
    order = idx[np.lexsort(pool.objective_matrix()[idx].T[::-1])]  # by J_E, then J_R
    p = run.path("front.csv")
    _write_objectives(p, [pool[i] for i in order], ids=[int(i) for i in order])
    run.stamp(p)
    if not front_maximality_check(pool):
        raise InfeasibleProblem("front maximality check failed")
    return {"pool_size": len(pool), "front_size": int(nd.sum()), "front_maximal": True}


def cmd_scalarize(run: Run):
    cfg = run.cfg
    sc = cfg.scalarization
    n = cfg.run.shape_space.n_modes
    if sc.mode == "pool":
        pipeline = _pool(run)
        n_coeff = None
    else:
        pipeline = lambda c: evaluate_coefficients(c, cfg.run)  # noqa: E731
        n_coeff = n

    def spec(theta):
        return ScalarizationSpec(sc.method, sc.effective(theta), sc.index)

    ref_theta = sc.reference if sc.reference is not None else sc.thetas[len(sc.thetas) // 2]
    try:
        ref = solve_scalarized(spec(ref_theta), pipeline, sc.search, n_coeff)
    except InfeasibleProblem:
        ref = None
    rows, taus, infeasible = [], [], 0
    for theta in sc.thetas:
        try:
            am = solve_scalarized(spec(theta), pipeline, sc.search, n_coeff)
        except InfeasibleProblem:
            infeasible += 1
            taus.append(INFEASIBLE)
            rows.append((theta, INFEASIBLE, 0, math.nan, math.nan, ""))
            continue
        taus.append(am.optimal_value)
        if ref is None:
            dh = dc = math.nan
        else:
            dh = excess(am.members, ref.members, shape_distance)
            dc = excess(am.members, ref.members, coefficient_distance)
        ids = ""
        if isinstance(pipeline, DesignPool):
            keys = [d.coefficients for d in pipeline]
            ids = ";".join(str(keys.index(d.coefficients)) for d in am.members)
        rows.append((theta, am.optimal_value, len(am), dh, dc, ids))
    chain = sc.method == "epsilon_constraint"
    monotone = [True] + [b >= a for a, b in zip(taus, taus[1:])]
    p = run.path("sweep.csv")
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta_{i + 1}" for i in range(len(sc.thetas[0]))]
                   + ["tau", "argmin_size", "d_H", "coeff_dist", "tau_monotone", "argmin_ids"])
        for (theta, tau, size, dh, dc, ids), mono in zip(rows, monotone):
            w.writerow([_f(t) for t in theta] + [_f(tau), size, _f(dh), _f(dc),
                                                 int(mono) if chain else "", ids])
    run.stamp(p)
    extra = {"reference_theta": list(ref_theta), "infeasible_thetas": infeasible}
    if chain:
        extra["tau_monotone"] = all(monotone)
    if chain and isinstance(pipeline, DesignPool):
        rep = epsilon_monotonicity(sc.index, sc.thetas, pipeline) if _nonincreasing(sc) else None
        if rep is not None:
            extra["epsilon_nested"] = rep.nested
    return extra


def _nonincreasing(sc):
    th = np.asarray(sc.thetas)
    others = np.arange(th.shape[1]) != sc.index
    return bool(np.all(np.diff(th[:, others], axis=0) <= 0))


def _first_shape(cfg: Config):
    c = cfg.evaluate.coefficients[0] if cfg.evaluate.coefficients else np.zeros(cfg.run.shape_space.n_modes)
    return realize_shape(cfg.run.shape_space, c)


def cmd_mesh_dump(run: Run):
    cfg = run.cfg
    shape = _first_shape(cfg)
    h = cfg.run.h
    for region, m in (("fluid", mesh_fluid(shape, h)), ("solid", mesh_solid(shape, h))):
        for p in write_mesh_csv(m, run.path(region)):
            run.stamp(p)
    p = run.path("boundary.csv")
    boundary_geometry(shape, resolution_for(shape.config, h)).to_csv(p)
    run.stamp(p)
    return {}


def cmd_flow_dump(run: Run):
    st = coupled_run(_first_shape(run.cfg), run.cfg.run.flow, run.cfg.run.solid, run.cfg.run.h)
    p = run.path("flow.csv")
    write_flow_csv(p, st.flow)
    run.stamp(p)
    return {"flow_residual": st.flow.residual}


def cmd_elast_dump(run: Run):
    st = coupled_run(_first_shape(run.cfg), run.cfg.run.flow, run.cfg.run.solid, run.cfg.run.h)
    p = run.path("elasticity.csv")
    write_elasticity_csv(p, st.solid)
    run.stamp(p)
    return {"solid_residual": st.solid.residual}


COMMANDS = {"evaluate": cmd_evaluate, "pareto": cmd_pareto, "scalarize": cmd_scalarize,
            "mesh-dump": cmd_mesh_dump, "flow-dump": cmd_flow_dump, "elast-dump": cmd_elast_dump}


def build_parser():
    ap = argparse.ArgumentParser(prog="pareto-shape", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML run configuration")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--workers", type=int, default=None,
                       help="worker processes (PARETO_SHAPE_WORKERS overrides)")
        p.add_argument("--seed", type=int, default=None, help="pool sampling seed")
    return ap


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
    except ParetoShapeError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    if args.seed is not None:
        pool = dataclasses.replace(cfg.run.pool, seed=args.seed)
        cfg = dataclasses.replace(cfg, run=dataclasses.replace(cfg.run, pool=pool))
    run = Run(args.command, cfg, args.out, resolve_workers(args.workers), cfg.run.pool.seed, argv)
    try:
        extra = COMMANDS[args.command](run)
    except ParetoShapeError as e:
        run.manifest("failed", f"{type(e).__name__}: {e}")
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # unexpected: still leave a manifest behind
        run.manifest("failed", f"{type(e).__name__}: {e}")
        traceback.print_exc()
        return 3
    run.manifest("ok", extra=extra)
    print(f"{args.command}: wrote {', '.join(run.outputs)} and {MANIFEST} to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
