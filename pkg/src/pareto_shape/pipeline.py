"""Shape -> (J_E, J_R) evaluation and design-pool construction."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .elasticity import FlowConfig, SolidConfig, coupled_run
from .errors import NormBoundViolation, ParetoShapeError, SelfIntersection
from .geometry import Baseline, ClampDisc, ShapeSpaceConfig, Shroud, realize_shape
from .multicrit import DesignPool, EvaluatedDesign
from .objectives import (FluidLossModel, ObjectiveVector, ReliabilityModel, friction_loss,
                         reliability_functional)


def default_shape_space():
    """Circular component rooted in the lower shroud wall, clamped inside the root."""
    return ShapeSpaceConfig(Baseline("circle", (0.0, -1.05), 0.45), Shroud(),
                            clamp_disc=ClampDisc((0.0, -1.1), 0.05), collar=0.5, norm_bound=20.0)


@dataclass(frozen=True)
class PoolConfig:
    size: int = 25
    amplitude: float = 0.02  # coefficients drawn uniformly from [-a, a]
    seed: int = 0
    include_baseline: bool = True
    max_draws: int = 10000


@dataclass(frozen=True)
class RunConfig:
    shape_space: ShapeSpaceConfig = field(default_factory=default_shape_space)
    h: float = 0.1
    flow: FlowConfig = FlowConfig(inflow_speed=1.0, density=1.0, stagnation_pressure=1.0)
    solid: SolidConfig = SolidConfig(lame_lambda=28.846153846153847, lame_mu=19.23076923076923)
    reliability: ReliabilityModel = ReliabilityModel()
    fluidloss: FluidLossModel = FluidLossModel()
    pool: PoolConfig = PoolConfig()


def evaluate_shape(shape, run: RunConfig) -> EvaluatedDesign:
    st = coupled_run(shape, run.flow, run.solid, run.h)
    j_e = friction_loss(st.flow, st.boundary, run.fluidloss)
    j_r, pof = reliability_functional(st.solid, st.boundary, run.reliability)
    prov = {"h": run.h, "pof": pof, "flow_residual": st.flow.residual,
            "solid_residual": st.solid.residual, "fluid_mesh": st.flow.mesh.provenance,
            "solid_mesh": st.solid.mesh.provenance, "kinematics": "plane strain",
            "norm_estimate": shape.norm_estimate}
    return EvaluatedDesign(shape, ObjectiveVector((j_e, j_r)), prov)


def evaluate_coefficients(coefficients, run: RunConfig) -> EvaluatedDesign:
    return evaluate_shape(realize_shape(run.shape_space, coefficients), run)


def sample_pool_coefficients(run: RunConfig, size=None, seed=None):
    """Admissible coefficient vectors: baseline first, then uniform draws that pass the
    shape checks, in draw order.  A zero amplitude only ever draws the baseline, so the
    pool collapses to that single design."""
    cfg = run.pool
    size = cfg.size if size is None else size
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    n = run.shape_space.n_modes
    out = [np.zeros(n)] if cfg.include_baseline and size > 0 else []
    seen = {tuple(c) for c in out}
    if cfg.amplitude == 0:
        return out[:1] if out else [np.zeros(n)]
    draws = 0
    while len(out) < size:
        if draws >= cfg.max_draws:
            raise RuntimeError(f"only {len(out)} admissible shapes after {draws} draws")
        draws += 1
        c = rng.uniform(-cfg.amplitude, cfg.amplitude, n)
        if tuple(c) in seen:
            continue
        try:
            realize_shape(run.shape_space, c)
        except (NormBoundViolation, SelfIntersection):
            continue
        seen.add(tuple(c))
        out.append(c)
    return out


def resolve_workers(workers=None):
    env = os.environ.get("PARETO_SHAPE_WORKERS")
    if env:
        return max(1, int(env))
    return max(1, int(workers or 1))


def _eval_task(args):
    i, c, run = args
    try:
        return evaluate_coefficients(c, run)
    except ParetoShapeError as e:
        raise with_shape_context(e, i) from e


def with_shape_context(exc, shape_id):
    """Same exception type, message prefixed with the shape id."""
    try:
        return type(exc)(f"shape {shape_id}: {exc}")
    except TypeError:
        return exc


def evaluate_many(coefficients, run: RunConfig, workers=1):
    """Evaluations in input order; worker processes do not change the results."""
    tasks = [(i, np.asarray(c, float), run) for i, c in enumerate(coefficients)]
    if workers <= 1 or len(tasks) <= 1:
        return [_eval_task(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_eval_task, tasks))


def build_pool(run: RunConfig, workers=1, size=None, seed=None) -> DesignPool:
    return DesignPool(evaluate_many(sample_pool_coefficients(run, size, seed), run, workers))
