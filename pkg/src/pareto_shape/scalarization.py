"""Weighted-sum and epsilon-constraint scalarizations, argmin sets and their stability."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (InfeasibleProblem, MeshFailure, NonConvergence, NormBoundViolation,
                     SelfIntersection, SingularSystem)
from .geometry import Shape, hausdorff_distance
from .multicrit import DesignPool, EvaluatedDesign, nondominated_mask
from .objectives import ObjectiveVector

INFEASIBLE = math.inf
METHODS = ("weighted_sum", "epsilon_constraint")
# a candidate that cannot be realized or solved is treated as infeasible by the search
_REJECTED = (NormBoundViolation, SelfIntersection, MeshFailure, SingularSystem, NonConvergence)


@dataclass(frozen=True)
class ScalarizationSpec:
    """``theta``: weights (weighted sum) or bounds eps_i (epsilon constraint; the entry at
    ``index`` is ignored).  ``theta_space`` is an optional closed box (lo, hi)."""

    method: str
    theta: tuple
    index: int = 0
    theta_space: Optional[tuple] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown scalarization method {self.method!r}")
        th = tuple(float(t) for t in self.theta)
        object.__setattr__(self, "theta", th)
        if self.method == "weighted_sum" and not all(math.isfinite(t) for t in th):
            raise ValueError("weights must be finite")
        if self.method == "epsilon_constraint" and not 0 <= self.index < len(th):
            raise ValueError(f"objective index {self.index} out of range")
        if self.theta_space is not None:
            lo, hi = (np.asarray(b, float) for b in self.theta_space)
            if np.any(np.asarray(th) < lo) or np.any(np.asarray(th) > hi):
                raise ValueError("theta lies outside the parameter box")

    def with_theta(self, theta):
        return ScalarizationSpec(self.method, tuple(theta), self.index, self.theta_space)


def weighted_sum(weights) -> ScalarizationSpec:
    return ScalarizationSpec("weighted_sum", tuple(weights))


def epsilon_constraint(index, eps) -> ScalarizationSpec:
    return ScalarizationSpec("epsilon_constraint", tuple(eps), index)


def scalarize(spec: ScalarizationSpec, objectives) -> float:
    """S_theta(J); the epsilon constraint returns INFEASIBLE outside its feasible set."""
    J = np.asarray(objectives.values if isinstance(objectives, ObjectiveVector) else objectives, float)
    th = np.asarray(spec.theta)
    if J.shape != th.shape:
        raise ValueError("objective and parameter vectors differ in length")
    if spec.method == "weighted_sum":
        return float(th @ J)
    others = np.arange(len(J)) != spec.index
    if np.all(J[others] <= th[others]):
        return float(J[spec.index])
    return INFEASIBLE


def _scalarize_matrix(spec, Y):
    Y = np.asarray(Y, float)
    th = np.asarray(spec.theta)
    if spec.method == "weighted_sum":
        return Y @ th
    others = np.arange(Y.shape[1]) != spec.index
    ok = np.all(Y[:, others] <= th[others], axis=1)
    return np.where(ok, Y[:, spec.index], INFEASIBLE)


def delta_tol(tau):
    return 1e-9 * abs(tau) + 1e-12


@dataclass(frozen=True, eq=False)
class ArgminSet:
    members: tuple  # EvaluatedDesign instances within delta_tol of the best value
    optimal_value: float
    evaluated: int = 0

    @property
    def coefficients(self):
        return tuple(d.coefficients for d in self.members)

    def __len__(self):
        return len(self.members)


def _argmin_from(designs, values) -> ArgminSet:
    values = np.asarray(values, float)
    if len(values) == 0 or not np.isfinite(values).any():
        raise InfeasibleProblem("no feasible design")
    tau = float(values.min())
    idx = np.flatnonzero(values <= tau + delta_tol(tau))
    return ArgminSet(tuple(designs[i] for i in idx), tau, len(values))


@dataclass(frozen=True)
class SearchConfig:
    """Compass search from a fixed lattice of starts inside the box |c_i| <= bound."""

    bound: float = 0.02
    n_starts: int = 3
    initial_step: float = 0.5  # as a fraction of the bound
    min_step: float = 1e-3  # as a fraction of the bound
    max_evals: int = 200


def start_lattice(n, cfg: SearchConfig):
    """Origin, then +-bound/2 along each coordinate axis in order."""
    pts = [np.zeros(n)]
    for i in range(n):
        for s in (1.0, -1.0):
            p = np.zeros(n)
            p[i] = 0.5 * s * cfg.bound
            pts.append(p)
    return pts[: max(1, cfg.n_starts)]


def pattern_search(f: Callable, n: int, cfg: SearchConfig):
    """Deterministic multi-start compass search; returns the cache {coefficients: value}."""
    cache = {}

    def evaluate(c):
        key = tuple(np.round(c, 15))
        if key not in cache:
            if len(cache) >= cfg.max_evals:
                return INFEASIBLE
            cache[key] = f(np.asarray(key))
        return cache[key]

    for x in start_lattice(n, cfg):
        fx = evaluate(x)
        step = cfg.initial_step * cfg.bound
        while step >= cfg.min_step * cfg.bound and len(cache) < cfg.max_evals:
            best, fbest = None, fx
            for i in range(n):
                for s in (1.0, -1.0):
                    y = x.copy()
                    y[i] = np.clip(y[i] + s * step, -cfg.bound, cfg.bound)
                    fy = evaluate(y)
                    if fy < fbest:
                        best, fbest = y, fy
            if best is None:
                step *= 0.5
            else:
                x, fx = best, fbest
    return cache


def solve_scalarized(spec: ScalarizationSpec, pipeline, search_cfg: Optional[SearchConfig] = None,
                     n_coefficients: Optional[int] = None) -> ArgminSet:
    """Pool mode when ``pipeline`` is a DesignPool (exhaustive); otherwise ``pipeline`` maps
    a coefficient vector to an EvaluatedDesign and a compass search explores the box."""
    if isinstance(pipeline, DesignPool):
        designs = pipeline.designs
        return _argmin_from(designs, _scalarize_matrix(spec, pipeline.objective_matrix()))
    if n_coefficients is None:
        raise ValueError("search mode needs the number of coefficients")
    cfg = search_cfg or SearchConfig()
    found = {}

    def f(c):
        try:
            d = pipeline(c)
        except _REJECTED:
            return INFEASIBLE
        found[tuple(c)] = d
        return scalarize(spec, d.objectives)

    pattern_search(f, n_coefficients, cfg)
    designs = list(found.values())
    return _argmin_from(designs, [scalarize(spec, d.objectives) for d in designs])


def argmin_is_pareto(spec: ScalarizationSpec, pool: DesignPool) -> bool:
    if spec.method != "weighted_sum" or not all(t > 0 for t in spec.theta):
        raise ValueError("the sufficiency check needs strictly positive weights")
    am = solve_scalarized(spec, pool)
    front = {d.coefficients for d, keep in zip(pool, nondominated_mask(pool.objective_matrix())) if keep}
    return all(d.coefficients in front for d in am.members)


# ---------------------------------------------------------------------------
# stability

def shape_cloud(design: EvaluatedDesign, n=256):
    s = design.shape
    if isinstance(s, Shape):
        return s.boundary_points(np.linspace(0, 2 * np.pi, n, endpoint=False))
    return np.atleast_2d(np.asarray(design.coefficients, float))


def excess(A: Sequence[EvaluatedDesign], B: Sequence[EvaluatedDesign], dist) -> float:
    """sup over a in A of inf over b in B of dist(a, b)."""
    if not A:
        return 0.0
    return max(min(dist(a, b) for b in B) for a in A)


def shape_distance(a: EvaluatedDesign, b: EvaluatedDesign, n=256) -> float:
    if a.coefficients == b.coefficients:
        return 0.0
    return hausdorff_distance(shape_cloud(a, n), shape_cloud(b, n))


def coefficient_distance(a: EvaluatedDesign, b: EvaluatedDesign) -> float:
    return float(np.linalg.norm(np.subtract(a.coefficients, b.coefficients)))


@dataclass(frozen=True)
class SweepPoint:
    theta: tuple
    tau: float
    size: int
    deviation: float  # shape-space excess of the argmin set over the limit argmin set
    coefficient_deviation: float


def stability_sweep(specs: Sequence[ScalarizationSpec], limit: ScalarizationSpec, pipeline,
                    search_cfg=None, n_coefficients=None, dist=shape_distance):
    """Deviation of each argmin set from the argmin set at the limit parameter."""
    ref = solve_scalarized(limit, pipeline, search_cfg, n_coefficients)
    out = []
    for sp_ in specs:
        am = solve_scalarized(sp_, pipeline, search_cfg, n_coefficients)
        out.append(SweepPoint(sp_.theta, am.optimal_value, len(am),
                              excess(am.members, ref.members, dist),
                              excess(am.members, ref.members, coefficient_distance)))
    return out


def stability_radius(spec: ScalarizationSpec, pool: DesignPool) -> float:
    """Radius r (sup-norm in theta) within which the weighted-sum argmin set equals the
    limit's unique minimizer; 0 when the minimizer is not unique."""
    if spec.method != "weighted_sum":
        raise ValueError("stability radius is defined for weighted sums")
    Y = pool.objective_matrix()
    vals = _scalarize_matrix(spec, Y)
    am = _argmin_from(pool.designs, vals)
    if len(am) != 1 or len(vals) == 1:
        return math.inf if len(vals) == 1 else 0.0
    gap = float(np.partition(vals, 1)[1] - am.optimal_value)
    m = float(np.abs(Y).sum(axis=1).max())
    slack = 1e-9 * (abs(am.optimal_value) + gap) + 1e-12
    return max(0.0, (gap - 2 * slack) / (2 * m)) if m > 0 else math.inf


@dataclass(frozen=True)
class EpsilonReport:
    taus: tuple  # INFEASIBLE where no design meets the bounds
    feasible_counts: tuple
    monotone: bool
    nested: bool
    infeasible_from: Optional[int] = None  # first chain position without a feasible design

    def __bool__(self):
        return self.monotone and self.nested


def epsilon_monotonicity(j: int, eps_chain, pool: DesignPool) -> EpsilonReport:
    """tau along a componentwise nonincreasing chain of bounds, plus feasible-set nesting."""
    eps_chain = [np.asarray(e, float) for e in eps_chain]
    for a, b in zip(eps_chain, eps_chain[1:]):
        others = np.arange(len(a)) != j
        if np.any(b[others] > a[others]):
            raise ValueError("epsilon chain must be nonincreasing")
    Y = pool.objective_matrix()
    taus, counts, sets = [], [], []
    first_bad = None
    for k, e in enumerate(eps_chain):
        vals = _scalarize_matrix(epsilon_constraint(j, e), Y)
        feas = np.isfinite(vals)
        sets.append(feas)
        counts.append(int(feas.sum()))
        try:
            taus.append(_argmin_from(pool.designs, vals).optimal_value)
        except InfeasibleProblem:
            taus.append(INFEASIBLE)
            first_bad = k if first_bad is None else first_bad
    monotone = all(b >= a for a, b in zip(taus, taus[1:]))
    nested = all(np.all(~b | a) for a, b in zip(sets, sets[1:]))
    return EpsilonReport(tuple(taus), tuple(counts), monotone, nested, first_bad)


def write_sweep_csv(path, points: Sequence[SweepPoint]):
    """Rows: theta..., tau, argmin size, shape deviation, coefficient deviation."""
    nth = len(points[0].theta) if points else 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"theta_{i + 1}" for i in range(nth)] + ["tau", "argmin_size", "d_H",
                                                              "coeff_dist"])
        for p in points:
            w.writerow([repr(t) for t in p.theta] + [repr(p.tau), p.size, repr(p.deviation),
                                                      repr(p.coefficient_deviation)])
