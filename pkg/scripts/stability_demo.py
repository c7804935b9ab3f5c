"""Argmin stability on a fixed pool: weighted-sum sweep towards theta* and an epsilon chain.

    python3 scripts/stability_demo.py --size 60 --h 0.2
"""
import argparse
import math

import numpy as np

from pareto_shape.multicrit import DesignPool, EvaluatedDesign
from pareto_shape.objectives import ObjectiveVector
from pareto_shape.pipeline import RunConfig, build_pool
from pareto_shape.scalarization import (epsilon_monotonicity, solve_scalarized, stability_radius,
                                        stability_sweep, weighted_sum)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=60)
    ap.add_argument("--h", type=float, default=0.2)
    ap.add_argument("--seed", type=int, default=11)
    ap.add_argument("--theta", type=float, nargs=2, default=[0.5, 0.5])
    ap.add_argument("--scale", type=float, nargs=2, default=[0.22, 2e-7])
    args = ap.parse_args()

    raw = build_pool(RunConfig(h=args.h), size=args.size, seed=args.seed)
    scale = np.asarray(args.scale)
    pool = DesignPool(EvaluatedDesign(d.shape, ObjectiveVector(tuple(np.array(d.objectives.values) / scale)))
                      for d in raw)
    limit = weighted_sum(args.theta)
    ref = solve_scalarized(limit, pool)
    r = stability_radius(limit, pool)
    print(f"theta* = {limit.theta}: tau = {ref.optimal_value:.6f}, |argmin| = {len(ref)}, radius = {r:.3e}")
    offsets = [0.4 / 2 ** k for k in range(16)]
    pts = stability_sweep([weighted_sum((args.theta[0] + o, args.theta[1] - o)) for o in offsets], limit, pool)
    print(f"{'offset':>10} {'tau':>10} {'|argmin|':>8} {'d_H':>11} {'coeff':>10}")
    for o, p in zip(offsets, pts):
        print(f"{o:10.3e} {p.tau:10.6f} {p.size:8d} {p.deviation:11.4e} {p.coefficient_deviation:10.4e}")

    jr = np.sort(pool.objective_matrix()[:, 1])
    chain = [(math.inf, e) for e in np.quantile(jr, np.linspace(1.0, 0.0, 10)) - 1e-12]
    rep = epsilon_monotonicity(0, chain, pool)
    print("epsilon chain (minimize J_E subject to J_R <= eps):")
    for (_, e), tau, n in zip(chain, rep.taus, rep.feasible_counts):
        print(f"  eps={e:.4f} feasible={n:3d} tau={tau:.6f}")
    print(f"monotone={rep.monotone} nested={rep.nested} first infeasible={rep.infeasible_from}")


if __name__ == "__main__":
    main()
