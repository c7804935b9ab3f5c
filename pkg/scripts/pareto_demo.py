"""Sample a design pool, print its nondominated front and write pool/front CSVs.

    python3 scripts/pareto_demo.py --size 40 --h 0.2 --out out/pareto
"""
import argparse
import dataclasses
import os

import numpy as np

from pareto_shape.multicrit import front_maximality_check, nondominated_mask, write_front_csv
from pareto_shape.pipeline import PoolConfig, RunConfig, build_pool


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=40)
    ap.add_argument("--h", type=float, default=0.2)
    ap.add_argument("--amplitude", type=float, default=0.02)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", default="out/pareto")
    args = ap.parse_args()

    run = dataclasses.replace(RunConfig(h=args.h),
                              pool=PoolConfig(size=args.size, amplitude=args.amplitude, seed=args.seed))
    pool = build_pool(run, args.workers)
    Y = pool.objective_matrix()
    nd = nondominated_mask(Y)
    order = np.flatnonzero(nd)[np.argsort(Y[nd, 0])]
    print(f"{len(pool)} designs, {nd.sum()} nondominated, maximality {front_maximality_check(pool)}")
    print(f"{'id':>4} {'J_E':>10} {'J_R':>11}  coefficients")
    for i in order:
        c = " ".join(f"{x:+.4f}" for x in pool[i].coefficients)
        print(f"{i:4d} {Y[i, 0]:10.6f} {Y[i, 1]:11.4e}  {c}")
    r = np.corrcoef(Y.T)[0, 1]
    print(f"correlation(J_E, J_R) over the pool: {r:+.2f}")
    os.makedirs(args.out, exist_ok=True)
    write_front_csv(os.path.join(args.out, "pool.csv"), pool)


if __name__ == "__main__":
    main()
