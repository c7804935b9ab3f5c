"""Mesh-convergence study: manufactured flow, Lame cylinder, and the baseline objectives vs h.

    python3 scripts/convergence_study.py --out out/convergence
"""
import argparse
import csv
import math
import os
import time

import numpy as np

from pareto_shape.elasticity import ElasticityProblem, solve_elasticity
from pareto_shape.fem import TRI_DEG5, p2_basis
from pareto_shape.geometry import Shroud
from pareto_shape.mesh import mesh_channel, refine_uniform, triangulate_pslg
from pareto_shape.pipeline import RunConfig, evaluate_coefficients
from pareto_shape.potential_flow import solve_neumann


def flow_errors(levels=4):
    ex = lambda p: np.cos(np.pi * p[..., 0]) * np.cosh(np.pi * p[..., 1])  # noqa: E731

    def flux(p, n, tag):
        x, y = p[..., 0], p[..., 1]
        g = np.stack([-np.pi * np.sin(np.pi * x) * np.cosh(np.pi * y),
                      np.pi * np.cos(np.pi * x) * np.sinh(np.pi * y)], -1)
        return np.einsum("...i,...i->...", g, n)

    m = mesh_channel(Shroud(corner_radius=0.0), 0.4)
    rows = []
    for _ in range(levels):
        phi, _, _ = solve_neumann(m, flux)
        sp = phi.space
        ref, w = TRI_DEG5
        d = np.einsum("qa,ta->tq", p2_basis(ref), phi.values[sp.cells]) - ex(sp.physical_points(ref))
        det = sp.geometry(ref)[1]
        d -= np.einsum("q,tq,tq->", w, det, d) / np.einsum("q,tq->", w, det)
        rows.append((m.h_max, sp.n_dofs, float(np.sqrt(np.einsum("q,tq,tq->", w, det, d * d)))))
        m = refine_uniform(m)
    return rows


def annulus(a, b, h):
    loops, tags, segs, n0 = [], [], [], 0
    for r, tag in ((b, "component"), (a, "clamp")):
        n = max(16, math.ceil(2 * math.pi * r / (0.9 * h)))
        t = 2 * math.pi * np.arange(n) / n
        loops.append(r * np.c_[np.cos(t), np.sin(t)])
        segs.append(np.c_[n0 + np.arange(n), n0 + (np.arange(n) + 1) % n])
        tags += [tag] * n
        n0 += n
    return triangulate_pslg(np.concatenate(loops), np.concatenate(segs), tags, [(0.0, 0.0)], h, "solid")


def lame_errors(hs=(0.1, 0.05, 0.025), a=0.2, b=0.5, lam=2.0, mu=1.5):
    A = -1.0 / (2 * (lam + mu) + 2 * mu * a * a / (b * b))
    rows = []
    for h in hs:
        s = solve_elasticity(ElasticityProblem(annulus(a, b, h), lam, mu, traction=lambda x, n, t: -n))
        X = s.space.nodes
        r = np.linalg.norm(X, axis=1)
        ur = np.einsum("ij,ij->i", s.displacement.values, X / r[:, None])
        exact = A * r - A * a * a / r
        rows.append((h, s.space.n_dofs, float(np.abs(ur - exact).max() / np.abs(exact).max())))
    return rows


def objective_rows(hs):
    rows = []
    for h in hs:
        t = time.perf_counter()
        d = evaluate_coefficients(np.zeros(4), RunConfig(h=h))
        rows.append((h, *d.objectives.values, d.provenance["pof"], time.perf_counter() - t))
    return rows


def dump(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/convergence")
    ap.add_argument("--hs", type=float, nargs="+", default=[0.2, 0.1, 0.05])
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    fr = flow_errors()
    print("flow, manufactured harmonic potential")
    for (h, n, e), prev in zip(fr, [None] + fr[:-1]):
        rate = "" if prev is None else f"{math.log2(prev[2] / e):6.2f}"
        print(f"  h={h:.4f} dofs={n:6d} L2={e:.3e} {rate}")
    dump(os.path.join(args.out, "flow.csv"), ["h_max", "dofs", "l2_error"], fr)

    lr = lame_errors()
    print("Lame cylinder, relative max radial displacement error")
    for h, n, e in lr:
        print(f"  h={h:.4f} dofs={n:6d} err={e:.3e}")
    dump(os.path.join(args.out, "lame.csv"), ["h", "dofs", "rel_error"], lr)

    orows = objective_rows(args.hs)
    print("baseline objectives")
    for h, je, jr, pof, sec in orows:
        print(f"  h={h:.3f} J_E={je:.6f} J_R={jr:.4e} PoF={pof:.4e} ({sec:.1f} s)")
    dump(os.path.join(args.out, "objectives.csv"), ["h", "J_E", "J_R", "PoF", "seconds"], orows)


if __name__ == "__main__":
    main()
