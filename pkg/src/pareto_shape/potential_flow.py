"""Inviscid potential flow in the shroud and the Bernoulli surface load."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .errors import IncompatibleData
from .fem import Field, P2Space, PatchRecovery, solve_sparse
from .geometry import BoundaryGeometry
from .mesh import Mesh

# flux(points (e, q, 2), outward normals (e, q, 2), tag) -> values (e, q)
FluxFn = Callable[[np.ndarray, np.ndarray, str], np.ndarray]


def uniform_inflow(mesh: Mesh, speed: float = 1.0, outlet_speed: Optional[float] = None) -> FluxFn:
    """Plug profile: -U on the inlet and +U * L_in / L_out on the outlet, zero elsewhere.

    An explicit ``outlet_speed`` overrides the balancing value (and may break compatibility)."""
    def length(tag):
        e = mesh.edges_with_tag(tag)
        return float(np.linalg.norm(mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]], axis=1).sum())

    l_in, l_out = length("inlet"), length("outlet")
    if l_in == 0 or l_out == 0:
        raise IncompatibleData("mesh has no inlet or outlet edges")
    out_speed = speed * l_in / l_out if outlet_speed is None else float(outlet_speed)

    def g(points, normals, tag):
        val = {"inlet": -speed, "outlet": out_speed}.get(tag, 0.0)
        return np.full(points.shape[:-1], val)

    return g


@dataclass(frozen=True, eq=False)
class FlowProblem:
    mesh: Mesh
    inflow_profile: Optional[FluxFn] = None  # defaults to uniform_inflow(mesh, 1)
    pin_point: tuple = (-2.0, 0.0)
    density: float = 1.0
    stagnation_pressure: float = 0.0
    rel_tol: float = 1e-10
    flux_tags: tuple = ("inlet", "outlet")

    def profile(self) -> FluxFn:
        return self.inflow_profile if self.inflow_profile is not None else uniform_inflow(self.mesh)


@dataclass(frozen=True, eq=False)
class FlowSolution:
    phi: Field
    velocity: Field
    boundary_speed: np.ndarray  # |v| per boundary-geometry vertex, NaN where not in the fluid mesh
    residual: float
    net_flux: float
    mesh: Mesh = field(repr=False)

    @property
    def space(self):
        return self.phi.space


def _flux_samples(space: P2Space, flux: FluxFn, tags):
    """Edge Gauss-point flux values, zero on edges whose tag is not listed."""
    be, pts, normals, ds = space.edge_quadrature()
    vals = np.zeros(pts.shape[:2])
    for tag in tags:
        mask = space.edge_tags == tag
        if mask.any():
            vals[mask] = np.broadcast_to(np.asarray(flux(pts[mask], normals[mask], tag), float),
                                         vals[mask].shape)
    return be, vals, ds


def solve_neumann(mesh: Mesh, flux: FluxFn, pin_point=None, rel_tol=1e-10, tags=None,
                  source=None, compat_tol=1e-10):
    """-lap(phi) = f with d(phi)/dn = g; the mean-value multiplier removes the constant.

    ``tags`` limits where ``flux`` is sampled (all boundary tags by default).  The
    solution is shifted so that phi(pin_point) = 0 (or has zero mean without a pin).
    """
    space = P2Space(mesh)
    tags = tuple(sorted(set(space.edge_tags))) if tags is None else tuple(tags)
    be, vals, ds = _flux_samples(space, flux, tags)
    net = space.boundary_integral(vals, ds)
    total = space.boundary_integral(np.abs(vals), ds)
    if source is not None:
        fvec = space.source_vector(source)
        net += float(fvec.sum())
        total += float(np.abs(fvec).sum())
    else:
        fvec = 0.0
    if abs(net) > compat_tol * max(1.0, total):
        raise IncompatibleData(f"net boundary flux {net:.3e} does not balance the sources")
    K = space.stiffness()
    b = space.neumann_vector(vals, be, ds) + fvec
    m = space.basis_integrals()
    A = sp.bmat([[K, sp.csr_matrix(m[:, None])], [sp.csr_matrix(m[None, :]), None]], format="csc")
    x, res = solve_sparse(A, np.r_[b, 0.0], rel_tol)
    phi = x[:-1]
    if pin_point is not None:
        phi = phi - float(space.evaluate(phi, np.asarray(pin_point, float)[None, :])[0])
    return Field(space, phi), res, net


def solve_flow(problem: FlowProblem) -> FlowSolution:
    phi, res, net = solve_neumann(problem.mesh, problem.profile(), problem.pin_point,
                                  problem.rel_tol, problem.flux_tags)
    space = phi.space
    grad = PatchRecovery(space).recover_gradient(phi.values)
    velocity = Field(space, grad)
    comp = problem.mesh.component_nodes
    speed = np.full(len(comp), np.nan)
    ok = comp >= 0
    speed[ok] = np.linalg.norm(grad[comp[ok]], axis=1)
    return FlowSolution(phi, velocity, speed, res, net, problem.mesh)


def dirichlet_energy(solution: FlowSolution) -> float:
    """Discrete energy phi^T K phi / 2."""
    v = solution.phi.values
    return 0.5 * float(v @ (solution.space.stiffness() @ v))


def static_pressure(solution: FlowSolution, problem: FlowProblem, boundary: BoundaryGeometry):
    """p_st - rho |v|^2 / 2 on wetted vertices, zero on the rest of the component boundary."""
    speed = solution.boundary_speed
    if len(speed) != len(boundary):
        raise ValueError("flow solution and boundary geometry have different resolutions")
    wet = boundary.wetted_vertices
    out = np.zeros(len(boundary))
    out[wet] = problem.stagnation_pressure - 0.5 * problem.density * speed[wet] ** 2
    return out


def traction_from_pressure(pressure, boundary: BoundaryGeometry):
    return -np.asarray(pressure)[:, None] * boundary.normals


def write_flow_csv(path, solution: FlowSolution):
    """One row per P2 node: node, x, y, phi, vx, vy."""
    space = solution.space
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y", "phi", "vx", "vy"])
        for i, ((x, y), ph, (vx, vy)) in enumerate(zip(space.nodes, solution.phi.values,
                                                      solution.velocity.values)):
            w.writerow([i] + [f"{v:.12g}" for v in (x, y, ph, vx, vy)])
