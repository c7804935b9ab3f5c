"""Plane-strain linear elasticity of the component and the one-way fluid to solid coupling."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import MissingClamp
from .fem import EDGE_GAUSS3, Field, P2Space, PatchRecovery, solve_sparse
from .geometry import Shape, boundary_geometry, resolution_for
from .mesh import Mesh, mesh_fluid, mesh_solid
from .potential_flow import (FlowProblem, FlowSolution, solve_flow, static_pressure,
                             traction_from_pressure, uniform_inflow)

TractionFn = Callable[[np.ndarray, np.ndarray, str], np.ndarray]


def lame_from_young(E, nu):
    return E * nu / ((1 + nu) * (1 - 2 * nu)), E / (2 * (1 + nu))


def young_modulus(lam, mu):
    return mu * (3 * lam + 2 * mu) / (lam + mu)


@dataclass(frozen=True, eq=False)
class ElasticityProblem:
    """Loads: ``traction`` is either one vector per boundary-geometry vertex (applied on
    component edges, linear along each edge) or a callable ``(points, normals, tag)``
    applied on ``traction_tags``.  ``supports`` maps a tag to the clamped components."""

    mesh: Mesh
    lame_lambda: float
    lame_mu: float
    volume_load: Optional[Callable[[np.ndarray], np.ndarray]] = None
    traction: Union[np.ndarray, TractionFn, None] = None
    supports: dict = field(default_factory=lambda: {"clamp": (0, 1)})
    traction_tags: tuple = ("component",)
    rel_tol: float = 1e-10

    def __post_init__(self):
        if not (self.lame_lambda > 0 and self.lame_mu > 0):
            raise ValueError("Lame constants must be positive")


@dataclass(frozen=True, eq=False)
class ElasticitySolution:
    displacement: Field
    grad_u: np.ndarray  # (n_dofs, 2, 2), [i, c, j] = d u_c / d x_j, recovered
    hess_u: np.ndarray  # (n_dofs, 2, 2, 2), recovered twice
    stress: np.ndarray  # (n_dofs, 3, 3), plane strain, from the recovered gradient
    boundary_grad_u: np.ndarray  # per boundary-geometry vertex
    boundary_hess_u: np.ndarray
    residual: float
    external_work: float  # F . u
    strain_energy: float  # u . K u / 2
    lame: tuple
    mesh: Mesh = field(repr=False)

    @property
    def space(self):
        return self.displacement.space

    def boundary_stress(self):
        comp = self.mesh.component_nodes
        return self.stress[comp]


def stress_from_gradient(grad, lam, mu):
    """Plane-strain Cauchy stress (..., 3, 3) from in-plane displacement gradients (..., 2, 2)."""
    eps = 0.5 * (grad + np.swapaxes(grad, -1, -2))
    tr = eps[..., 0, 0] + eps[..., 1, 1]
    out = np.zeros(grad.shape[:-2] + (3, 3))
    out[..., :2, :2] = 2 * mu * eps
    for k in range(3):
        out[..., k, k] += lam * tr
    return out


def von_mises(stress):
    s = stress - np.trace(stress, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) / 3
    return np.sqrt(1.5 * np.einsum("...ij,...ij->...", s, s))


def _traction_samples(space: P2Space, problem: ElasticityProblem):
    mask = np.isin(space.edge_tags.astype(str), problem.traction_tags)
    if not mask.any() or problem.traction is None:
        return None
    be, pts, normals, ds = space.edge_quadrature(mask)
    if callable(problem.traction):
        vals = np.asarray(problem.traction(pts, normals, problem.traction_tags[0]), float)
        vals = np.broadcast_to(vals, pts.shape)
    else:
        g = np.asarray(problem.traction, float)
        comp = problem.mesh.component_nodes
        owner = np.full(space.n_vertices, -1)
        ok = comp >= 0
        owner[comp[ok]] = np.flatnonzero(ok)
        ia, ib = owner[be[:, 0]], owner[be[:, 1]]
        if np.any(ia < 0) or np.any(ib < 0) or len(g) != len(comp):
            raise ValueError("traction samples are not aligned with the component boundary")
        t, _ = EDGE_GAUSS3
        vals = g[ia][:, None, :] * (1 - t)[None, :, None] + g[ib][:, None, :] * t[None, :, None]
    return space.neumann_vector(vals, be, ds, ncomp=2)


def solve_elasticity(problem: ElasticityProblem) -> ElasticitySolution:
    space = P2Space(problem.mesh)
    fixed = np.zeros((space.n_dofs, 2), bool)
    for tag, comps in (problem.supports or {}).items():
        mask = space.edge_tags == tag
        if not mask.any():
            raise MissingClamp(f"no boundary edges tagged {tag!r}")
        nodes = np.unique(space.boundary_edges[mask])
        fixed[np.ix_(nodes, list(comps))] = True
    if not fixed.any():
        raise MissingClamp("no displacement supports")
    lam, mu = problem.lame_lambda, problem.lame_mu
    K = space.elasticity_stiffness(lam, mu)
    F = np.zeros((space.n_dofs, 2))
    if problem.volume_load is not None:
        F += space.source_vector(problem.volume_load, ncomp=2)
    gvec = _traction_samples(space, problem)
    if gvec is not None:
        F += gvec
    F = F.ravel()
    free = ~fixed.ravel()
    u = np.zeros(2 * space.n_dofs)
    if np.any(F[free]):
        u[free], res = solve_sparse(K[free][:, free], F[free], problem.rel_tol)
    else:
        res = 0.0
    Ku = K @ u
    U = u.reshape(-1, 2)
    rec = PatchRecovery(space)
    grad = rec.recover_gradient(U)
    hess = rec.recover_gradient(grad)
    stress = stress_from_gradient(grad, lam, mu)
    comp = problem.mesh.component_nodes
    return ElasticitySolution(Field(space, U), grad, hess, stress, grad[comp], hess[comp], res,
                              float(F @ u), 0.5 * float(u @ Ku), (lam, mu), problem.mesh)


def write_elasticity_csv(path, solution: ElasticitySolution):
    """One row per P2 node: node, x, y, ux, uy, sxx, syy, sxy, szz, von_mises."""
    space = solution.space
    sv = von_mises(solution.stress)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["node", "x", "y", "ux", "uy", "sxx", "syy", "sxy", "szz", "von_mises"])
        for i in range(space.n_dofs):
            s = solution.stress[i]
            row = (*space.nodes[i], *solution.displacement.values[i], s[0, 0], s[1, 1], s[0, 1],
                   s[2, 2], sv[i])
            w.writerow([i] + [f"{v:.12g}" for v in row])


# ---------------------------------------------------------------------------
# coupling

@dataclass(frozen=True)
class FlowConfig:
    inflow_speed: float = 1.0
    density: float = 1.0
    stagnation_pressure: float = 1.0
    pin: Optional[tuple] = None  # defaults to the inlet midpoint
    rel_tol: float = 1e-10
    outlet_speed: Optional[float] = None  # None balances the inlet flux


@dataclass(frozen=True)
class SolidConfig:
    lame_lambda: float = 1.0
    lame_mu: float = 1.0
    body_force: tuple = (0.0, 0.0)
    rel_tol: float = 1e-10


@dataclass(frozen=True, eq=False)
class CoupledState:
    flow: FlowSolution
    solid: ElasticitySolution
    boundary: object
    pressure: np.ndarray
    traction: np.ndarray


def coupled_run(shape: Shape, flow_cfg: FlowConfig, solid_cfg: SolidConfig, h: float) -> CoupledState:
    """Fluid mesh -> flow -> surface pressure -> traction -> solid mesh -> elasticity.

    Both meshes share the boundary discretization of size ``h``."""
    cfg = shape.config
    boundary = boundary_geometry(shape, resolution_for(cfg, h))
    fm = mesh_fluid(shape, h)
    pin = flow_cfg.pin if flow_cfg.pin is not None else (cfg.shroud.x0, 0.5 * (cfg.shroud.y0 + cfg.shroud.y1))
    g_in = uniform_inflow(fm, flow_cfg.inflow_speed, flow_cfg.outlet_speed)
    fp = FlowProblem(fm, g_in, tuple(pin), flow_cfg.density, flow_cfg.stagnation_pressure,
                     flow_cfg.rel_tol)
    flow = solve_flow(fp)
    p = static_pressure(flow, fp, boundary)
    g = traction_from_pressure(p, boundary)
    sm = mesh_solid(shape, h)
    f = np.asarray(solid_cfg.body_force, float)
    load = None if not np.any(f) else (lambda x: np.broadcast_to(f, x.shape))
    ep = ElasticityProblem(sm, solid_cfg.lame_lambda, solid_cfg.lame_mu, load, g,
                           rel_tol=solid_cfg.rel_tol)
    return CoupledState(flow, solve_elasticity(ep), boundary, p, g)


def coupled_solve(shape: Shape, flow_cfg: FlowConfig, solid_cfg: SolidConfig, h: float = 0.1):
    st = coupled_run(shape, flow_cfg, solid_cfg, h)
    return st.flow, st.solid
