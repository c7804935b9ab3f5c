"""Friction power loss, LCF failure-probability functional and the generic local cost form."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .elasticity import ElasticitySolution, stress_from_gradient, von_mises
from .errors import NonConvergence
from .fem import EDGE_GAUSS3, TRI_DEG2, p2_basis
from .geometry import BoundaryGeometry
from .potential_flow import FlowSolution

WALL_SHEAR_CONST = 0.322
# Gauss sub-rules per boundary segment; N_det^-m is steep in the stress, one rule is too coarse
SUBDIVISIONS = 4


@dataclass(frozen=True)
class FluidLossModel:
    dynamic_viscosity: float = 1e-3
    kinematic_viscosity: float = 1e-5
    le_clamp: float = 1e-6  # dist_LE floor as a fraction of the perimeter

    def __post_init__(self):
        if not (self.dynamic_viscosity > 0 and self.kinematic_viscosity > 0):
            raise ValueError("viscosities must be positive")


@dataclass(frozen=True)
class CMBParams:
    """Coffin-Manson-Basquin strain-life constants (stress in the units of E)."""

    sigma_f: float = 0.4
    b: float = -0.1
    eps_f: float = 0.2
    c: float = -0.6
    E: float = 50.0

    def strain(self, n):
        two_n = 2.0 * n
        return self.sigma_f / self.E * two_n ** self.b + self.eps_f * two_n ** self.c


@dataclass(frozen=True)
class ReliabilityModel:
    weibull_m: float = 2.0
    cycles: float = 200.0
    cmb: CMBParams = CMBParams()
    notch_length: float = 0.05  # notch-support length scale
    n_max: float = 1e12
    life_model: Optional[Callable] = None  # (stress, stress_grad) -> N_det

    def __post_init__(self):
        if not self.weibull_m > 0:
            raise ValueError("Weibull shape must be positive")
        if self.cycles < 0:
            raise ValueError("cycle count must be nonnegative")

    @property
    def stress_floor(self):
        return 1e-12 * self.cmb.E


@dataclass(frozen=True)
class ObjectiveVector:
    values: tuple
    labels: tuple = ("J_E", "J_R")

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        if not all(np.isfinite(vals)):
            raise ValueError(f"objective values must be finite: {vals}")
        if len(self.labels) != len(vals):
            object.__setattr__(self, "labels", tuple(f"J{i + 1}" for i in range(len(vals))))
        object.__setattr__(self, "values", vals)

    def __len__(self):
        return len(self.values)

    def __getitem__(self, i):
        return self.values[i]

    def as_array(self):
        return np.array(self.values)


# ---------------------------------------------------------------------------
# friction loss

def wall_shear(speed, dist_le, model: FluidLossModel):
    speed = np.asarray(speed, float)
    return (WALL_SHEAR_CONST * model.dynamic_viscosity * speed ** 1.5
            / np.sqrt(model.kinematic_viscosity * np.asarray(dist_le, float)))


def surface_samples(boundary: BoundaryGeometry, *solutions):
    """Per-vertex quantities offered to surface integrands."""
    out = {"x": boundary.vertices, "normal": boundary.normals, "dist_le": boundary.arclength_to_LE}
    for sol in solutions:
        if isinstance(sol, FlowSolution):
            if len(sol.boundary_speed) != len(boundary):
                raise ValueError("flow samples not aligned with the boundary")
            out["speed"] = sol.boundary_speed
        elif isinstance(sol, ElasticitySolution):
            if len(sol.boundary_grad_u) != len(boundary):
                raise ValueError("solid samples not aligned with the boundary")
            lam, mu = sol.lame
            out["grad_u"] = sol.boundary_grad_u
            out["hess_u"] = sol.boundary_hess_u
            out["stress"] = stress_from_gradient(sol.boundary_grad_u, lam, mu)
            out["stress_grad"] = np.stack([stress_from_gradient(sol.boundary_hess_u[..., k], lam, mu)
                                           for k in range(2)], axis=-1)
    return out


def boundary_quadrature(boundary: BoundaryGeometry, samples: dict, integrand, wetted_only=True,
                        subdivisions=SUBDIVISIONS):
    """Composite 3-point Gauss rule over boundary segments.

    Vertex samples are interpolated linearly to the Gauss points, the integrand is
    evaluated there, and segments outside the shroud are skipped.  ``subdivisions``
    splits every segment into equal pieces with a Gauss rule on each."""
    e = boundary.edges
    mask = boundary.wetted if wetted_only else np.ones(len(e), bool)
    e = e[mask]
    if len(e) == 0:
        return 0.0
    length = boundary.edge_lengths[mask]
    t, w = EDGE_GAUSS3
    k = int(subdivisions)
    if k < 1:
        raise ValueError("subdivisions must be >= 1")
    t = ((np.arange(k)[:, None] + t[None, :]) / k).ravel()
    w = np.tile(w, k) / k
    interp = {}
    for key, val in samples.items():
        val = np.asarray(val, float)
        a, b = val[e[:, 0]], val[e[:, 1]]
        tt = t.reshape((1, -1) + (1,) * (val.ndim - 1))
        interp[key] = a[:, None] * (1 - tt) + b[:, None] * tt
    vals = np.broadcast_to(np.asarray(integrand(**interp), float), (len(e), len(t)))
    return float(np.einsum("q,e,eq->", w, length, vals))


def _le_floor(boundary, model):
    return model.le_clamp * boundary.perimeter


def friction_integrand(model: FluidLossModel, le_floor: float):
    def f(speed, dist_le, **_):
        return speed * wall_shear(speed, np.maximum(dist_le, le_floor), model)
    return f


def friction_loss(flow: FlowSolution, boundary: BoundaryGeometry, model: FluidLossModel,
                  subdivisions=SUBDIVISIONS) -> float:
    """J_E: integral of |v| tau_w over the wetted component boundary."""
    val = boundary_quadrature(boundary, surface_samples(boundary, flow),
                              friction_integrand(model, _le_floor(boundary, model)),
                              subdivisions=subdivisions)
    return max(val, 0.0)


# ---------------------------------------------------------------------------
# reliability

def _deviator(s):
    return s - np.trace(s, axis1=-2, axis2=-1)[..., None, None] * np.eye(3) / 3


def von_mises_gradient(stress, stress_grad):
    """grad of the von Mises stress from the stress tensor and its gradient (..., 3, 3, 2)."""
    s = _deviator(stress)
    sv = von_mises(stress)
    ds = np.stack([_deviator(stress_grad[..., k]) for k in range(stress_grad.shape[-1])], axis=-1)
    num = 1.5 * np.einsum("...ij,...ijk->...k", s, ds)
    return np.divide(num, sv[..., None], out=np.zeros_like(num), where=sv[..., None] > 0)


def cmb_life(eps_a, cmb: CMBParams, n_max=1e12, n_min=0.5, rel_tol=1e-10):
    """Invert the strain-life curve for N by bisection on log N (vectorized)."""
    eps_a = np.asarray(eps_a, float)
    out = np.full(eps_a.shape, float(n_max))
    if np.any(~np.isfinite(eps_a)) or np.any(eps_a < 0):
        raise NonConvergence("strain amplitude must be finite and nonnegative")
    active = eps_a > cmb.strain(n_max)
    if not active.any():
        return out
    if np.any(eps_a[active] > cmb.strain(n_min)):
        raise NonConvergence("strain amplitude above the low-cycle end of the strain-life curve")
    ea = eps_a[active]
    lo = np.full(ea.shape, np.log(n_min))
    hi = np.full(ea.shape, np.log(n_max))
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        above = cmb.strain(np.exp(mid)) > ea  # curve still above target: N is larger
        lo = np.where(above, mid, lo)
        hi = np.where(above, hi, mid)
        if np.all(hi - lo <= rel_tol):
            break
    else:
        raise NonConvergence("bisection did not reach tolerance")
    out[active] = np.exp(0.5 * (lo + hi))
    return out


def default_life(stress, stress_grad, model: ReliabilityModel):
    sv = von_mises(stress)
    chi = np.linalg.norm(von_mises_gradient(stress, stress_grad), axis=-1) / np.maximum(sv, model.stress_floor)
    n_chi = 1.0 + np.sqrt(chi * model.notch_length)
    eps_a = sv / (n_chi * model.cmb.E)
    return cmb_life(eps_a, model.cmb, model.n_max)


def deterministic_life(stress, stress_grad, model: ReliabilityModel):
    """N_det at each sample: stress (..., 3, 3), stress_grad (..., 3, 3, 2)."""
    stress = np.asarray(stress, float)
    stress_grad = np.asarray(stress_grad, float)
    if not (np.all(np.isfinite(stress)) and np.all(np.isfinite(stress_grad))):
        raise ValueError("non-finite stress input")
    rule = model.life_model or (lambda s, g: default_life(s, g, model))
    return np.asarray(rule(stress, stress_grad), float)


def probability_of_failure(j_r, cycles, m):
    return -np.expm1(-np.power(cycles, m) * j_r)


def reliability_integrand(model: ReliabilityModel):
    def f(stress, stress_grad, **_):
        return deterministic_life(stress, stress_grad, model) ** (-model.weibull_m)
    return f


def reliability_functional(solid: ElasticitySolution, boundary: BoundaryGeometry,
                           model: ReliabilityModel, subdivisions=SUBDIVISIONS):
    """(J_R, PoF(t)) with J_R the integral of N_det^-m over the wetted boundary."""
    j_r = max(boundary_quadrature(boundary, surface_samples(boundary, solid),
                                  reliability_integrand(model), subdivisions=subdivisions), 0.0)
    return j_r, float(probability_of_failure(j_r, model.cycles, model.weibull_m))


# ---------------------------------------------------------------------------
# generic local cost functional

def local_cost_functional(boundary: BoundaryGeometry, fields=(), F_vol=None, F_sur=None):
    """Volume integral of F_vol over the mesh of the first field plus a surface integral of
    F_sur over the wetted component boundary.

    ``F_vol(x, value, grad)`` receives the primary unknown (phi or u) and its gradient at
    3 Gauss points per cell; ``F_sur(**samples)`` receives the interpolated samples of
    :func:`surface_samples`.
    """
    fields = fields if isinstance(fields, (tuple, list)) else (fields,)
    total = 0.0
    if F_vol is not None:
        if not fields:
            raise ValueError("a volume integrand needs a solution field")
        sol = fields[0]
        prim = sol.phi if isinstance(sol, FlowSolution) else sol.displacement
        space = prim.space
        ref, w = TRI_DEG2
        N = p2_basis(ref)
        x = space.physical_points(ref)
        v = np.einsum("qa,ta...->tq...", N, prim.values[space.cells])
        dv = space.sample_gradients(prim.values, ref)
        det = space.geometry(ref)[1]
        total += float(np.einsum("q,tq,tq->", w, det, np.asarray(F_vol(x, v, dv), float)
                                 * np.ones(x.shape[:2])))
    if F_sur is not None:
        total += boundary_quadrature(boundary, surface_samples(boundary, *fields), F_sur)
    return total
