import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pareto_shape.elasticity import (ElasticityProblem, coupled_run,
                                     lame_from_young, solve_elasticity, stress_from_gradient,
                                     von_mises, young_modulus)
from pareto_shape.errors import MissingClamp
from pareto_shape.fem import TRI_DEG5, P2Space, PatchRecovery, p2_basis
from pareto_shape.geometry import Shroud, realize_shape
from pareto_shape.mesh import mesh_channel, refine_uniform, triangulate_pslg
from pareto_shape.multicrit import EvaluatedDesign
from pareto_shape.objectives import ObjectiveVector
from pareto_shape.pipeline import evaluate_coefficients
from pareto_shape.scalarization import shape_distance

from conftest import annulus_mesh

LAM, MU = 2.0, 1.5


def square_mesh(h, names=("inlet", "component", "wall", "clamp"), n=4):
    V = np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]])
    pts, tags = [], []
    for k in range(4):
        a, b = V[k], V[(k + 1) % 4]
        for t in np.linspace(0, 1, n + 1)[:-1]:
            pts.append(a + (b - a) * t)
            tags.append(names[k])
    m = len(pts)
    segs = np.c_[np.arange(m), (np.arange(m) + 1) % m]
    return triangulate_pslg(np.array(pts), segs, tags, [], h, "solid")


def test_zero_loads_give_zero_displacement():
    sol = solve_elasticity(ElasticityProblem(square_mesh(0.25), LAM, MU))
    assert np.all(sol.displacement.values == 0)
    assert np.all(sol.stress == 0)


def test_missing_clamp():
    m = mesh_channel(Shroud(corner_radius=0.0), 0.5)
    with pytest.raises(MissingClamp):
        solve_elasticity(ElasticityProblem(m, LAM, MU, traction=lambda p, n, t: n))
    with pytest.raises(MissingClamp):
        solve_elasticity(ElasticityProblem(m, LAM, MU, supports={}))


def test_patch_test_constant_stress():
    # x = 0 face: u_x = 0 ("clamp"); y = 0 face: u_y = 0; uniform normal traction p on x = 1
    p = 0.7
    prob = ElasticityProblem(square_mesh(0.25), LAM, MU, traction=lambda P, N, t: p * N,
                             supports={"clamp": (0,), "inlet": (1,)})
    s = solve_elasticity(prob)
    assert np.abs(s.stress[:, 0, 0] - p).max() < 1e-8
    assert np.abs(s.stress[:, 1, 1]).max() < 1e-8
    assert np.abs(s.stress[:, 0, 1]).max() < 1e-8
    # plane strain: sigma_zz = nu * (sigma_xx + sigma_yy)
    nu = LAM / (2 * (LAM + MU))
    assert np.abs(s.stress[:, 2, 2] - nu * p).max() < 1e-8


def lame_exact(r, a, b, P, lam, mu):
    """Radial displacement of an annulus clamped at r = a under outer pressure P."""
    A = -P / (2 * (lam + mu) + 2 * mu * a ** 2 / b ** 2)
    return A * r - A * a ** 2 / r


@pytest.mark.slow
def test_lame_cylinder():
    a, b, P = 0.2, 0.5, 1.0
    errs = []
    for h in (0.1, 0.05, 0.025):
        s = solve_elasticity(ElasticityProblem(annulus_mesh(a, b, h), LAM, MU,
                                               traction=lambda x, n, t: -P * n))
        X = s.space.nodes
        r = np.linalg.norm(X, axis=1)
        ur = np.einsum("ij,ij->i", s.displacement.values, X / r[:, None])
        ex = lame_exact(r, a, b, P, LAM, MU)
        errs.append(np.abs(ur - ex).max() / np.abs(ex).max())
        clamp = np.unique(s.space.boundary_edges[s.space.edge_tags == "clamp"])
        assert np.all(s.displacement.values[clamp] == 0)
    assert errs[-1] < 0.01
    assert errs[0] > errs[1] > errs[2]


def manufactured(p, lam, mu):
    x, y = p[..., 0], p[..., 1]
    ss = np.sin(np.pi * x) * np.sin(np.pi * y)
    cc = np.cos(np.pi * x) * np.cos(np.pi * y)
    u = np.stack([ss, ss], -1)
    fc = np.pi ** 2 * (2 * mu * ss - (lam + mu) * (cc - ss))
    return u, np.stack([fc, fc], -1)


@pytest.mark.slow
def test_manufactured_displacement_rate():
    m = square_mesh(0.5, names=("clamp",) * 4, n=2)
    errs = []
    for _ in range(3):
        s = solve_elasticity(ElasticityProblem(m, LAM, MU,
                                               volume_load=lambda x: manufactured(x, LAM, MU)[1]))
        sp_ = s.space
        ref, w = TRI_DEG5
        uh = np.einsum("qa,tai->tqi", p2_basis(ref), s.displacement.values[sp_.cells])
        d = uh - manufactured(sp_.physical_points(ref), LAM, MU)[0]
        errs.append(np.sqrt(np.einsum("q,tq,tqi->", w, sp_.geometry(ref)[1], d * d)))
        m = refine_uniform(m)
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert rates.min() >= 2.5, rates


def test_boundary_hessian_of_quadratic_exact():
    m = annulus_mesh(0.2, 0.5, 0.1)
    sp_ = P2Space(m)
    assert sp_.curved.any()
    x, y = sp_.nodes.T
    U = np.c_[x * x + 2 * x * y - y * y, 3 * x * y + 0.5 * y * y]
    rec = PatchRecovery(sp_)
    H = rec.recover_gradient(rec.recover_gradient(U))
    exact = np.zeros((2, 2, 2))
    exact[0] = [[2, 2], [2, -2]]
    exact[1] = [[0, 3], [3, 1]]
    comp = m.component_nodes if len(m.component_nodes) else np.unique(m.boundary_edges)
    assert np.abs(H[comp] - exact).max() < 1e-6
    assert np.abs(H - exact).max() < 1e-6


def test_stress_helpers():
    E, nu = 50.0, 0.3
    lam, mu = lame_from_young(E, nu)
    assert young_modulus(lam, mu) == pytest.approx(E)
    g = np.array([[1e-3, 0.0], [0.0, 0.0]])
    s = stress_from_gradient(g, lam, mu)
    assert s[0, 0] == pytest.approx((lam + 2 * mu) * 1e-3)
    assert s[1, 1] == pytest.approx(lam * 1e-3) == s[2, 2]
    assert von_mises(np.diag([1.0, 0.0, 0.0])) == pytest.approx(1.0)
    assert von_mises(np.eye(3) * 7) == pytest.approx(0.0, abs=1e-12)


@settings(max_examples=10)
@given(st.floats(0.1, 5.0), st.floats(0.1, 5.0), st.floats(-2, 2))
def test_work_balance(lam, mu, p):
    s = solve_elasticity(ElasticityProblem(annulus_mesh(0.2, 0.5, 0.2), lam, mu,
                                           traction=lambda x, n, t: p * n))
    assert s.external_work == pytest.approx(2 * s.strain_energy, rel=1e-8, abs=1e-300)


@pytest.fixture(scope="module")
def baseline_state(run_cfg):
    shape = realize_shape(run_cfg.shape_space, np.zeros(run_cfg.shape_space.n_modes))
    return shape, coupled_run(shape, run_cfg.flow, run_cfg.solid, run_cfg.h)


def test_coupled_clamp_and_balance(baseline_state):
    _, st_ = baseline_state
    s = st_.solid
    sp_ = s.space
    clamp = np.unique(sp_.boundary_edges[sp_.edge_tags == "clamp"])
    assert len(clamp) and np.all(s.displacement.values[clamp] == 0)
    assert s.external_work == pytest.approx(2 * s.strain_energy, rel=1e-8)
    assert s.residual <= 1e-10 and st_.flow.residual <= 1e-10


def test_no_flow_limit(run_cfg, baseline_state):
    shape, _ = baseline_state
    flow = dataclasses.replace(run_cfg.flow, inflow_speed=0.0)
    st_ = coupled_run(shape, flow, run_cfg.solid, run_cfg.h)
    wet = st_.boundary.wetted_vertices
    assert np.allclose(st_.traction[wet], -flow.stagnation_pressure * st_.boundary.normals[wet],
                       atol=1e-12)
    assert np.abs(st_.solid.displacement.values).max() > 0


def test_coupled_determinism(run_cfg):
    c = np.array([0.01, -0.005, 0.0, 0.008])
    a = evaluate_coefficients(c, run_cfg).objectives
    b = evaluate_coefficients(c, run_cfg).objectives
    assert a.values == b.values


@pytest.mark.slow
def test_displacement_continuity(run_cfg):
    """||u1 - u2||_inf / d_H stays bounded as the perturbation halves."""
    space = run_cfg.shape_space
    c0 = np.array([0.005, -0.004, 0.003, 0.002])
    d0 = np.array([0.008, 0.006, -0.006, 0.004])

    def run(c):
        shape = realize_shape(space, c)
        return shape, coupled_run(shape, run_cfg.flow, run_cfg.solid, run_cfg.h).solid

    s0, u0 = run(c0)
    assert u0.mesh.provenance == "transported"
    ratios = []
    for k in range(1, 4):
        s1, u1 = run(c0 + d0 / 2 ** k)
        assert u1.mesh.provenance == "transported" and len(u1.mesh.nodes) == len(u0.mesh.nodes)
        du = np.abs(u1.displacement.values - u0.displacement.values).max()
        dh = shape_distance(EvaluatedDesign(s0, ObjectiveVector((0, 0))),
                            EvaluatedDesign(s1, ObjectiveVector((0, 0))))
        ratios.append(du / dh)
    assert max(ratios) / min(ratios) < 2.0, ratios
