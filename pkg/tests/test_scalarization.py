import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pareto_shape.errors import InfeasibleProblem
from pareto_shape.multicrit import DesignPool, EvaluatedDesign, nondominated_mask
from pareto_shape.objectives import ObjectiveVector
from pareto_shape.scalarization import (INFEASIBLE, ScalarizationSpec, SearchConfig, argmin_is_pareto,
                                        delta_tol, epsilon_constraint, epsilon_monotonicity,
                                        pattern_search, scalarize, solve_scalarized, stability_radius,
                                        stability_sweep, start_lattice, weighted_sum, write_sweep_csv)

pos_weights = st.tuples(st.floats(0.01, 10), st.floats(0.01, 10))


def random_pool(seed, n=100):
    return DesignPool.from_values(np.random.default_rng(seed).random((n, 2)))


def test_scalarize_examples():
    assert scalarize(weighted_sum((1, 0)), (3, 7)) == 3
    assert scalarize(weighted_sum((0.5, 0.5)), (2, 4)) == 3
    # constrain J_2 <= 5 while minimizing J_1 (index 0)
    assert scalarize(epsilon_constraint(0, (math.inf, 5)), (2, 6)) is INFEASIBLE
    assert scalarize(epsilon_constraint(0, (math.inf, 5)), (2, 5)) == 2


def test_spec_validation():
    with pytest.raises(ValueError):
        ScalarizationSpec("minmax", (1, 1))
    with pytest.raises(ValueError):
        weighted_sum((1, math.nan))
    with pytest.raises(ValueError):
        epsilon_constraint(2, (1, 1))
    with pytest.raises(ValueError):
        ScalarizationSpec("weighted_sum", (2, 0), theta_space=((0, 0), (1, 1)))


def test_pool_single_objective_minima():
    pool = random_pool(0)
    Y = pool.objective_matrix()
    for k, th in enumerate([(1, 0), (0, 1)]):
        am = solve_scalarized(weighted_sum(th), pool)
        assert am.optimal_value == Y[:, k].min()
        assert [d.coefficients for d in am.members] == [pool[int(np.argmin(Y[:, k]))].coefficients]


def test_vacuous_epsilon_equals_unconstrained():
    pool = random_pool(1)
    a = solve_scalarized(epsilon_constraint(1, (2.0, 0.0)), pool)
    b = solve_scalarized(weighted_sum((0, 1)), pool)
    assert a.optimal_value == b.optimal_value and a.coefficients == b.coefficients


def test_infeasible_epsilon():
    with pytest.raises(InfeasibleProblem):
        solve_scalarized(epsilon_constraint(0, (0.0, -1.0)), random_pool(2))


def test_argmin_ties_and_tolerance():
    pool = DesignPool.from_values([(1, 1), (1, 1), (1 + 1e-10, 1), (2, 0.5)])
    am = solve_scalarized(weighted_sum((1, 1)), pool)
    assert len(am) == 3 and am.optimal_value == 2.0
    assert delta_tol(2.0) == pytest.approx(2e-9 + 1e-12)


@given(pos_weights, st.integers(0, 10_000), st.floats(0.1, 100))
def test_positive_weights(th, seed, s):
    pool = random_pool(seed, 30)
    assert argmin_is_pareto(weighted_sum(th), pool)
    a = solve_scalarized(weighted_sum(th), pool)
    b = solve_scalarized(weighted_sum(tuple(s * t for t in th)), pool)
    assert a.coefficients == b.coefficients


def test_argmin_is_pareto_requires_positive_weights():
    with pytest.raises(ValueError):
        argmin_is_pareto(weighted_sum((1, 0)), random_pool(3))


def test_boundary_weight_may_pick_weakly_dominated():
    pool = DesignPool.from_values([(0, 5), (0, 3)])
    am = solve_scalarized(weighted_sum((1, 0)), pool)
    nd = nondominated_mask(pool.objective_matrix())
    assert len(am) == 2 and not nd.all()


@given(st.integers(0, 10_000))
def test_pool_oracle_equivalence(seed):
    pool = random_pool(seed, 40)
    Y = pool.objective_matrix()
    th = np.random.default_rng(seed).random(2)
    am = solve_scalarized(weighted_sum(th), pool)
    vals = Y @ th
    assert am.optimal_value == vals.min()
    assert set(am.coefficients) == {pool[i].coefficients for i in np.flatnonzero(vals <= vals.min() + delta_tol(vals.min()))}


@given(st.integers(0, 10_000))
def test_epsilon_chain_monotone_and_nested(seed):
    rng = np.random.default_rng(seed)
    pool = random_pool(seed, 50)
    eps = np.sort(rng.random(10))[::-1]
    chain = [(math.inf, e) for e in eps]
    rep = epsilon_monotonicity(0, chain, pool)
    assert rep.monotone and rep.nested
    Y = pool.objective_matrix()
    for a, b in zip(chain, chain[1:]):
        assert set(np.flatnonzero(Y[:, 1] <= b[1])) <= set(np.flatnonzero(Y[:, 1] <= a[1]))


def test_epsilon_two_levels_and_infeasible_tail():
    pool = DesignPool.from_values([(1, 3), (2, 2), (3, 1)])
    rep = epsilon_monotonicity(0, [(math.inf, 10), (math.inf, 1.5), (math.inf, 0.5)], pool)
    assert rep.taus == (1.0, 3.0, INFEASIBLE)
    assert rep.monotone and rep.nested and rep.infeasible_from == 2
    with pytest.raises(ValueError):
        epsilon_monotonicity(0, [(math.inf, 1), (math.inf, 2)], pool)


def test_stability_sweep_constant_sequence():
    pool = random_pool(4, 30)
    spec = weighted_sum((0.3, 0.7))
    pts = stability_sweep([spec] * 4, spec, pool)
    assert all(p.deviation == 0 and p.coefficient_deviation == 0 for p in pts)


def test_stability_radius_neighbourhood():
    pool = random_pool(5, 60)
    limit = weighted_sum((0.5, 0.5))
    r = stability_radius(limit, pool)
    assert r > 0
    ref = solve_scalarized(limit, pool).coefficients
    rng = np.random.default_rng(0)
    for _ in range(50):
        th = np.array(limit.theta) + rng.uniform(-r, r, 2)
        assert solve_scalarized(weighted_sum(th), pool).coefficients == ref


def test_sweep_deviation_nonnegative_and_zero_on_subset():
    pool = DesignPool.from_values([(1, 3), (2, 2), (3, 1)], coefficients=[(0.0,), (1.0,), (2.0,)])
    limit = weighted_sum((1, 2))  # unique minimizer (3, 1)
    pts = stability_sweep([weighted_sum((2, 1)), weighted_sum((1, 1.5)), limit], limit, pool)
    assert all(p.deviation >= 0 for p in pts)
    assert pts[0].deviation == 2.0
    assert pts[1].deviation == 0.0 and pts[2].deviation == 0.0


def test_sweep_csv(tmp_path):
    pool = random_pool(6, 20)
    pts = stability_sweep([weighted_sum((1, 1))], weighted_sum((1, 1)), pool)
    p = tmp_path / "s.csv"
    write_sweep_csv(p, pts)
    assert p.read_text().splitlines()[0] == "theta_1,theta_2,tau,argmin_size,d_H,coeff_dist"


def test_start_lattice_deterministic():
    cfg = SearchConfig(bound=0.02, n_starts=3)
    pts = start_lattice(4, cfg)
    assert [p.tolist() for p in pts] == [[0, 0, 0, 0], [0.01, 0, 0, 0], [-0.01, 0, 0, 0]]


def test_pattern_search_quadratic():
    target = np.array([0.004, -0.007])
    f = lambda c: float(((c - target) ** 2).sum())  # noqa: E731
    cfg = SearchConfig(bound=0.02, n_starts=1, min_step=1e-4, max_evals=500)
    cache = pattern_search(f, 2, cfg)
    best = min(cache, key=cache.get)
    assert np.allclose(best, target, atol=0.02 * 1e-4 * 2)
    assert cache == pattern_search(f, 2, cfg)


def test_search_mode_on_synthetic_pipeline():
    def pipeline(c):
        c = np.asarray(c)
        return EvaluatedDesign(tuple(c), ObjectiveVector((float((c ** 2).sum()), float(((c - 0.01) ** 2).sum()))))

    am = solve_scalarized(weighted_sum((1, 0)), pipeline, SearchConfig(n_starts=2), n_coefficients=2)
    assert am.optimal_value == 0.0 and am.coefficients == ((0.0, 0.0),)
    with pytest.raises(ValueError):
        solve_scalarized(weighted_sum((1, 0)), pipeline)
