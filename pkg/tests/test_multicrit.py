import numpy as np
import pytest
from hypothesis import given, strategies as st

from pareto_shape.errors import EmptyPool, LengthMismatch
from pareto_shape.multicrit import (DesignPool, dominates, front_maximality_check, nondominated_mask,
                                    nondominated_set, write_front_csv)
from pareto_shape.objectives import ObjectiveVector

from conftest import brute_dominates, brute_front

# small integer grids make ties and duplicates common
vec2 = st.tuples(st.integers(0, 4), st.integers(0, 4))
pools = st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6)), min_size=1,
                 max_size=40)


def test_dominance_examples():
    assert dominates((1, 2), (2, 3))
    assert not dominates((1, 2), (1, 2))
    assert not dominates((1, 3), (2, 2))
    assert dominates(ObjectiveVector((1, 2)), ObjectiveVector((1, 3)))
    with pytest.raises(LengthMismatch):
        dominates((1, 2), (1, 2, 3))


def test_tie_tolerance():
    assert not dominates((1.0, 2.0), (1.0 + 1e-13, 2.0))
    assert dominates((1.0, 2.0), (1.0 + 1e-9, 2.0))


@given(vec2, vec2, vec2)
def test_strict_partial_order(a, b, c):
    assert not dominates(a, a)
    assert not (dominates(a, b) and dominates(b, a))
    if dominates(a, b) and dominates(b, c):
        assert dominates(a, c)
    assert dominates(a, b) == brute_dominates(a, b)


def test_front_examples():
    pool = DesignPool.from_values([(1, 2), (2, 1), (2, 2)])
    nd = nondominated_set(pool)
    assert sorted(d.objectives.values for d in nd) == [(1.0, 2.0), (2.0, 1.0)]
    single = DesignPool.from_values([(3, 3)])
    assert len(nondominated_set(single)) == 1
    with pytest.raises(EmptyPool):
        nondominated_set(DesignPool())


def test_ties_both_kept():
    pool = DesignPool.from_values([(1, 1), (1, 1), (2, 2)])
    assert nondominated_mask(pool.objective_matrix()).tolist() == [True, True, False]


def test_duplicate_coefficients_dropped():
    pool = DesignPool.from_values([(1, 2), (3, 4)], coefficients=[(0.0, 1.0), (0.0, 1.0)])
    assert len(pool) == 1


@given(pools)
def test_front_matches_brute_force(Y):
    Y = np.array(Y, float)
    assert np.flatnonzero(nondominated_mask(Y)).tolist() == brute_front(Y.tolist())


@given(pools, st.randoms(use_true_random=False))
def test_front_idempotent_and_permutation_invariant(Y, rnd):
    pool = DesignPool.from_values(Y)
    nd = nondominated_set(pool)
    assert [d.coefficients for d in nondominated_set(nd)] == [d.coefficients for d in nd]
    idx = list(range(len(pool)))
    rnd.shuffle(idx)
    shuffled = pool.subset(idx)
    assert {d.coefficients for d in nondominated_set(shuffled)} == {d.coefficients for d in nd}


@given(pools)
def test_front_maximality(Y):
    assert front_maximality_check(DesignPool.from_values(Y))


def test_front_maximality_random_pools():
    for seed in range(50):
        Y = np.random.default_rng(seed).random((500, 2))
        assert front_maximality_check(DesignPool.from_values(Y))
    assert front_maximality_check(DesignPool.from_values([(0, 0)]))


def test_front_csv(tmp_path):
    p = tmp_path / "front.csv"
    write_front_csv(p, DesignPool.from_values([(1, 2), (2, 1), (2, 2)]))
    rows = p.read_text().splitlines()
    assert rows[0] == "shape_id,J_E,J_R,is_nondominated"
    assert [r.split(",")[-1] for r in rows[1:]] == ["1", "1", "0"]
