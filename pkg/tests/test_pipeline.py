import dataclasses

import numpy as np
import pytest

from pareto_shape.errors import IncompatibleData
from pareto_shape.pipeline import (PoolConfig, RunConfig, evaluate_many, sample_pool_coefficients,
                                   with_shape_context)


def test_pool_sampling_deterministic(coarse_run):
    a = sample_pool_coefficients(coarse_run, size=8, seed=5)
    b = sample_pool_coefficients(coarse_run, size=8, seed=5)
    c = sample_pool_coefficients(coarse_run, size=8, seed=6)
    assert len(a) == 8 and np.all(a[0] == 0)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    assert not all(np.array_equal(x, y) for x, y in zip(a[1:], c[1:]))
    amp = coarse_run.pool.amplitude
    assert all(np.abs(x).max() <= amp for x in a)


def test_pool_without_baseline(coarse_run):
    run = dataclasses.replace(coarse_run, pool=PoolConfig(include_baseline=False))
    assert not np.all(sample_pool_coefficients(run, size=3)[0] == 0)


def test_zero_amplitude_pool(coarse_run):
    run = dataclasses.replace(coarse_run, pool=PoolConfig(size=5, amplitude=0.0))
    assert len(sample_pool_coefficients(run)) == 1


def test_exhausted_draws(coarse_run):
    run = dataclasses.replace(coarse_run, pool=PoolConfig(size=5, amplitude=5.0, max_draws=20))
    with pytest.raises(RuntimeError):
        sample_pool_coefficients(run)


def test_shape_context():
    e = with_shape_context(IncompatibleData("net flux"), 7)
    assert isinstance(e, IncompatibleData) and str(e) == "shape 7: net flux"


def test_evaluate_many_order_and_provenance(coarse_run):
    cs = sample_pool_coefficients(coarse_run, size=3, seed=2)
    ds = evaluate_many(cs, coarse_run)
    assert [d.coefficients for d in ds] == [tuple(c) for c in cs]
    p = ds[0].provenance
    assert p["h"] == 0.2 and p["kinematics"] == "plane strain" and 0 <= p["pof"] <= 1
    assert p["flow_residual"] <= 1e-10 and p["solid_residual"] <= 1e-10


def test_run_config_defaults():
    run = RunConfig()
    assert run.solid.lame_lambda == pytest.approx(28.846153846153847)
    assert run.flow.inflow_speed == 1.0 and run.h == 0.1
