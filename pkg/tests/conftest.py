import dataclasses
import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pareto_shape.geometry import Baseline, ShapeSpaceConfig, Shroud
from pareto_shape.pipeline import RunConfig, default_shape_space

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def space():
    """Half-disc component rooted in the lower shroud wall."""
    return dataclasses.replace(default_shape_space(), norm_bound=20.0)


@pytest.fixture(scope="session")
def unit_circle_space():
    return ShapeSpaceConfig(Baseline("circle", (0.0, 0.0), 1.0), Shroud(-3.0, -2.0, 3.0, 2.0),
                            exterior_box=(-5.0, -4.0, 5.0, 4.0), collar=0.5,
                            leading_edge_angle=0.0, norm_bound=50.0)


@pytest.fixture(scope="session")
def run_cfg(space):
    return RunConfig(shape_space=space, h=0.1)


@pytest.fixture(scope="session")
def coarse_run(space):
    return RunConfig(shape_space=space, h=0.2)


def brute_hausdorff(a, b):
    d = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
    return max(d.min(axis=1).max(), d.min(axis=0).max())


def brute_dominates(a, b):
    return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))


def brute_front(Y):
    return [i for i in range(len(Y)) if not any(brute_dominates(Y[j], Y[i]) for j in range(len(Y)))]


def annulus_mesh(a, b, h, center=(0.0, 0.0)):
    """Solid annulus a < r < b: clamp on the inner circle, component on the outer one,
    with isoparametric midpoints on both circles."""
    from pareto_shape.mesh import triangulate_pslg

    c = np.asarray(center, float)
    loops, tags, segs, n0 = [], [], [], 0
    for r, tag in ((b, "component"), (a, "clamp")):
        n = max(16, int(math.ceil(2 * math.pi * r / (0.9 * h))))
        t = 2 * math.pi * np.arange(n) / n
        loops.append(c + r * np.c_[np.cos(t), np.sin(t)])
        segs.append(np.c_[n0 + np.arange(n), n0 + (np.arange(n) + 1) % n])
        tags += [tag] * n
        n0 += n
    m = triangulate_pslg(np.concatenate(loops), np.concatenate(segs), tags, [tuple(c)], h, "solid")
    be = m.boundary_edges
    mid = 0.5 * (m.nodes[be[:, 0]] + m.nodes[be[:, 1]]) - c
    r = np.linalg.norm(m.nodes[be[:, 0]] - c, axis=1)
    mid = c + mid * (r / np.linalg.norm(mid, axis=1))[:, None]
    return dataclasses.replace(m, boundary_midpoints=mid)


# ---- acceptance summary -----------------------------------------------------------

_ACCEPTANCE = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if item.module.__name__.endswith("test_acceptance") and item.name.startswith("test_criterion_"):
        prev = _ACCEPTANCE.get(item.name, (None, "passed"))[1]
        if rep.when == "call" or rep.failed:
            state = "failed" if rep.failed or prev == "failed" else rep.outcome
            doc = (item.function.__doc__ or "").strip().splitlines()
            _ACCEPTANCE[item.name] = (doc[0] if doc else item.name, state)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE):
        label, state = _ACCEPTANCE[name]
        num = int(name.split("_")[2])
        terminalreporter.write_line(f"[{'PASS' if state == 'passed' else 'FAIL'}] {num:2d}. {label}")
