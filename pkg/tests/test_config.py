import dataclasses
from pathlib import Path

import pytest

from pareto_shape.config import find_line, load_config, parse_config
from pareto_shape.errors import ConfigError
from pareto_shape.pipeline import RunConfig

BASELINE = Path(__file__).resolve().parents[1] / "configs" / "baseline.toml"


def test_shipped_config_matches_defaults():
    cfg = load_config(BASELINE)
    d = RunConfig()
    assert cfg.run.shape_space == d.shape_space
    assert cfg.run.solid == d.solid and cfg.run.reliability == d.reliability
    assert cfg.run.fluidloss == d.fluidloss and cfg.run.pool == d.pool
    assert cfg.run.h == 0.1
    assert len(cfg.scalarization.thetas) == 11
    assert cfg.scalarization.thetas[0] == (1.0, 0.0) and cfg.scalarization.thetas[-1] == (0.0, 1.0)
    assert cfg.source == str(BASELINE)


def test_empty_config_gives_defaults():
    cfg = parse_config("")
    assert cfg.run == RunConfig()
    assert cfg.evaluate.coefficients == ()


def test_digest_tracks_content():
    a = parse_config("[mesh]\nh = 0.1\n")
    b = parse_config("# comment only differs\n[mesh]\nh = 0.1\n")
    c = parse_config("[mesh]\nh = 0.2\n")
    assert a.digest == b.digest != c.digest
    assert len(a.digest) == 64


def test_grid_expansion():
    cfg = parse_config("[evaluate.grid]\nmodes = [0, 2]\nvalues = [-0.01, -0.005, 0.0, 0.005, 0.01]\n")
    cs = cfg.evaluate.coefficients
    assert len(cs) == 25 and len(set(cs)) == 25
    assert all(c[1] == 0 and c[3] == 0 for c in cs)


@pytest.mark.parametrize("text,field,line", [
    ("[mesh]\nh = -1\n", "mesh.h", 2),
    ("[flow]\n\ndensity = 'x'\n", "flow.density", 3),
    ("[pool]\nsize = 3\ncolour = 1\n", "pool.colour", 3),
    ("[bogus]\n", "bogus", 1),
    ("[geometry]\nradius = 0.0\n", None, None),
    ("[geometry.clamp]\ncenter = [0.0, -0.9]\nradius = 0.02\n", "geometry.clamp", None),
    ("[scalarization]\nmethod = 'minmax'\nthetas = [[1, 0]]\n", "scalarization.method", 2),
    ("[scalarization]\nthetas = [[1, 0], [1, 0, 0]]\n", "scalarization.thetas", 2),
    ("[evaluate]\ncoefficients = [[0.0, 0.0]]\n", "evaluate.coefficients", 2),
    ("[evaluate.grid]\nmodes = [7]\nvalues = [0.0]\n", "evaluate.grid.modes", 2),
])
def test_diagnostics(text, field, line):
    with pytest.raises(ConfigError) as ei:
        parse_config(text)
    if field is not None:
        assert ei.value.field == field
    if line is not None:
        assert ei.value.line == line
        assert f"line {line}" in str(ei.value)


def test_syntax_error_has_line():
    with pytest.raises(ConfigError) as ei:
        parse_config("[mesh]\nh = = 2\n")
    assert ei.value.line == 2


def test_elast_alias():
    a = parse_config("[elast]\nlambda = 2.0\nmu = 1.0\n")
    b = parse_config("[elasticity]\nlambda = 2.0\nmu = 1.0\n")
    assert a.run.solid == b.run.solid
    assert dataclasses.astuple(a.run.solid)[:2] == (2.0, 1.0)
    with pytest.raises(ConfigError):
        parse_config("[elast]\nmu = 1.0\n[elasticity]\nmu = 1.0\n")


def test_find_line():
    text = "[a]\nx = 1\n[a.b]\n y = 2\n"
    assert find_line(text, ["a"], "x") == 2
    assert find_line(text, ["a", "b"], "y") == 4
    assert find_line(text, ["a", "b"]) == 3


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


def test_scale_applies_to_weighted_sums_only():
    cfg = parse_config("[scalarization]\nthetas = [[1, 1]]\nscale = [2.0, 4.0]\n")
    assert cfg.scalarization.effective((1, 1)) == (0.5, 0.25)
    eps = parse_config("[scalarization]\nmethod = 'epsilon_constraint'\nthetas = [[1, 1]]\nscale = [2.0, 4.0]\n")
    assert eps.scalarization.effective((1, 1)) == (1, 1)
