import csv
import json
from pathlib import Path

import numpy as np
import pytest

from pareto_shape.cli import main

BASELINE = Path(__file__).resolve().parents[1] / "configs" / "baseline.toml"


def small_config(tmp_path, extra="", h=0.2, size=6, name="run.toml", **repl):
    text = BASELINE.read_text().replace("h = 0.1", f"h = {h}").replace("size = 25", f"size = {size}")
    for a, b in repl.items():
        text = text.replace(a, b)
    p = tmp_path / name
    p.write_text(text + "\n" + extra)
    return str(p)


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    assert lines[0].startswith("# manifest=manifest.json config_hash=")
    return list(csv.DictReader(lines[1:]))


def manifest(out):
    return json.loads((Path(out) / "manifest.json").read_text())


def test_evaluate_baseline(tmp_path):
    out = tmp_path / "o"
    assert main(["evaluate", "--config", small_config(tmp_path), "--out", str(out)]) == 0
    rows = read_csv(out / "objectives.csv")
    assert len(rows) == 1 and rows[0]["shape_id"] == "0"
    je, jr, pof = (float(rows[0][k]) for k in ("J_E", "J_R", "PoF"))
    assert np.isfinite([je, jr]).all() and je > 0 and jr > 0 and 0 <= pof <= 1
    m = manifest(out)
    assert m["status"] == "ok" and m["outputs"] == ["objectives.csv"]
    assert m["config_hash"] in (out / "objectives.csv").read_text().splitlines()[0]
    assert m["tolerances"]["pareto.tie_tol"] == 1e-12


@pytest.mark.slow
def test_evaluate_grid_deterministic(tmp_path):
    grid = "[evaluate.grid]\nmodes = [1, 3]\nvalues = [-0.01, -0.005, 0.0, 0.005, 0.01]\n"
    cfg = small_config(tmp_path, grid)
    bodies = []
    for k in range(2):
        out = tmp_path / f"o{k}"
        assert main(["evaluate", "--config", cfg, "--out", str(out)]) == 0
        bodies.append((out / "objectives.csv").read_bytes())
    assert bodies[0] == bodies[1]
    rows = read_csv(tmp_path / "o0" / "objectives.csv")
    assert len(rows) == 25 and [r["shape_id"] for r in rows] == [str(i) for i in range(25)]


def test_incompatible_inflow_is_reported(tmp_path, capsys):
    cfg = small_config(tmp_path, **{"pin_y = 0.0": "pin_y = 0.0\noutlet_speed = 1.5"})
    out = tmp_path / "o"
    code = main(["evaluate", "--config", cfg, "--out", str(out)])
    assert code == 1
    err = capsys.readouterr().err
    assert "IncompatibleData" in err and "shape 0" in err
    m = manifest(out)
    assert m["status"] == "failed" and m["error"].startswith("IncompatibleData")


def test_config_error_exit_code(tmp_path, capsys):
    cfg = small_config(tmp_path, **{"h = 0.2": "h = -0.2"})
    assert main(["evaluate", "--config", cfg, "--out", str(tmp_path / "o")]) == 2
    err = capsys.readouterr().err
    assert "ConfigError" in err and "mesh.h" in err and "line" in err


@pytest.fixture(scope="module")
def pareto_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("pareto")
    cfg = small_config(tmp)
    out = tmp / "o"
    assert main(["pareto", "--config", cfg, "--out", str(out)]) == 0
    return cfg, out


def test_pareto_outputs(pareto_run):
    _, out = pareto_run
    pool = read_csv(out / "pool.csv")
    front = read_csv(out / "front.csv")
    assert len(pool) == 6 and 1 <= len(front) <= 6
    assert sum(int(r["is_nondominated"]) for r in pool) == len(front)
    je = [float(r["J_E"]) for r in front]
    jr = [float(r["J_R"]) for r in front]
    assert je == sorted(je)
    assert all(b <= a for a, b in zip(jr, jr[1:]))  # staircase
    m = manifest(out)
    assert m["front_maximal"] is True and m["pool_size"] == 6


def test_pareto_worker_invariance(pareto_run, tmp_path):
    cfg, out = pareto_run
    out2 = tmp_path / "w"
    assert main(["pareto", "--config", cfg, "--out", str(out2), "--workers", "2"]) == 0
    for name in ("pool.csv", "front.csv"):
        assert (out / name).read_bytes() == (out2 / name).read_bytes()


def test_pareto_duplicated_baseline(tmp_path):
    cfg = small_config(tmp_path, **{"amplitude = 0.02": "amplitude = 0.0"})
    out = tmp_path / "o"
    assert main(["pareto", "--config", cfg, "--out", str(out)]) == 0
    assert len(read_csv(out / "front.csv")) == 1


def test_scalarize_path_matches_pool(pareto_run, tmp_path):
    cfg, out = pareto_run
    pool = read_csv(out / "pool.csv")
    o2 = tmp_path / "s"
    assert main(["scalarize", "--config", cfg, "--out", str(o2)]) == 0
    sweep = read_csv(o2 / "sweep.csv")
    assert len(sweep) == 11
    je = [float(r["J_E"]) for r in pool]
    first = sweep[0]
    assert (float(first["theta_1"]), float(first["theta_2"])) == (1.0, 0.0)
    assert float(first["tau"]) == pytest.approx(min(je) / 0.22, rel=1e-15)
    assert [int(i) for i in first["argmin_ids"].split(";")] == [int(np.argmin(je))]
    nd = {i for i, r in enumerate(pool) if r["is_nondominated"] == "1"}
    for r in sweep[1:-1]:
        assert {int(i) for i in r["argmin_ids"].split(";")} <= nd
    assert all(float(r["d_H"]) >= 0 for r in sweep)


def test_scalarize_epsilon_chain(pareto_run, tmp_path):
    cfg, out = pareto_run
    jr = sorted(float(r["J_R"]) for r in read_csv(out / "pool.csv"))
    eps = [jr[-1] * 2, jr[3], jr[1], jr[0] * 0.5]
    text = Path(cfg).read_text().split("[scalarization]")[0]
    text += "[scalarization]\nmethod = 'epsilon_constraint'\nindex = 0\nthetas = [%s]\n" % ", ".join(
        f"[1e300, {e!r}]" for e in eps)
    p = tmp_path / "eps.toml"
    p.write_text(text)
    o2 = tmp_path / "e"
    assert main(["scalarize", "--config", str(p), "--out", str(o2)]) == 0
    sweep = read_csv(o2 / "sweep.csv")
    assert [r["tau_monotone"] for r in sweep] == ["1"] * 4
    assert sweep[-1]["tau"] == "inf" and sweep[-1]["argmin_size"] == "0"
    m = manifest(o2)
    assert m["tau_monotone"] is True and m["infeasible_thetas"] == 1 and m["epsilon_nested"] is True


def test_dumps(tmp_path):
    cfg = small_config(tmp_path)
    expect = {"mesh-dump": ["fluid_nodes.csv", "fluid_triangles.csv", "fluid_edges.csv",
                            "solid_nodes.csv", "solid_triangles.csv", "solid_edges.csv", "boundary.csv"],
              "flow-dump": ["flow.csv"], "elast-dump": ["elasticity.csv"]}
    for cmd, files in expect.items():
        out = tmp_path / cmd
        assert main([cmd, "--config", cfg, "--out", str(out)]) == 0
        assert manifest(out)["outputs"] == files
        for f in files:
            assert len(read_csv(out / f)) > 0
    head = (tmp_path / "elast-dump" / "elasticity.csv").read_text().splitlines()[1]
    assert head == "node,x,y,ux,uy,sxx,syy,sxy,szz,von_mises"
    head = (tmp_path / "flow-dump" / "flow.csv").read_text().splitlines()[1]
    assert head == "node,x,y,phi,vx,vy"


def test_workers_env_override(monkeypatch):
    from pareto_shape.pipeline import resolve_workers
    monkeypatch.setenv("PARETO_SHAPE_WORKERS", "3")
    assert resolve_workers(1) == 3
    monkeypatch.delenv("PARETO_SHAPE_WORKERS")
    assert resolve_workers(None) == 1
