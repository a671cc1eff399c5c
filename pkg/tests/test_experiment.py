"""Tests for the experiment driver: builders, outputs, determinism."""

import math
import os
import textwrap

import numpy as np
import pytest

from graphfp import (
    ConfigError,
    StiffnessError,
    build_lattice_2d,
    parse_config,
    run_experiment,
)
from graphfp.config import GraphConfig, InitConfig
from graphfp.experiment import (
    OUTPUT_ROOT_ENV,
    build_graph,
    build_initial_density,
    core_subgraph,
    count_strict_local_maxima,
    read_density_csv,
)

PATH_RUN = textwrap.dedent(
    """
    name = tiny
    seed = 3
    graph.kind = path_1d
    graph.a = 0
    graph.b = 1
    graph.n = 9
    model.kind = gradient
    model.potential = quadratic
    model.beta = 0.5
    time.t_end = 0.5
    output.checkpoint_every = 10
    """
)

VDP_RUN = textwrap.dedent(
    """
    name = osc-tiny
    graph.kind = lattice_2d
    graph.xlo = -2
    graph.xhi = 2
    graph.ylo = -2
    graph.yhi = 2
    graph.dx = 1
    model.kind = general
    model.drift = van_der_pol
    model.beta = 0.125
    time.dt = 1e-3
    time.t_end = 0.05
    output.checkpoint_every = 10
    """
)


def test_build_graph_kinds():
    g = build_graph(GraphConfig(kind="path_1d", a=0.0, b=1.0, n=5))
    assert (g.n, g.m) == (5, 8)
    g = build_graph(GraphConfig(kind="cycle_1d", a=0.0, b=1.0, n=5))
    assert (g.n, g.m) == (5, 10)
    g = build_graph(
        GraphConfig(kind="lattice_2d", xlo=0.0, xhi=1.0, ylo=0.0, yhi=1.0, dx=0.5)
    )
    assert g.n == 9
    with pytest.raises(ConfigError):
        build_graph(GraphConfig(kind="mesh"))


def cfg_with_init(init):
    base = parse_config(PATH_RUN)
    return type(base)(
        name=base.name,
        graph=base.graph,
        model=base.model,
        init=init,
        time=base.time,
        output=base.output,
        seed=base.seed,
    )


def test_initial_density_uniform_and_gaussian():
    cfg = parse_config(PATH_RUN)
    g = build_graph(cfg.graph)
    rho = build_initial_density(cfg, g)
    np.testing.assert_allclose(rho, 1.0 / g.n)

    cfg = cfg_with_init(InitConfig(kind="gaussian", center=(0.25,), variance=0.02))
    rho = build_initial_density(cfg, g)
    assert math.fsum(rho) == pytest.approx(1.0, abs=1e-15)
    assert np.argmax(rho) == 2  # vertex at x = 0.25
    # default center is the coordinate mean (the interval midpoint here)
    cfg = cfg_with_init(InitConfig(kind="gaussian", variance=0.02))
    rho = build_initial_density(cfg, g)
    assert np.argmax(rho) == 4

    with pytest.raises(ConfigError, match="coordinates"):
        cfg = cfg_with_init(InitConfig(kind="gaussian", center=(0.0, 0.0)))
        build_initial_density(cfg, build_graph(parse_config(PATH_RUN).graph))
    with pytest.raises(ConfigError, match="underflowed"):
        cfg = cfg_with_init(InitConfig(kind="gaussian", center=(1e4,), variance=1e-6))
        build_initial_density(cfg, g)


def test_initial_density_csv(tmp_path):
    cfg = parse_config(PATH_RUN)
    g = build_graph(cfg.graph)
    path = tmp_path / "init.csv"
    weights = np.arange(1.0, g.n + 1.0)
    lines = ["vertex,x,y,rho"] + [
        f"{i},{g.coords[i, 0]},0,{weights[i]}" for i in range(g.n)
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    cfg = cfg_with_init(InitConfig(kind="csv", path=str(path)))
    rho = build_initial_density(cfg, g)
    np.testing.assert_allclose(rho, weights / weights.sum(), rtol=1e-12)

    bad = tmp_path / "bad.csv"
    bad.write_text("vertex,x,y,density\n0,0,0,1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="rho"):
        read_density_csv(bad, g.n)
    short = tmp_path / "short.csv"
    short.write_text("vertex,x,y,rho\n0,0,0,1\n", encoding="utf-8")
    with pytest.raises(ConfigError, match="graph of size"):
        read_density_csv(short, g.n)


def test_count_strict_local_maxima_against_loop():
    g = build_lattice_2d(0.0, 3.0, 0.0, 3.0, 1.0)
    rng = np.random.default_rng(5)
    for _ in range(10):
        rho = rng.random(g.n)
        want = sum(
            1
            for i in range(g.n)
            if all(rho[i] > rho[j] for j in g.neighbors(i))
        )
        assert count_strict_local_maxima(g, rho) == want
    flat = np.full(g.n, 0.25)
    assert count_strict_local_maxima(g, flat) == 0


def test_core_subgraph_picks_component_of_mode():
    g = build_graph(GraphConfig(kind="path_1d", a=0.0, b=1.0, n=11))
    rho = np.full(11, 1e-20)
    rho[1] = 0.3
    rho[2] = 0.2
    rho[8] = 0.5  # the mode lives in the right-hand blob
    rho /= rho.sum()
    core, verts, rho_core = core_subgraph(g, rho)
    assert list(verts) == [8]
    assert math.fsum(rho_core) == pytest.approx(1.0)
    # everything above the floor: the core is the whole graph
    smooth = np.linspace(1.0, 2.0, 11)
    smooth /= smooth.sum()
    core, verts, _ = core_subgraph(g, smooth)
    assert core.n == g.n and len(verts) == g.n


def run_tiny(tmp_path, text=PATH_RUN, sub="a"):
    cfg = parse_config(text)
    return cfg, run_experiment(cfg, output_root=str(tmp_path / sub))


def test_run_experiment_writes_everything(tmp_path):
    cfg, manifest = run_tiny(tmp_path)
    assert manifest["name"] == "tiny"
    assert manifest["model_kind"] == "gradient"
    assert manifest["stop_reason"] == "t_end"
    assert manifest["steps"] > 0
    assert manifest["max_mass_error"] <= 1e-10
    assert manifest["lyapunov_violations"] == 0
    assert manifest["min_rho"] > 0

    files = manifest["files"]
    for key in ("config", "trajectory", "density_final", "summary", "rate_report"):
        assert os.path.isfile(files[key]), key
    assert "failure_report" not in files

    with open(files["trajectory"], encoding="utf-8") as f:
        header = f.readline().strip()
    assert header == "t,free_energy,dissipation,min_rho,mass_error"
    with open(files["density_final"], encoding="utf-8") as f:
        rows = f.read().strip().splitlines()
    assert rows[0] == "vertex,x,y,rho"
    assert len(rows) == manifest["graph"]["n"] + 1
    rho = read_density_csv(files["density_final"], manifest["graph"]["n"])
    assert math.fsum(rho) == pytest.approx(1.0, abs=1e-9)

    rate = manifest["rate"]
    assert rate is not None
    assert rate["lambda_estimate"] > 0
    assert rate["predicted_decay"] == pytest.approx(2 * rate["lambda_estimate"])
    assert math.isfinite(rate["f_reference"])

    with open(files["summary"], encoding="utf-8") as f:
        summary = f.read()
    assert "name = tiny" in summary
    assert "stop_reason = t_end" in summary
    assert "strict_local_maxima" in summary
    # the config written back parses to the config we ran
    assert parse_config(open(files["config"], encoding="utf-8").read()) == cfg


def test_run_experiment_is_deterministic(tmp_path):
    _, first = run_tiny(tmp_path, sub="one")
    _, second = run_tiny(tmp_path, sub="two")
    for key in ("config", "trajectory", "density_final", "summary", "rate_report"):
        a = open(first["files"][key], "rb").read()
        b = open(second["files"][key], "rb").read()
        assert a == b, f"{key} differs between identical runs"


def test_output_root_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "rooted"))
    cfg = parse_config(PATH_RUN)
    manifest = run_experiment(cfg)
    assert manifest["outdir"] == str(tmp_path / "rooted" / "tiny")
    assert os.path.isfile(os.path.join(manifest["outdir"], "run_summary.txt"))


def test_density_checkpoint_files(tmp_path):
    text = PATH_RUN + "output.density_every = 25\n"
    _, manifest = run_tiny(tmp_path, text=text)
    checkpoints = manifest["files"]["density_checkpoints"]
    assert len(checkpoints) >= 1
    for path in checkpoints:
        assert os.path.isfile(path)
        assert os.path.basename(path).startswith("density_")


def test_run_experiment_general_model(tmp_path):
    cfg, manifest = run_tiny(tmp_path, text=VDP_RUN)
    assert manifest["model_kind"] == "general"
    assert manifest["rate"] is None
    assert "rate_report" not in manifest["files"]
    assert manifest["steps"] == 50
    assert math.isfinite(manifest["final_rhs_sup"])
    assert manifest["max_mass_error"] <= 1e-10
    # general runs record no free energy
    assert math.isnan(manifest["final_free_energy"])


def test_numerical_failure_leaves_report(tmp_path, monkeypatch):
    import graphfp.experiment as exp

    def explode(*args, **kwargs):
        raise StiffnessError("boom: halvings exhausted")

    monkeypatch.setattr(exp, "integrate", explode)
    cfg = parse_config(PATH_RUN)
    with pytest.raises(StiffnessError):
        run_experiment(cfg, output_root=str(tmp_path))
    report = tmp_path / "tiny" / "failure_report.txt"
    assert report.is_file()
    text = report.read_text(encoding="utf-8")
    assert "StiffnessError" in text and "boom" in text
