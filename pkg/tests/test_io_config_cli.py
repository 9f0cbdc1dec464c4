import json

import numpy as np
import pytest

from ncwave.cli import main
from ncwave.config import SCHEMA, SUBCOMMANDS, ConfigError, default_config, load_config, parse_config, default_raw
from ncwave.io import read_dense_kernel, read_grid_function, read_table, write_dense_kernel, write_grid_function, write_table
from ncwave.kernels import BumpProfile, PlateauCutoff, moyal_kernel
from ncwave.lattice import GridFunction, make_grid

SMALL = """
[grid]
n_time = 101
n_space = 201
dt = 0.01
dx = 0.02
[run]
n_sources = 4
n_pairs = 3
"""


def test_grid_function_round_trip(tmp_path, rng):
    g = make_grid(7, 9, 0.1, 0.2, -0.3, -0.8).with_components(2)
    f = GridFunction(g, rng.standard_normal(g.shape) + 1j * rng.standard_normal(g.shape))
    p = write_grid_function(tmp_path / "f.csv", f)
    back = read_grid_function(p)
    assert back.grid == g
    assert np.array_equal(back.values, f.values)
    raw = p.read_bytes()
    assert b"\r\n" not in raw
    write_grid_function(tmp_path / "f2.csv", f)
    assert (tmp_path / "f2.csv").read_bytes() == raw


def test_dense_kernel_round_trip(tmp_path):
    g = make_grid(21, 41, 0.05, 0.05, -0.5, -1.0)
    W = moyal_kernel(BumpProfile((0.0, 0.0), (0.2, 0.2), 1.0), 0.1,
                     PlateauCutoff((0.0, 0.0), (0.15, 0.15), (0.1, 0.1)), g).to_dense()
    p = write_dense_kernel(tmp_path / "k.csv", W, theta0=0.1)
    back = read_dense_kernel(p)
    assert back.box() == W.box()
    assert abs(back.matrix - W.matrix).max() == 0
    meta, header, _ = read_table(p)
    assert header == ["i_x", "i_y", "re", "im"] and meta["theta0"] == 0.1


def test_table_floats_exact(tmp_path):
    vals = [np.pi, 1e-300, -2.5e17, 1 / 3]
    write_table(tmp_path / "t.csv", ["a", "b", "c", "d"], [vals], meta={"k": 1})
    meta, header, data = read_table(tmp_path / "t.csv")
    assert meta == {"k": 1} and header == ["a", "b", "c", "d"]
    assert data[0].tolist() == vals


@pytest.mark.parametrize("name", SUBCOMMANDS)
def test_shipped_defaults_parse(name):
    cfg = default_config(name)
    assert cfg.grid().n_time >= 3
    assert len(cfg.config_hash()) == 64


@pytest.mark.parametrize("patch, field", [
    ({"grid": {"dt": "x"}}, "grid.dt"),
    ({"grid": {"dt": 0.05}}, "grid.dt"),
    ({"grid": {"n_time": 2}}, "grid.n_time"),
    ({"operator": {"variant": "maxwell"}}, "operator.variant"),
    ({"kernel": {"w1": {"center": [0.0, 5.0], "radii": [0.1, 0.1], "amplitude": 1.0}}}, "kernel.w1"),
    ({"kernel": {"w1": {"center": [0.0], "radii": [0.1, 0.1], "amplitude": 1.0}}}, "kernel.w1.center"),
    ({"run": {"bogus": 1}}, "run.bogus"),
    ({"nosuch": {}}, "nosuch"),
])
def test_config_errors_name_field(patch, field):
    with pytest.raises(ConfigError) as e:
        parse_config("born", patch, default_raw("born"))
    assert e.value.field == field
    assert e.value.to_dict()["field"] == field


def test_config_merge_and_seed(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(SMALL)
    cfg = load_config("born", p, seed=7)
    assert cfg.seed == 7
    assert cfg.get("grid", "n_time") == 101
    assert cfg.get("run", "M") == 64
    assert cfg.config_hash() != default_config("born").config_hash()
    with pytest.raises(ConfigError) as e:
        cfg.get("run", "nothing")
    assert e.value.field == "run.nothing"


def test_schema_covers_sections(capsys):
    assert main(["schema"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert set(SCHEMA) <= set(doc)


def _cli(tmp_path, cmd, text=None, extra=()):
    args = [cmd, "--out", str(tmp_path / "out"), "-q", *extra]
    if text is not None:
        (tmp_path / "c.toml").write_text(text)
        args += ["--config", str(tmp_path / "c.toml")]
    return main(args)


def test_cli_pass_writes_report(tmp_path):
    assert _cli(tmp_path, "green-check", SMALL.replace("n_pairs = 3\n", "")) == 0
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["experiment"] == "green-check"
    assert rep["assertions"] and all(a["pass"] for a in rep["assertions"])
    assert len(rep["config_hash"]) == 64


def test_cli_assertion_failure_exit_1(tmp_path):
    assert _cli(tmp_path, "born", SMALL, ["--tolerance-scale", "1e-30"]) == 1
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert not all(a["pass"] for a in rep["assertions"])


def test_cli_config_error_exit_2(tmp_path):
    assert _cli(tmp_path, "born", SMALL + "bogus = 1\n") == 2
    err = json.loads((tmp_path / "out" / "error.json").read_text())
    assert err == {"error": "config", "field": "run.bogus", "message": "unknown field"}
    assert _cli(tmp_path, "born", "[grid\n") == 2
    assert _cli(tmp_path, "born", SMALL, ["--jobs", "0"]) == 2


def test_cli_divergence_exit_3(tmp_path):
    assert _cli(tmp_path, "born", SMALL + "lambda_fraction = 1.5\n") == 3
    assert json.loads((tmp_path / "out" / "error.json").read_text())["error"] == "divergence"


def test_cli_deterministic_across_jobs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    assert _cli(a, "born", SMALL) == 0
    assert _cli(b, "born", SMALL, ["--jobs", "3"]) == 0
    for name in ("born.csv", "adjoint.csv"):
        assert (a / "out" / name).read_bytes() == (b / "out" / name).read_bytes()
