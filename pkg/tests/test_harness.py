import json

import numpy as np
import pytest
from click.testing import CliRunner

from threshold_lab.cli import main
from threshold_lab.errors import ThresholdLabError
from threshold_lab.harness import (
    ExperimentConfig,
    _config_from_raw,
    _fmt,
    load_config,
    run_command,
    write_csv,
)

SMALL_CFG = """\
[params]
dimension = 3
exponent = 3.0

[grid]
M = 512

[profiles]
A = 1.0
k = 1

[evolve]
seed = "ground"
dt0 = 1e-3
T = 0.02
record_stride = 10

[sweep]
amplitudes = [-0.5, 0.5]
"""


@pytest.fixture()
def small_config(tmp_path, monkeypatch):
    monkeypatch.setenv("THRESHOLD_LAB_CACHE", str(tmp_path / "cache"))
    cfg = tmp_path / "config.toml"
    cfg.write_text(SMALL_CFG)
    return cfg


def _artifact_bytes(out_dir):
    """All deterministic artifacts (timing.txt is wall-clock and excluded)."""
    return {
        f.name: f.read_bytes()
        for f in sorted(out_dir.iterdir())
        if f.name != "timing.txt"
    }


@pytest.mark.parametrize("command", ["ground", "spectrum"])
def test_rerun_byte_identical(small_config, tmp_path, command):
    runner = CliRunner()
    # warm the cache so both compared runs take the identical path
    run_command(command, str(small_config), str(tmp_path / "warm"), use_cache=True)
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"{command}_{tag}"
        res = runner.invoke(main, [command, "--config", str(small_config),
                                   "--out", str(out)])
        assert res.exit_code == 0, res.output
        outs.append(_artifact_bytes(out))
    assert outs[0] == outs[1]


def test_cli_reports_config_hash(small_config, tmp_path):
    runner = CliRunner()
    out = tmp_path / "g"
    res = runner.invoke(main, ["ground", "--config", str(small_config),
                               "--out", str(out)])
    assert res.exit_code == 0
    payload = json.loads(res.output)
    manifest = json.loads((out / "manifest.json").read_text())
    assert payload["config_hash"] == manifest["config_hash"]
    assert manifest["command"] == "ground"


def test_evolve_and_classify_commands(small_config, tmp_path):
    m1 = run_command("evolve", str(small_config), str(tmp_path / "ev"), True)
    assert m1["stop_reason"] == "horizon"
    assert (tmp_path / "ev" / "trajectory.csv").exists()
    m2 = run_command("classify", str(small_config), str(tmp_path / "cl"), True)
    assert m2["verdict"] in ("converges_to_Q", "undetermined")
    verdict = json.loads((tmp_path / "cl" / "verdict.json").read_text())
    assert verdict["verdict"] == m2["verdict"]


def test_error_path_exit_code_and_error_json(small_config, tmp_path):
    raw = dict(load_config(small_config).raw)
    raw["sweep"] = {"amplitudes": []}
    bad = tmp_path / "bad.toml"
    bad.write_text(SMALL_CFG.replace("amplitudes = [-0.5, 0.5]", "amplitudes = []"))
    runner = CliRunner()
    out = tmp_path / "sweep_fail"
    res = runner.invoke(main, ["sweep", "--config", str(bad), "--out", str(out)])
    assert res.exit_code == 2
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "ThresholdLabError"
    assert "no cells" in err["message"]


def test_sweep_cell_isolation(small_config, tmp_path):
    """A cell with an absurd amplitude fails alone; the sweep completes."""
    bad = tmp_path / "iso.toml"
    bad.write_text(SMALL_CFG.replace("amplitudes = [-0.5, 0.5]",
                                     "amplitudes = [0.5, 1e300]"))
    m = run_command("sweep", str(bad), str(tmp_path / "sw"), True)
    assert m["n_cells"] == 2
    assert m["n_ok"] >= 1
    cells = json.loads((tmp_path / "sw" / "sweep_results.json").read_text())["cells"]
    by_A = {c["A"]: c for c in cells}
    assert by_A[0.5]["ok"] is True
    assert by_A[1e300]["ok"] is False and "error" in by_A[1e300]


def test_sweep_sign_structure(small_config, tmp_path):
    m = run_command("sweep", str(small_config), str(tmp_path / "sw2"), True)
    assert all(m["verdicts"].values())


def test_load_config_defaults(tmp_path):
    cfg = tmp_path / "min.toml"
    cfg.write_text("[params]\ndimension = 3\nexponent = 3.0\n")
    ec = load_config(cfg)
    assert ec.M == 4096
    assert ec.Rmax is None
    assert ec.profile_k == 3
    assert ec.seed == "ground"
    assert ec.rate_fraction == 0.5


def test_config_hash_stable_and_sensitive():
    raw = {"params": {"dimension": 3, "exponent": 3.0}, "grid": {"M": 512}}
    a = _config_from_raw(raw).config_hash()
    b = _config_from_raw({"grid": {"M": 512},
                          "params": {"exponent": 3.0, "dimension": 3}}).config_hash()
    c = _config_from_raw({"params": {"dimension": 3, "exponent": 3.0},
                          "grid": {"M": 1024}}).config_hash()
    assert a == b  # key order never matters
    assert a != c


def test_fmt_round_trips_floats():
    rng = np.random.default_rng(11)
    for x in rng.standard_normal(50) * 10.0 ** rng.integers(-12, 12, 50):
        assert float(_fmt(float(x))) == float(x)


def test_write_csv_format(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [np.array([1.0, 0.1]), np.array([2.0, 1 / 3])])
    lines = path.read_text().splitlines()
    assert lines[0] == "a,b"
    assert lines[2].split(",")[1] == format(1 / 3, ".17g")
