import csv
import hashlib
import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from fnls import config as cf
from fnls.cli import main

BASE = """
grid.points = 16
grid.length = 12
model.sigma = 1
noise.scale = 0.3
noise.cutoff = 3
run.dt = 0.01
run.t1 = 0.2
run.paths = 20
run.output_every = 5
"""


@pytest.fixture
def run_cli(tmp_path):
    def _run(command, extra="", *flags):
        cfg = tmp_path / "run.cfg"
        keys = {}
        for line in (BASE + extra).splitlines():
            if line.strip():
                k, v = line.split("=", 1)
                keys[k.strip()] = v.strip()
        cfg.write_text("".join(f"{k} = {v}\n" for k, v in keys.items()))
        out = tmp_path / "out"
        code = main([command, "--config", str(cfg), "--out", str(out), *flags])
        return code, out
    return _run


def _manifest(out):
    return json.loads((out / "manifest.json").read_text())


def _records(out):
    return [json.loads(line) for line in (out / "report.jsonl").read_text().splitlines()]


# -- admissible ---------------------------------------------------------------

def test_admissible_cubic_pair(capsys):
    assert main(["admissible", "2", "0.75", "1"]) == 0
    assert capsys.readouterr().out.strip() == "r=3 p=4 identity=OK regime=OK"


def test_admissible_linear_pair(capsys):
    assert main(["admissible", "3", "0.9", "0"]) == 0
    assert capsys.readouterr().out.startswith("r=inf p=2 ")


def test_admissible_rejects_small_alpha(capsys):
    assert main(["admissible", "2", "0.4", "1"]) == 2
    assert "regime=FAIL" in capsys.readouterr().out


# -- simulate -------------------------------------------------------------------

def test_simulate_writes_listed_files(run_cli, capsys):
    code, out = run_cli("simulate")
    assert code == 0
    man = _manifest(out)
    listed = {f["path"] for f in man["files"]}
    assert {"mass.csv", "ledger.csv", "report.jsonl"} <= listed
    assert sum(name.startswith("snapshot_") for name in listed) == 11
    for f in man["files"]:
        data = (out / f["path"]).read_bytes()
        assert len(data) == f["bytes"]
        assert hashlib.sha256(data).hexdigest() == f["sha256"]
    assert man["exit_code"] == 0 and man["seed"] == 0 and man["command"] == "simulate"
    for key in ("version", "config_hash", "paths", "warnings", "wall_clock_seconds"):
        assert key in man
    ledger = [r for r in _records(out) if r["record"] == "ledger"]
    assert ledger and ledger[0]["gauge_contribution"] <= 1e-12
    assert all(r["config_hash"] == man["config_hash"] for r in _records(out))


def test_simulate_zero_threshold_reports_blowup(run_cli):
    code, out = run_cli("simulate", "guard.mass_threshold = 0\n")
    assert code == 3
    assert _manifest(out)["exit_code"] == 3


def test_rerun_is_byte_identical(run_cli):
    _, out = run_cli("simulate")
    first = {p.name: p.read_bytes() for p in out.glob("*.csv")}
    _, out = run_cli("simulate")
    second = {p.name: p.read_bytes() for p in out.glob("*.csv")}
    assert first == second and first


def test_foreign_files_block_output_dir(run_cli, tmp_path):
    (tmp_path / "out").mkdir()
    (tmp_path / "out" / "notes.txt").write_text("keep")
    code, _ = run_cli("simulate")
    assert code == 2
    assert (tmp_path / "out" / "notes.txt").read_text() == "keep"


# -- ensemble -------------------------------------------------------------------

def test_ensemble_reports_expected_mass(run_cli):
    code, out = run_cli("ensemble", "model.sigma = 0\n", "--paths", "100")
    assert code == 0
    with open(out / "ensemble_mass.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 5
    check = [r for r in _records(out) if r["record"] == "expected_mass"]
    assert check and check[0]["passed"] is True
    assert (out / "moments.csv").exists()


def test_single_path_ensemble_disables_band(run_cli):
    code, out = run_cli("ensemble", "", "--paths", "1")
    assert code == 0
    check = [r for r in _records(out) if r["record"] == "expected_mass"][0]
    assert check["passed"] is None


def test_ensemble_without_gap_disables_bounds(run_cli):
    extra = "model.gamma = 0.2\nforcing.family = linear_phase\nforcing.beta = 0.2\n"
    code, out = run_cli("ensemble", extra)
    assert code == 0
    disabled = [r for r in _records(out) if r["record"] == "moment_bound"]
    assert disabled and all(r.get("disabled") for r in disabled)


def test_absorb_probe_refuses_disabled_regime(run_cli):
    extra = "model.gamma = 0.2\nforcing.family = linear_phase\nforcing.beta = 0.2\n"
    assert run_cli("absorb-probe", extra)[0] == 2


# -- other commands ---------------------------------------------------------------

def test_strichartz_command(run_cli, capsys):
    code, out = run_cli("strichartz")
    assert code == 0
    assert capsys.readouterr().out.startswith("r=3 p=4 ")
    assert (out / "strichartz.csv").exists()


def test_strichartz_needs_enough_snapshots(run_cli):
    assert run_cli("strichartz", "run.snapshots = 5\n")[0] == 2


def test_verify_mass_command(run_cli, capsys):
    extra = "diag.refinements = 0.02, 0.01, 0.005\nrun.t1 = 0.4\nnoise.scale = 0.2\n"
    code, out = run_cli("verify-mass", extra)
    assert code == 0, capsys.readouterr()
    assert (out / "verify_mass.csv").exists()


# -- configuration ------------------------------------------------------------

@pytest.mark.parametrize("extra", ["model.alpa = 0.7\n", "model.alpha = abc\n", "grid.points = 24\n",
                                   "run.scheme = rk4\n", "run.t1 = -1\n"])
def test_bad_configs_exit_two(run_cli, extra):
    assert run_cli("simulate", extra)[0] == 2


def test_out_of_regime_alpha_warns_but_runs(run_cli, capsys):
    code, out = run_cli("simulate", "model.alpha = 0.4\n")
    assert code == 0
    assert "2/3" in capsys.readouterr().err
    assert _manifest(out)["warnings"]


def test_missing_config_file_exits_two(tmp_path):
    assert main(["simulate", "--config", str(tmp_path / "nope.cfg")]) == 2


def test_schema_lists_every_key(capsys):
    assert main(["--schema"]) == 0
    text = capsys.readouterr().out
    for key in cf.SCHEMA:
        assert f"{key} = " in text


def test_command_is_required():
    assert main([]) == 2


@given(st.floats(0.3, 1.0), st.floats(0.0, 5.0), st.floats(1e-5, 0.1), st.integers(0, 2**31))
def test_config_text_round_trips(alpha, sigma, dt, seed):
    cfg = cf.parse_text("").override(**{"model.alpha": alpha, "model.sigma": sigma,
                                        "run.dt": dt, "noise.seed": seed})
    back = cf.parse_text(cfg.to_text())
    assert back.values == cfg.values
    assert back.hash == cfg.hash


def test_comments_and_overrides():
    cfg = cf.parse_text("# header\nmodel.gamma = 0.5  # damping\n")
    assert cfg["model.gamma"] == 0.5
    assert cfg.override(**{"run.paths": 7}).paths == 7
    with pytest.raises(cf.ConfigError):
        cfg.override(**{"run.path": 7})


def test_simulate_reports_forcing_bounds_and_data_metrics(run_cli):
    extra = "forcing.family = linear_phase\nforcing.beta = 0.2\n"
    code, out = run_cli("simulate", extra)
    assert code == 0
    recs = {r["record"]: r for r in _records(out)}
    assert recs["forcing_bounds"]["passed"] is True
    assert recs["forcing_bounds"]["worst_growth_margin"] >= -1e-12
    assert recs["initial_data"]["radiality_deviation"] >= 0
