"""Configuration, file formats, manifest, stage commands, and the CLI."""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from ces.emulation.gp import GpFitError
from ces.pipeline.config import (
    PRESET_NAMES,
    ConfigError,
    load_config,
    load_preset,
    validate_config,
)
from ces.pipeline.io import read_csv, read_csv_floats, read_json, write_csv
from ces.pipeline.manifest import RunManifest, config_hash, file_sha256
from ces.pipeline.runner import (
    CALIBRATION_SUMMARY,
    DIAGNOSTICS_FILE,
    EMULATOR_FILE,
    SNAPSHOT_FILE,
    chain_file_name,
    cmd_calibrate,
    cmd_emulate,
    cmd_run,
    cmd_sample,
    load_snapshots,
)


def _linear_config(out_dir, **overrides):
    config = {
        "version": 1,
        "seed": 1,
        "output_dir": str(out_dir),
        "problem": {"kind": "linear", "truth": [-1.0, 2.0], "output_dim": 8,
                    "noise_std": 0.1},
        "prior": {"mean": [0.0, 0.0], "diag": [1.0, 1.0]},
        "calibration": {"ensemble_size": 30, "n_iterations": 8},
        "emulation": {"n_restarts": 2},
        "sampling": {"n_samples": 500, "misfit": "phi_gp_combined"},
    }
    for key, val in overrides.items():
        if isinstance(val, dict):
            config.setdefault(key, {}).update(val)
        else:
            config[key] = val
    return validate_config(config)


# configuration ---------------------------------------------------------------

def test_all_presets_validate():
    for name in PRESET_NAMES:
        config = load_preset(name)
        assert config["version"] == 1
        assert "seed" in config and "sampling" in config


def test_unknown_top_level_key_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        validate_config({"version": 1, "bogus": 1,
                         "problem": {"kind": "linear", "truth": [0.0]},
                         "prior": {"mean": [0.0], "diag": [1.0]}})


def test_error_names_the_offending_field():
    with pytest.raises(ConfigError, match=r"\$\.sampling\.n_samples"):
        validate_config({"version": 1,
                         "problem": {"kind": "linear", "truth": [0.0]},
                         "prior": {"mean": [0.0], "diag": [1.0]},
                         "sampling": {"n_samples": 0}})


def test_unknown_problem_kind_rejected():
    with pytest.raises(ConfigError):
        validate_config({"version": 1, "problem": {"kind": "pendulum"},
                         "prior": {"mean": [0.0], "diag": [1.0]}})


def test_prior_dimension_mismatch_rejected():
    with pytest.raises(ConfigError, match="parameter count"):
        validate_config({"version": 1,
                         "problem": {"kind": "lorenz63", "truth": [3.3, 1.0]},
                         "prior": {"mean": [0.0], "diag": [1.0]}})


def test_prior_needs_cov_or_diag_not_both():
    base = {"version": 1, "problem": {"kind": "linear", "truth": [0.0]}}
    with pytest.raises(ConfigError):
        validate_config({**base, "prior": {"mean": [0.0]}})
    with pytest.raises(ConfigError):
        validate_config({**base, "prior": {"mean": [0.0], "diag": [1.0],
                                           "cov": [[1.0]]}})


def test_defaults_filled_in():
    config = validate_config({"version": 1,
                              "problem": {"kind": "linear", "truth": [0.0]},
                              "prior": {"mean": [0.0], "diag": [1.0]}})
    assert config["seed"] == 0
    assert config["calibration"]["variant"] == "eks"
    assert config["sampling"]["misfit"] == "phi_gp_combined"
    assert config["problem"]["noise_std"] == 0.1


def test_invalid_json_file_reports_config_error(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError, match="not valid JSON"):
        load_config(str(path))


def test_unknown_preset_rejected():
    with pytest.raises(ConfigError):
        load_preset("unknown")


# file formats ----------------------------------------------------------------

def test_csv_float_round_trip_bit_exact(tmp_path):
    path = tmp_path / "table.csv"
    rng = np.random.default_rng(0)
    rows = rng.standard_normal((20, 3)) * 10.0 ** rng.integers(-8, 8, (20, 3))
    write_csv(path, ["a", "b", "c"], rows)
    header, loaded = read_csv_floats(path)
    assert header == ["a", "b", "c"]
    np.testing.assert_array_equal(loaded, rows)


def test_csv_uses_crlf_line_endings(tmp_path):
    path = tmp_path / "table.csv"
    write_csv(path, ["x"], [[1.5]])
    assert path.read_bytes() == b"x\r\n1.5\r\n"


def test_csv_header_preserved_as_strings(tmp_path):
    path = tmp_path / "mixed.csv"
    write_csv(path, ["name", "value"], [["theta_1", 0.25]])
    header, rows = read_csv(path)
    assert rows == [["theta_1", "0.25"]]


# manifest ----------------------------------------------------------------

def test_config_hash_order_independent():
    a = {"x": 1, "y": {"b": 2, "a": 3}}
    b = {"y": {"a": 3, "b": 2}, "x": 1}
    assert config_hash(a) == config_hash(b)
    assert config_hash(a) != config_hash({"x": 2, "y": {"a": 3, "b": 2}})


def test_manifest_records_and_reloads(tmp_path):
    manifest = RunManifest(str(tmp_path), "abc", seed=7)
    artifact = tmp_path / "data.csv"
    artifact.write_text("x\r\n1\r\n")
    manifest.record_file(str(artifact))
    manifest.record_stage("calibrate", "ok", 1.5)
    manifest.write()

    loaded = RunManifest.load_or_create(str(tmp_path), "abc", seed=7)
    assert loaded.files["data.csv"] == file_sha256(artifact)
    assert loaded.stages["calibrate"]["status"] == "ok"


def test_manifest_reset_on_config_change(tmp_path):
    manifest = RunManifest(str(tmp_path), "abc", seed=7)
    manifest.record_stage("calibrate", "ok", 1.0)
    manifest.write()
    fresh = RunManifest.load_or_create(str(tmp_path), "different", seed=7)
    assert fresh.stages == {}


# stage commands ------------------------------------------------------------

def test_calibrate_writes_snapshots_and_summary(tmp_path):
    config = _linear_config(tmp_path)
    summary = cmd_calibrate(config)
    assert (tmp_path / SNAPSHOT_FILE).exists()
    assert (tmp_path / CALIBRATION_SUMMARY).exists()
    header, table = read_csv_floats(tmp_path / SNAPSHOT_FILE)
    assert header[:2] == ["iteration", "particle"]
    assert table.shape == (30, 2 + 2 + 8)  # final snapshot only
    assert len(summary["final_mean"]) == 2
    manifest = read_json(tmp_path / "manifest.json")
    assert manifest["stages"]["calibrate"]["status"] == "ok"
    assert SNAPSHOT_FILE in manifest["files"]


def test_calibrate_zero_iterations_single_prior_snapshot(tmp_path):
    config = _linear_config(tmp_path, calibration={"n_iterations": 0})
    cmd_calibrate(config)
    snapshots = load_snapshots(str(tmp_path), 2, 8)
    assert len(snapshots) == 1 and snapshots[0].iteration == 0


def test_calibrate_rerun_same_seed_identical_artifacts(tmp_path):
    config = _linear_config(tmp_path / "a")
    cmd_calibrate(config)
    config2 = _linear_config(tmp_path / "b")
    cmd_calibrate(config2)
    assert (file_sha256(tmp_path / "a" / SNAPSHOT_FILE)
            == file_sha256(tmp_path / "b" / SNAPSHOT_FILE))


def test_emulate_insufficient_design_raises(tmp_path):
    config = _linear_config(tmp_path, calibration={"ensemble_size": 3,
                                                   "n_iterations": 1})
    cmd_calibrate(config)
    with pytest.raises(GpFitError):
        cmd_emulate(config)


def test_full_run_produces_chain_and_diagnostics(tmp_path):
    config = _linear_config(tmp_path)
    results = cmd_run(config, burn_in=100)
    assert (tmp_path / EMULATOR_FILE).exists()
    assert (tmp_path / "chain.csv").exists()
    assert (tmp_path / "trace.csv").exists()
    assert (tmp_path / "forest.csv").exists()
    header, table = read_csv_floats(tmp_path / "chain.csv")
    assert header == ["step", "accept", "logpost", "theta_1", "theta_2"]
    assert table.shape[0] == 500
    diag = read_json(tmp_path / DIAGNOSTICS_FILE)
    assert len(diag["chains"]) == 1
    assert diag["chains"][0]["burn_in"] == 100
    assert 0.0 < results["sample"]["chains"][0]["acceptance_rate"] < 1.0


def test_sampled_chain_reloads_from_disk_bit_exact(tmp_path):
    config = _linear_config(tmp_path)
    cmd_run(config)
    header, table = read_csv_floats(tmp_path / "chain.csv")
    # re-sampling with the same artifacts reproduces the file exactly
    digest = file_sha256(tmp_path / "chain.csv")
    cmd_sample(config)
    assert file_sha256(tmp_path / "chain.csv") == digest


def test_multi_chain_file_naming(tmp_path):
    assert chain_file_name(0, 1) == "chain.csv"
    assert chain_file_name(2, 3) == "chain_02.csv"
    config = _linear_config(tmp_path, sampling={"n_chains": 2, "n_samples": 200})
    cmd_run(config)
    assert (tmp_path / "chain_00.csv").exists()
    assert (tmp_path / "chain_01.csv").exists()
    _, t0 = read_csv_floats(tmp_path / "chain_00.csv")
    _, t1 = read_csv_floats(tmp_path / "chain_01.csv")
    assert not np.array_equal(t0, t1)  # different chain seeds


def test_direct_misfit_run_skips_emulation(tmp_path):
    config = _linear_config(tmp_path, sampling={"misfit": "phi_T_direct",
                                                "n_samples": 300})
    cmd_run(config)
    assert not (tmp_path / EMULATOR_FILE).exists()
    assert (tmp_path / "chain.csv").exists()


def test_emulator_artifact_reloads_and_predicts(tmp_path):
    from ces.emulation.emulator import GpEmulator
    config = _linear_config(tmp_path)
    cmd_calibrate(config)
    cmd_emulate(config)
    emulator = GpEmulator.load(tmp_path / EMULATOR_FILE)
    mean, cov = emulator.predict(np.array([-1.0, 2.0]))
    assert mean.shape == (8,) and cov.shape == (8, 8)
    assert np.all(np.isfinite(mean))


# command-line interface -------------------------------------------------------

def _cli(*args):
    return subprocess.run([sys.executable, "-m", "ces.pipeline.cli", *args],
                          capture_output=True, text=True)


def test_cli_preset_prints_valid_json():
    result = _cli("preset", "linear")
    assert result.returncode == 0
    payload = json.loads(result.stdout)
    assert payload["problem"]["kind"] == "linear"


def test_cli_exit_code_2_on_invalid_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"version": 1}))
    result = _cli("calibrate", "--config", str(path))
    assert result.returncode == 2
    assert "configuration error" in result.stderr


def test_cli_exit_code_3_on_numerical_failure(tmp_path):
    # ensemble too small for GP fitting: emulation fails numerically
    config = _linear_config(tmp_path / "out",
                            calibration={"ensemble_size": 3, "n_iterations": 1})
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    assert _cli("calibrate", "--config", str(path)).returncode == 0
    result = _cli("emulate", "--config", str(path))
    assert result.returncode == 3
    assert "numerical failure" in result.stderr


def test_cli_exit_code_4_on_missing_snapshots(tmp_path):
    config = _linear_config(tmp_path / "out")
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    # emulate before calibrate: the snapshot file does not exist
    result = _cli("emulate", "--config", str(path))
    assert result.returncode == 4
    assert "I/O failure" in result.stderr


def test_cli_seed_and_out_overrides(tmp_path):
    config = _linear_config(tmp_path / "ignored",
                            calibration={"ensemble_size": 10, "n_iterations": 2})
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    out = tmp_path / "actual"
    result = _cli("calibrate", "--config", str(path), "--seed", "5",
                  "--out", str(out))
    assert result.returncode == 0
    assert (out / SNAPSHOT_FILE).exists()
    manifest = read_json(out / "manifest.json")
    assert manifest["seed"] == 5
