import csv
import json
import os

import numpy as np
import pytest

from pqwgan import cli
from pqwgan import trainer as T
from pqwgan.config import load_params, parse_config, save_params
from pqwgan.data import read_pgm, write_idx_images, write_idx_labels
from pqwgan.errors import ConfigError, ParseError

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
CONFIGS = os.path.join(ROOT, "configs")

TINY = {
    "n_patches": 4, "n_data": 2, "n_ancilla": 1, "n_layers": 1,
    "image_height": 4, "image_width": 4, "batch_size": 3, "n_critic": 2,
    "generator_iterations": 3, "checkpoint_every": 2, "dataset": "bars", "bars_per_class": 4,
}


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def summary_counts(path):
    with open(path) as f:
        return [int(r["parameter_count"]) for r in csv.DictReader(f)]


# --- count-params and sweeps ----------------------------------------------

def test_count_params_default_config(capsys):
    assert cli.main(["count-params", "--config", os.path.join(CONFIGS, "mnist01.json")]) == 0
    out = capsys.readouterr().out
    assert "quantum_generator: 5376" in out
    assert "critic: 533505" in out
    assert "baseline_generator: 1462800" in out


def test_patch_count_sweep(tmp_path):
    spec = os.path.join(CONFIGS, "sweep_patches.json")
    assert cli.main(["sweep", "--sweep-spec", spec, "--out", str(tmp_path), "--dry-run"]) == 0
    assert summary_counts(tmp_path / "summary.csv") == [5049, 5040, 5076, 5040, 4998, 5040]


def test_data_qubit_sweep(tmp_path):
    spec = os.path.join(CONFIGS, "sweep_data_qubits.json")
    assert cli.main(["sweep", "--sweep-spec", spec, "--out", str(tmp_path), "--dry-run"]) == 0
    assert summary_counts(tmp_path / "summary.csv") == [7560, 7644, 7392, 7560]


def test_empty_sweep_is_an_error(tmp_path):
    spec = write_json(tmp_path / "s.json", {"base": {}, "runs": []})
    assert cli.main(["sweep", "--sweep-spec", spec, "--out", str(tmp_path / "o")]) == 2


def test_sweep_validates_every_run_before_starting(tmp_path, capsys):
    spec = write_json(tmp_path / "s.json", {"base": TINY, "runs": [
        {"name": "ok"}, {"name": "broken", "n_data": 1},
    ]})
    out = tmp_path / "o"
    assert cli.main(["sweep", "--sweep-spec", spec, "--out", str(out)]) == 2
    assert "broken" in capsys.readouterr().err
    assert not out.exists()


def test_sweep_runs_each_configuration(tmp_path):
    spec = write_json(tmp_path / "s.json", {"base": TINY, "runs": [
        {"name": "one"}, {"name": "two", "n_layers": 2},
    ]})
    out = tmp_path / "o"
    assert cli.main(["sweep", "--sweep-spec", spec, "--out", str(out)]) == 0
    for name in ("one", "two"):
        assert (out / name / "log.csv").exists() and (out / name / "manifest.json").exists()
    with open(out / "summary.csv") as f:
        rows = list(csv.DictReader(f))
    assert [r["parameter_count"] for r in rows] == ["36", "72"]
    assert all(r["final_wasserstein"] for r in rows)


# --- config parsing -------------------------------------------------------

def test_unknown_key_is_rejected():
    with pytest.raises(ConfigError, match="n_layer"):
        parse_config({"n_layer": 3})


def test_invalid_config_exit_code(tmp_path, capsys):
    cfg = write_json(tmp_path / "c.json", {"n_patches": 28, "n_data": 4})
    assert cli.main(["count-params", "--config", cfg]) == 2
    assert "2**n_data" in capsys.readouterr().err


def test_malformed_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{nope")
    assert cli.main(["count-params", "--config", str(p)]) == 2


# --- parameter file -------------------------------------------------------

def test_param_file_round_trip_and_layout(tmp_path):
    theta = np.random.default_rng(0).random((2, 3, 4, 3))
    save_params(theta, tmp_path / "p")
    raw = (tmp_path / "p").read_bytes()
    assert raw[:4] == b"PQWG" and len(raw) == 16 + 8 * theta.size
    assert np.array_equal(np.frombuffer(raw[16:], "<f8"), theta.ravel())
    assert np.array_equal(load_params(tmp_path / "p"), theta)


def test_param_file_bad_magic(tmp_path):
    (tmp_path / "p").write_bytes(b"XXXX" + bytes(12))
    with pytest.raises(ParseError):
        load_params(tmp_path / "p")


# --- train / generate / interpolate ---------------------------------------

@pytest.fixture
def trained(tmp_path):
    cfg = write_json(tmp_path / "c.json", TINY)
    out = tmp_path / "run"
    assert cli.main(["train", "--config", cfg, "--out", str(out), "--seed", "7"]) == 0
    return cfg, out


def test_train_writes_all_outputs(trained):
    _, out = trained
    names = set(os.listdir(out))
    assert {"manifest.json", "log.csv", "generator.pqwg", "critic.npz",
            "samples_00002.pgm", "samples_00003.pgm"} <= names
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["seed"] == 7 and manifest["command"] == "train"
    assert manifest["quantum_parameter_count"] == 36
    assert manifest["config_snapshot"]["n_layers"] == 1


def test_train_is_byte_deterministic(trained, tmp_path):
    cfg, out = trained
    again = tmp_path / "again"
    assert cli.main(["train", "--config", cfg, "--out", str(again), "--seed", "7"]) == 0
    for name in ("log.csv", "generator.pqwg", "samples_00003.pgm"):
        assert (out / name).read_bytes() == (again / name).read_bytes()


def test_manifest_reports_full_size_count(tmp_path, monkeypatch):
    # stop right after the manifest is written
    monkeypatch.setattr(cli, "load_run_dataset", lambda cfg, seed: (_ for _ in ()).throw(cli.UsageError("stop")))
    out = tmp_path / "m"
    cli.main(["train", "--config", os.path.join(CONFIGS, "mnist01.json"), "--out", str(out)])
    assert json.loads((out / "manifest.json").read_text())["quantum_parameter_count"] == 5376


def test_missing_dataset_path(tmp_path, capsys):
    missing = str(tmp_path / "absent-images")
    code = cli.main(["train", "--config", os.path.join(CONFIGS, "mnist01.json"), "--out",
                     str(tmp_path / "o"), "--dataset-images", missing, "--dataset-labels", missing])
    assert code == 2 and missing in capsys.readouterr().err


def test_train_from_idx_files(tmp_path):
    rng = np.random.default_rng(0)
    write_idx_images(rng.random((12, 4, 4)), tmp_path / "img")
    write_idx_labels(np.arange(12) % 3, tmp_path / "lab")
    cfg = write_json(tmp_path / "c.json", {**TINY, "dataset": "idx", "per_class": 2})
    code = cli.main(["train", "--config", cfg, "--out", str(tmp_path / "o"),
                     "--dataset-images", str(tmp_path / "img"), "--dataset-labels", str(tmp_path / "lab"),
                     "--classes", "0,2"])
    assert code == 0


def test_runtime_failure_flushes_partial_log(tmp_path, monkeypatch):
    partial = T.TrainingLog([T.LogRecord("critic", 1, 0.5, 0.1)])

    def boom(*a, **k):
        raise T.TrainingAborted("iteration 1, patch 0", partial, 1)

    monkeypatch.setattr(T, "train", boom)
    cfg = write_json(tmp_path / "c.json", TINY)
    assert cli.main(["train", "--config", cfg, "--out", str(tmp_path / "o")]) == 3
    assert len((tmp_path / "o" / "log.csv").read_text().splitlines()) == 2


def test_generate_grid_shape_and_determinism(trained, tmp_path):
    cfg, out = trained
    a, b = tmp_path / "ga", tmp_path / "gb"
    for d in (a, b):
        assert cli.main(["generate", "--config", cfg, "--params", str(out / "generator.pqwg"),
                         "--out", str(d), "--n", "25", "--seed", "3"]) == 0
    assert read_pgm(a / "samples.pgm").shape == (5 * 4 + 4 * 2, 5 * 4 + 4 * 2)
    assert (a / "samples.pgm").read_bytes() == (b / "samples.pgm").read_bytes()


def test_generate_shape_mismatch_names_both_counts(trained, tmp_path, capsys):
    _, out = trained
    other = write_json(tmp_path / "c2.json", {**TINY, "n_layers": 2})
    code = cli.main(["generate", "--config", other, "--params", str(out / "generator.pqwg"),
                     "--out", str(tmp_path / "g")])
    err = capsys.readouterr().err
    assert code == 2 and "36" in err and "72" in err


def test_interpolate_strip_lengths(trained, tmp_path):
    cfg, out = trained
    params = str(out / "generator.pqwg")
    assert cli.main(["interpolate", "--config", cfg, "--params", params, "--out", str(tmp_path / "i")]) == 0
    assert read_pgm(tmp_path / "i" / "interpolation.pgm").shape == (4, 11 * 4 + 10 * 2)
    assert cli.main(["interpolate", "--config", cfg, "--params", params, "--out", str(tmp_path / "j"),
                     "--segments", "1"]) == 0
    assert read_pgm(tmp_path / "j" / "interpolation.pgm").shape == (4, 2 * 4 + 2)


def test_interpolate_identical_endpoints_is_constant(trained, tmp_path):
    cfg, out = trained
    z = "0.1,0.2,0.3"
    assert cli.main(["interpolate", "--config", cfg, "--params", str(out / "generator.pqwg"),
                     "--out", str(tmp_path / "i"), "--z-a", z, "--z-b", z]) == 0
    px = read_pgm(tmp_path / "i" / "interpolation.pgm")
    tiles = [px[:, k * 6 : k * 6 + 4] for k in range(11)]
    assert all(np.array_equal(t, tiles[0]) for t in tiles)


def test_interpolate_rejects_wrong_latent_length(trained, tmp_path):
    cfg, out = trained
    assert cli.main(["interpolate", "--config", cfg, "--params", str(out / "generator.pqwg"),
                     "--out", str(tmp_path / "i"), "--z-a", "0.1,0.2"]) == 2


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as info:
        cli.main(["train"])
    assert info.value.code == 2
