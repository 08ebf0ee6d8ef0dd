"""Command-line interface: subcommands, config files, overrides, and
error reporting."""

import json

import pytest

from popfuse.cli import main


@pytest.fixture(scope="module")
def cohort_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cohort")
    code = main(["synth", "--out", str(out), "--n_subjects=24",
                 "--n_sites=2", "--func_regions=8", "--struct_regions=8",
                 "--class_separation=2.0", "--signature_fraction=0.2"])
    assert code == 0
    return out


def _config_file(tmp_path, cohort_dir, **extra):
    lines = [f"cohort_dir = {cohort_dir}",
             f"out_dir = {tmp_path / 'run'}",
             "k = 3", "epochs = 3", "target_dim = 10",
             "hidden_dim = 4", "n_gcn_layers = 2", "n_heads = 2",
             "pae_latent_dim = 8",
             "# trailing comment line"]
    lines += [f"{key} = {val}" for key, val in extra.items()]
    path = tmp_path / "config.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def test_synth_writes_manifest(cohort_dir):
    manifest = cohort_dir / "manifest.csv"
    assert manifest.exists()
    assert len(manifest.read_text().splitlines()) == 25  # header + 24 rows


def test_synth_rejects_unknown_key(tmp_path, capsys):
    code = main(["synth", "--out", str(tmp_path), "--wibble=3"])
    assert code == 1
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "ConfigError"
    assert "wibble" in record["message"]


def test_prep_writes_pipeline(cohort_dir, tmp_path):
    out = tmp_path / "pipe.json"
    code = main(["prep", "--cohort", str(cohort_dir), "--modality", "func",
                 "--target-dim", "10", "--out", str(out)])
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["modality"] == "func"
    assert len(doc["selected_indices"]) == 10


def test_train_with_config_and_override(cohort_dir, tmp_path, capsys):
    config = _config_file(tmp_path, cohort_dir)
    code = main(["train", "--config", str(config), "--epochs=2"])
    assert code == 0
    report = json.loads((tmp_path / "run" / "report.json").read_text())
    assert report["config"]["epochs"] == 2
    assert len(report["per_fold"]) == 3
    assert "artifacts written" in capsys.readouterr().out


def test_train_unknown_config_key(cohort_dir, tmp_path, capsys):
    config = _config_file(tmp_path, cohort_dir)
    code = main(["train", "--config", str(config), "--banana=1"])
    assert code == 1
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "ConfigError"


def test_train_missing_cohort(tmp_path, capsys):
    config = tmp_path / "config.txt"
    config.write_text(f"cohort_dir = {tmp_path / 'missing'}\n"
                      f"out_dir = {tmp_path / 'run'}\n")
    code = main(["train", "--config", str(config)])
    assert code == 1
    record = json.loads(capsys.readouterr().err)
    assert record["error"] == "CohortError"


def test_loso_subcommand(cohort_dir, tmp_path):
    config = _config_file(tmp_path, cohort_dir)
    code = main(["loso", "--config", str(config)])
    assert code == 0
    assert (tmp_path / "run" / "site_accuracy.csv").exists()


def test_ablate_subcommand(cohort_dir, tmp_path):
    config = _config_file(tmp_path, cohort_dir, epochs=2)
    code = main(["ablate", "--config", str(config), "--epochs=2"])
    assert code == 0
    assert (tmp_path / "run" / "modality_summary.csv").exists()


def test_fusion_grid_subcommand(cohort_dir, tmp_path):
    config = _config_file(tmp_path, cohort_dir)
    code = main(["fusion-grid", "--config", str(config), "--epochs=2"])
    assert code == 0
    assert (tmp_path / "run" / "fusion_summary.csv").exists()


def test_gradcheck_subcommand(capsys):
    code = main(["gradcheck"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.count("[PASS]") == 3
