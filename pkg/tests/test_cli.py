import json

import pytest

from magig.core.exception_error import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE
from magig.main import main

METHODS = ("gxi", "ig", "gig", "eig", "magig")

PIPELINE = """
[experiment]
samples = 3
workers = {workers}

[dataset]
kind = circle
ambient_dim = 4
samples = 200

[classifier]
hidden = 8
epochs = 10
accuracy_floor = 0.0

[autoencoder]
mode = exact-chart

{methods}

[evaluation]
levels = 6
fractions = 0.25, 0.5
"""


def method_sections(steps: int = 6) -> str:
    return "\n".join(f"[method:{name}]\nmethod = {name}\nsteps = {steps}\n" for name in METHODS)


def write_config(path, workers: int = 1):
    path.write_text(PIPELINE.format(workers=workers, methods=method_sections()))
    return str(path)


def run_pipeline(root, workers: int = 1):
    config = write_config(root.parent / f"{root.name}.ini", workers)
    out = str(root)
    assert main(["gen-data", "--config", config, "--out", out, "--seed", "3"]) == EXIT_OK
    assert main(["train-classifier", "--config", config, "--out", out, "--seed", "3"]) == EXIT_OK
    assert main(["train-vae", "--config", config, "--out", out, "--seed", "3"]) == EXIT_OK
    vae = str(root / "autoencoder.ckpt")
    assert main(["attribute", "--config", config, "--out", out, "--seed", "3", "--vae", vae]) == EXIT_OK
    assert main(["evaluate", "--config", config, "--out", out, "--seed", "3"]) == EXIT_OK


class TestUsage:
    def test_no_command(self, capsys):
        assert main([]) == EXIT_USAGE
        assert "errors" in json.loads(capsys.readouterr().err.strip().splitlines()[-1])

    def test_unknown_flag(self):
        assert main(["gen-data", "--bogus"]) == EXIT_USAGE

    def test_zero_samples(self, tmp_path):
        assert main(["gen-data", "--out", str(tmp_path), "--samples", "0"]) == EXIT_RUNTIME
        assert not (tmp_path / "dataset.csv").exists()

    def test_latent_method_needs_vae(self, tmp_path, capsys):
        out = str(tmp_path)
        assert main(["gen-data", "--out", out, "--samples", "50"]) == EXIT_OK
        code = main(["attribute", "--out", out, "--method", "magig"])
        assert code == EXIT_USAGE
        assert "--vae" in capsys.readouterr().err

    def test_bad_sample_ids(self, tmp_path):
        assert main(["attribute", "--out", str(tmp_path), "--method", "ig", "--sample-ids", "1,x"]) == EXIT_USAGE


class TestDataGeneration:
    def test_same_seed_same_bytes(self, tmp_path):
        for name in ("a", "b"):
            assert main(["gen-data", "--out", str(tmp_path / name), "--seed", "11", "--samples", "64"]) == EXIT_OK
        for artefact in ("dataset.csv", "dataset.json"):
            assert (tmp_path / "a" / artefact).read_bytes() == (tmp_path / "b" / artefact).read_bytes()

    def test_summary_on_stdout(self, tmp_path, capsys):
        assert main(["gen-data", "--out", str(tmp_path), "--samples", "40"]) == EXIT_OK
        response = json.loads(capsys.readouterr().out)
        assert response["data"]["samples"] == 40
        assert sum(response["data"]["label_counts"]) == 40


@pytest.mark.slow
class TestPipeline:
    def test_one_file_per_method_and_sample(self, tmp_path):
        root = tmp_path / "run"
        run_pipeline(root)
        for name in METHODS:
            assert len(list((root / "attributions" / name).glob("*.ckpt"))) == 3
        for artefact in ("attributions.csv", "timings.csv", "evaluation.csv", "curves.csv", "sweep.csv",
                         "report.json", "report.jsonl"):
            assert (root / artefact).exists()
        report = json.loads((root / "report.json").read_text())
        assert sorted(row["label"] for row in report["ranking"]) == sorted(METHODS)
        assert report["failures"] == []

    def test_rerun_is_byte_identical(self, tmp_path):
        run_pipeline(tmp_path / "serial")
        run_pipeline(tmp_path / "threaded", workers=2)
        for artefact in ("dataset.csv", "classifier.ckpt", "autoencoder.ckpt", "attributions.csv", "evaluation.csv",
                         "sweep.csv", "curves.csv", "attributions/magig/" + sorted(
                             p.name for p in (tmp_path / "serial" / "attributions" / "magig").glob("*.ckpt"))[0]):
            assert (tmp_path / "serial" / artefact).read_bytes() == (tmp_path / "threaded" / artefact).read_bytes()

    def test_path_diagnostics_and_report(self, tmp_path):
        root = tmp_path / "run"
        run_pipeline(root)
        config = str(tmp_path / "run.ini")
        assert main(["path-diagnostics", "--config", config, "--out", str(root), "--seed", "3"]) == EXIT_OK
        assert (root / "profile_auc.csv").exists()
        assert main(["report", "--config", config, "--out", str(root), "--runs", str(root)]) == EXIT_OK
