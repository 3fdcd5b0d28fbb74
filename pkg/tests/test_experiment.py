"""Experiment runs driven through ExperimentService: per-job failures and the shapes benchmark."""
import pandas as pd
import pytest

from magig.schema.experiment_schema import ExperimentConfig, MethodConfig
from magig.service.experiment_service import ExperimentService

SMALL = """
[experiment]
seed = 2
output_dir = {out}
samples = 4

[dataset]
kind = circle
ambient_dim = 4
samples = 200
seed = 2

[classifier]
hidden = 8
epochs = 5
accuracy_floor = 0.0

[method:ig]
method = ig
steps = 8

[method:gig]
method = gig
steps = 8

[evaluation]
levels = 6
fractions = 0.25, 0.5
"""

SHAPES = """
[experiment]
seed = {seed}
output_dir = {out}
samples = 34

[dataset]
kind = shapes
ambient_dim = 64
samples = 600
seed = {seed}

[classifier]
hidden = 32
epochs = 60
accuracy_floor = 0.8

[autoencoder]
mode = trained
latent_dim = 8
hidden = 32
activation = relu
epochs = 30
learning_rate = 0.001
mse_ceiling = 1.0
pca_warm_start = true

[method:ig]
method = ig
steps = 200

[method:gig]
method = gig
steps = 200

[method:magig]
method = magig
steps = 200

[evaluation]
levels = 21
fractions = 0.05, 0.1, 0.2
sweep_methods = gig, magig
"""

SEEDS = (0, 1, 2)


@pytest.fixture
def service():
    return ExperimentService()


def prepare(service, cfg, autoencoder: bool = True):
    service.gen_data(cfg)
    service.train_classifier(cfg)
    if autoencoder:
        service.train_autoencoder(cfg)


class TestJobFailures:
    def test_bad_method_config_is_recorded_not_raised(self, service, tmp_path):
        cfg = ExperimentConfig.from_text(SMALL.format(out=tmp_path))
        prepare(service, cfg, autoencoder=False)
        # bypasses validation so the request built inside each job is rejected
        cfg.methods.append(MethodConfig.model_construct(
            label="broken", method="gig", steps=0, fraction=0.5, eta=0.5, interpolation="linear"
        ))

        attributed = service.attribute(service.context(cfg))
        assert attributed.data["attributions"] == 2 * 4
        assert len(attributed.failures) == 4
        assert all(failure.startswith("broken/") for failure in attributed.failures)

        evaluated = service.evaluate(service.context(cfg))
        assert "broken: no attributions found" in evaluated.failures
        assert any(failure.startswith("sweep broken q=") for failure in evaluated.failures)
        assert any(failure.startswith("profile broken/") for failure in evaluated.failures)
        assert set(pd.DataFrame(evaluated.data.rows)["label"]) == {"ig", "gig"}

    def test_single_step_methods_run_path_diagnostics_only(self, service, tmp_path):
        cfg = ExperimentConfig.from_text(SMALL.format(out=tmp_path).replace("steps = 8", "steps = 1"))
        prepare(service, cfg, autoencoder=False)

        diagnostics = service.path_diagnostics(service.context(cfg))
        assert diagnostics.complete
        assert {row["count"] for row in diagnostics.data["auc"]} == {4}

        attributed = service.attribute(service.context(cfg))
        assert attributed.data["attributions"] == 0
        assert len(attributed.failures) == 2 * 4


@pytest.fixture(scope="module")
def shapes_report(tmp_path_factory):
    service = ExperimentService()
    runs = []
    for seed in SEEDS:
        out = tmp_path_factory.mktemp(f"shapes-{seed}")
        cfg = ExperimentConfig.from_text(SHAPES.format(seed=seed, out=out))
        prepare(service, cfg)
        service.attribute(service.context(cfg))
        assert service.evaluate(service.context(cfg)).complete
        runs.append(str(out))
    summary = ExperimentConfig.from_text(SHAPES.format(seed=SEEDS[0], out=tmp_path_factory.mktemp("shapes-report")))
    return service.report(summary, runs).data


def _mean(report, label: str, column: str) -> float:
    rows = [row for row in report.aggregates if row["label"] == label and not row["absolute"]]
    return rows[0][f"{column}_mean"]


@pytest.mark.slow
class TestShapesBenchmark:
    def test_enough_paired_samples(self, shapes_report):
        rows = pd.DataFrame(shapes_report.rows)
        assert sorted(rows["seed"].unique()) == list(SEEDS)
        assert (rows["label"] == "magig").sum() >= 100

    @pytest.mark.parametrize("reference", ["ig", "gig"])
    def test_magig_diffid_beats_reference(self, shapes_report, reference):
        assert _mean(shapes_report, "magig", "diffid") >= _mean(shapes_report, reference, "diffid")
        test = next(t for t in shapes_report.sign_tests
                    if t["reference"] == reference and t["metric"] == "diffid")
        assert test["p_value"] < 0.05
        assert len(test["per_seed"]) == len(SEEDS)

    def test_magig_residual_not_above_gig(self, shapes_report):
        assert _mean(shapes_report, "magig", "completeness_residual") <= _mean(shapes_report, "gig", "completeness_residual")

    def test_fraction_sweep(self, shapes_report):
        sweep = pd.DataFrame(shapes_report.sweep)
        magig = sweep[sweep["label"] == "magig"].set_index("fraction")
        gig = sweep[sweep["label"] == "gig"].set_index("fraction")
        assert sorted(magig.index) == [0.05, 0.1, 0.2]
        assert (magig["diffid"] >= gig.loc[magig.index, "diffid"]).all()
        assert magig["relative_spread"].iloc[0] < 0.15
