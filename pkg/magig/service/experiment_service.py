"""End-to-end pipeline behind the command line.

Every stage reads and writes inside one run directory, so a run can be resumed
stage by stage and two runs with the same config produce identical files
(timings aside, which live in their own table).
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

import magig
from magig.core.exception_error import PreconditionError, ToolkitError, UsageError
from magig.core.logger import logger
from magig.core.manifold import AnalyticManifold, build_manifold
from magig.model.autoencoder_model import Autoencoder
from magig.model.classifier_model import Classifier
from magig.model.dataset_model import Dataset
from magig.model.network_model import MlpSpec, TrainConfig
from magig.repository.attribution_repository import AttributionRepository
from magig.repository.dataset_repository import DatasetRepository
from magig.repository.report_repository import TIMINGS, ReportRepository
from magig.schema.attribution_schema import AttributionRequest, PathRequest
from magig.schema.base_schema import CommandResponse
from magig.schema.experiment_schema import ExperimentConfig, MethodConfig
from magig.schema.report_schema import RunReport
from magig.service.attribution_service import AttributionService
from magig.service.dataset_service import DatasetService, manifold_spec_for, split_indices
from magig.service.metric_service import MetricService, imputation_baseline, uniform_grid
from magig.service.model_service import ModelService, pca_reconstruction_mse

CLASSIFIER_CKPT = "classifier.ckpt"
AUTOENCODER_CKPT = "autoencoder.ckpt"
MANIFOLD_KINDS = ("circle", "sphere", "ellipse", "subspace")

EVALUATION_CSV = "evaluation.csv"
SWEEP_CSV = "sweep.csv"
CURVES_CSV = "curves.csv"
PROFILES_CSV = "profiles.csv"
PROFILE_SUMMARY_CSV = "profile_summary.csv"
PROFILE_SAMPLES_CSV = "profile_samples.csv"
PROFILE_AUC_CSV = "profile_auc.csv"


@dataclass
class RunContext:
    cfg: ExperimentConfig
    root: Path
    dataset: Dataset
    classifier: Classifier
    autoencoder: Optional[Autoencoder] = None
    manifold: Optional[AnalyticManifold] = None
    sample_ids: List[int] = field(default_factory=list)

    @property
    def baseline(self) -> np.ndarray:
        dim = self.dataset.features.shape[1]
        return imputation_baseline(self.cfg.experiment.baseline, self.dataset.mean, dim)

    @property
    def imputation(self) -> np.ndarray:
        dim = self.dataset.features.shape[1]
        return imputation_baseline(self.cfg.evaluation.imputation, self.dataset.mean, dim)

    def target(self, sample_id: int) -> int:
        if self.classifier.num_outputs == 1:
            return 0
        if self.cfg.experiment.target == "label":
            return int(self.dataset.labels[sample_id])
        return int(self.classifier.predict(self.dataset.features[sample_id]))

    def request(self, method: MethodConfig, sample_id: int, target: int, fraction: Optional[float] = None,
                path_only: bool = False) -> PathRequest:
        if method.needs_autoencoder and self.autoencoder is None:
            raise UsageError(f"method '{method.label}' needs an autoencoder checkpoint (--vae)")
        factory = PathRequest if path_only else AttributionRequest
        return factory(
            x=self.dataset.features[sample_id],
            baseline=self.baseline,
            classifier=self.classifier,
            target=target,
            method=method.method,
            steps=method.steps,
            fraction=fraction if fraction is not None else method.fraction,
            eta=method.eta,
            interpolation=method.interpolation,
            autoencoder=self.autoencoder,
        )


def _records(frame: pd.DataFrame) -> List[dict]:
    return [{key: value.item() if isinstance(value, np.generic) else value for key, value in row.items()}
            for row in frame.to_dict("records")]


def _detail(err: Exception) -> str:
    # pydantic validation errors raised inside a job carry no detail field
    return str(getattr(err, "detail", err))


def _fan_out(fn: Callable, items: Sequence, workers: int) -> list:
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class ExperimentService:
    def __init__(self):
        self.dataset_service = DatasetService()
        self.model_service = ModelService()
        self.attribution_service = AttributionService()
        self.metric_service = MetricService()

    @staticmethod
    def _root(cfg: ExperimentConfig) -> Path:
        return Path(cfg.experiment.output_dir)

    # Data and models

    def gen_data(self, cfg: ExperimentConfig) -> CommandResponse[dict]:
        dataset = self.dataset_service.generate(cfg.dataset)
        csv_path, manifest_path = DatasetRepository(self._root(cfg)).save(dataset)
        counts = np.bincount(dataset.labels, minlength=cfg.dataset.classes).tolist()
        return CommandResponse(data={"samples": len(dataset), "label_counts": counts},
                               outputs=[str(csv_path), str(manifest_path)])

    def train_classifier(self, cfg: ExperimentConfig) -> CommandResponse[dict]:
        root = self._root(cfg)
        dataset = DatasetRepository(root).load()
        section = cfg.classifier
        outputs = 1 if section.head == "sigmoid-scalar" else int(dataset.labels.max()) + 1
        spec = MlpSpec(widths=[dataset.features.shape[1], *section.hidden, outputs],
                       activation=section.activation, head=section.head)
        train_cfg = TrainConfig(seed=cfg.experiment.seed, **section.model_dump(exclude={"hidden", "activation", "head"}))
        classifier = self.model_service.train_classifier(dataset, spec, train_cfg)
        path = self.model_service.save_checkpoint(classifier, root / CLASSIFIER_CKPT)
        metrics = classifier.metrics.model_dump(mode="json")
        ReportRepository(root).write_json("classifier.json", metrics)
        return CommandResponse(data=metrics, outputs=[str(path)])

    def train_autoencoder(self, cfg: ExperimentConfig) -> CommandResponse[dict]:
        root = self._root(cfg)
        dataset = DatasetRepository(root).load()
        section = cfg.autoencoder
        if section.mode == "exact-chart":
            if dataset.spec.kind not in MANIFOLD_KINDS:
                raise PreconditionError(f"an exact-chart autoencoder needs an analytic manifold, not '{dataset.spec.kind}' data")
            autoencoder = self.model_service.exact_chart_autoencoder(build_manifold(manifold_spec_for(dataset.spec)),
                                                                     seed=cfg.experiment.seed)
            mse = float(np.mean((autoencoder.reconstruct(dataset.features) - dataset.features) ** 2))
            summary = {"mode": "exact-chart", "latent_dim": autoencoder.latent_dim, "heldout_mse": mse}
        else:
            spec = MlpSpec(widths=[dataset.features.shape[1], *section.hidden, section.latent_dim],
                           activation=section.activation, head="linear")
            train_cfg = TrainConfig(
                seed=cfg.experiment.seed,
                **section.model_dump(exclude={"mode", "latent_dim", "hidden", "activation"}),
            )
            autoencoder = self.model_service.train_autoencoder(dataset, section.latent_dim, spec, train_cfg)
            train, heldout = split_indices(len(dataset), section.holdout_fraction, cfg.experiment.seed)
            summary = {
                "mode": "trained",
                "latent_dim": section.latent_dim,
                **autoencoder.metrics.model_dump(mode="json"),
                "pca_mse": pca_reconstruction_mse(dataset.features[heldout], section.latent_dim,
                                                  fit_on=dataset.features[train]),
            }
        path = self.model_service.save_checkpoint(autoencoder, root / AUTOENCODER_CKPT)
        ReportRepository(root).write_json("autoencoder.json", summary)
        return CommandResponse(data=summary, outputs=[str(path)])

    # Shared loading

    def context(self, cfg: ExperimentConfig, classifier_path=None, autoencoder_path=None,
                default_autoencoder: bool = True, sample_ids: Optional[List[int]] = None) -> RunContext:
        root = self._root(cfg)
        dataset = DatasetRepository(root).load()
        classifier = self.model_service.load_checkpoint(classifier_path or root / CLASSIFIER_CKPT)
        if not isinstance(classifier, Classifier):
            raise UsageError(f"{classifier_path} does not hold a classifier")

        autoencoder = None
        if autoencoder_path is None and default_autoencoder and (root / AUTOENCODER_CKPT).exists():
            autoencoder_path = root / AUTOENCODER_CKPT
        if autoencoder_path is not None:
            autoencoder = self.model_service.load_checkpoint(autoencoder_path)
            if not isinstance(autoencoder, Autoencoder):
                raise UsageError(f"{autoencoder_path} does not hold an autoencoder")

        manifold = None
        if autoencoder is not None and autoencoder.manifold is not None:
            manifold = autoencoder.manifold
        elif dataset.spec.kind in MANIFOLD_KINDS:
            manifold = build_manifold(manifold_spec_for(dataset.spec))

        if sample_ids is None:
            _, heldout = split_indices(len(dataset), cfg.classifier.holdout_fraction, cfg.experiment.seed)
            sample_ids = [int(i) for i in heldout[:cfg.experiment.samples]]
        elif any(not 0 <= i < len(dataset) for i in sample_ids):
            raise UsageError(f"sample ids must lie in [0, {len(dataset)})")
        return RunContext(cfg=cfg, root=root, dataset=dataset, classifier=classifier,
                          autoencoder=autoencoder, manifold=manifold, sample_ids=list(sample_ids))

    # Attribution

    def attribute(self, ctx: RunContext) -> CommandResponse[dict]:
        cfg = ctx.cfg
        if not cfg.methods:
            raise UsageError("no attribution methods configured")
        repository = AttributionRepository(ctx.root)
        targets = {sample_id: ctx.target(sample_id) for sample_id in ctx.sample_ids}
        jobs = [(method, sample_id) for method in cfg.methods for sample_id in ctx.sample_ids]
        logger.info(f"Attributing {len(ctx.sample_ids)} samples with {[m.label for m in cfg.methods]}")

        def run(job: Tuple[MethodConfig, int]):
            method, sample_id = job
            started = time.perf_counter()
            try:
                attribution, _ = self.attribution_service.attribute(ctx.request(method, sample_id, targets[sample_id]))
                path = repository.save(attribution, method.label, sample_id)
            except UsageError:
                raise
            except (ToolkitError, ValueError) as err:
                logger.exception(f"{method.label} failed on sample {sample_id}: {_detail(err)}")
                return None, f"{method.label}/{sample_id}: {_detail(err)}", None
            row = {
                "sample_id": sample_id,
                "label": method.label,
                "method": method.method,
                "target": targets[sample_id],
                "file": repository.relative_name(method.label, sample_id),
                "completeness_residual": attribution.completeness_residual,
            }
            timing = {"stage": "attribute", "label": method.label, "sample_id": sample_id,
                      "seconds": time.perf_counter() - started}
            return row, None, (timing, str(path))

        results = _fan_out(run, jobs, cfg.experiment.workers)
        rows = [row for row, _, _ in results if row is not None]
        failures = sorted(failure for _, failure, _ in results if failure is not None)
        outputs = [extra[1] for _, _, extra in results if extra is not None]
        manifest = repository.write_manifest(rows)
        timings = pd.DataFrame([extra[0] for _, _, extra in results if extra is not None],
                               columns=["stage", "label", "sample_id", "seconds"])
        ReportRepository(ctx.root).write_table(TIMINGS, timings, sort_by=["label", "sample_id"])
        return CommandResponse(data={"attributions": len(rows)}, outputs=[str(manifest), *outputs], failures=failures)

    # Evaluation

    def evaluate(self, ctx: RunContext) -> CommandResponse[RunReport]:
        cfg = ctx.cfg
        if not cfg.methods:
            raise UsageError("no attribution methods configured")
        repository = AttributionRepository(ctx.root)
        manifest = repository.read_manifest()
        labels = {method.label for method in cfg.methods}
        manifest = manifest[manifest["label"].isin(labels)]
        grid = uniform_grid(cfg.evaluation.levels)
        rankings = [False, True] if cfg.evaluation.absolute else [False]

        def score(record: dict):
            sample_id = int(record["sample_id"])
            try:
                attribution = repository.load(record["file"])
                x = ctx.dataset.features[sample_id]
                target = ctx.classifier.target(int(record["target"]))
                residual = self.metric_service.completeness_residual(attribution, target, x, ctx.baseline)
                results, curves = [], []
                for absolute in rankings:
                    result = self.metric_service.diffid(x, attribution.values, target, ctx.imputation, grid, absolute)
                    results.append({
                        "seed": cfg.experiment.seed,
                        "sample_id": sample_id,
                        "label": record["label"],
                        "method": record["method"],
                        "absolute": absolute,
                        "diffid": result.score,
                        "insertion_auc": result.insertion_auc,
                        "deletion_auc": result.deletion_auc,
                        "completeness_residual": residual,
                    })
                    series = f"{record['label']}:psi" + (":abs" if absolute else "")
                    curves += [{"level_or_alpha": level, "value": value, "series_id": series, "sample_id": sample_id}
                               for level, value in zip(result.levels, result.psi)]
                return results, curves, None
            except (ToolkitError, ValueError) as err:
                logger.exception(f"evaluation of {record['label']}/{sample_id} failed: {_detail(err)}")
                return [], [], f"{record['label']}/{sample_id}: {_detail(err)}"

        scored = _fan_out(score, manifest.to_dict("records"), cfg.experiment.workers)
        rows = [row for results, _, _ in scored for row in results]
        curves = [point for _, points, _ in scored for point in points]
        failures = [failure for _, _, failure in scored if failure is not None]
        missing = labels - set(manifest["label"])
        failures += [f"{label}: no attributions found" for label in sorted(missing)]

        sweep_rows, sweep_failures = self._sweep(ctx, grid)
        profile_rows, _, profile_failures = self._profiles(ctx)
        failures += sweep_failures + profile_failures

        reports = ReportRepository(ctx.root)
        evaluation = pd.DataFrame(rows, columns=["seed", "sample_id", "label", "method", "absolute", "diffid",
                                                 "insertion_auc", "deletion_auc", "completeness_residual"])
        outputs = [
            reports.write_table(EVALUATION_CSV, evaluation, sort_by=["label", "absolute", "sample_id"]),
            reports.write_table(CURVES_CSV, pd.DataFrame(curves, columns=["level_or_alpha", "value", "series_id", "sample_id"]),
                                sort_by=["series_id", "sample_id", "level_or_alpha"]),
            reports.write_table(SWEEP_CSV, pd.DataFrame(sweep_rows, columns=["seed", "sample_id", "label", "method", "fraction",
                                                                             "diffid", "completeness_residual"]),
                                sort_by=["label", "fraction", "sample_id"]),
            reports.write_table(PROFILE_SAMPLES_CSV, self._profile_frame(profile_rows),
                                sort_by=["label", "kind", "sample_id"]),
        ]
        report = self.compose_report(cfg, [ctx.root], failures=sorted(failures))
        saved = reports.save(report)
        return CommandResponse(data=report, outputs=[str(p) for p in outputs] + [str(p) for p in saved.values()],
                               failures=sorted(failures))

    def _sweep(self, ctx: RunContext, grid: np.ndarray) -> Tuple[List[dict], List[str]]:
        cfg = ctx.cfg
        methods = [m for m in cfg.methods if m.method in cfg.evaluation.sweep_methods and m.method in ("gig", "magig")]
        jobs = [(m, q, i) for m in methods for q in cfg.evaluation.fractions for i in ctx.sample_ids]
        if jobs:
            logger.info(f"Selection-fraction sweep over {cfg.evaluation.fractions} for {[m.label for m in methods]}")

        def run(job):
            method, fraction, sample_id = job
            try:
                target_index = ctx.target(sample_id)
                attribution, _ = self.attribution_service.attribute(ctx.request(method, sample_id, target_index, fraction))
                target = ctx.classifier.target(target_index)
                result = self.metric_service.diffid(ctx.dataset.features[sample_id], attribution.values, target,
                                                    ctx.imputation, grid)
            except (ToolkitError, ValueError) as err:
                logger.exception(f"sweep of {method.label} at q={fraction} failed on sample {sample_id}")
                return None, f"sweep {method.label} q={fraction}/{sample_id}: {_detail(err)}"
            return {
                "seed": cfg.experiment.seed, "sample_id": sample_id, "label": method.label, "method": method.method,
                "fraction": fraction, "diffid": result.score,
                "completeness_residual": attribution.completeness_residual,
            }, None

        results = _fan_out(run, jobs, cfg.experiment.workers)
        return [row for row, _ in results if row], [failure for _, failure in results if failure]

    # Path diagnostics

    def _profile_reference(self, ctx: RunContext, kind: str, target):
        if kind == "target-confidence":
            return target, kind
        if kind == "distance-to-manifold" and ctx.manifold is not None:
            return ctx.manifold, kind
        if ctx.autoencoder is not None:
            # no analytic manifold, the reconstruction distance stands in
            return ctx.autoencoder, "reconstruction-distance"
        return None, kind

    def _profiles(self, ctx: RunContext):
        cfg = ctx.cfg
        methods = [m for m in cfg.methods if m.method != "gxi"]
        jobs = [(m, i) for m in methods for i in ctx.sample_ids]

        def run(job):
            method, sample_id = job
            try:
                target_index = ctx.target(sample_id)
                request = ctx.request(method, sample_id, target_index, path_only=True)
                trace = self.attribution_service.build_path(request)
                target = ctx.classifier.target(target_index)
                profiles = []
                for requested in cfg.evaluation.profiles:
                    reference, kind = self._profile_reference(ctx, requested, target)
                    if reference is not None:
                        profiles.append(self.metric_service.deviation_profile(trace, reference, kind))
                return [(method.label, method.method, sample_id, profile) for profile in profiles], None
            except (ToolkitError, ValueError) as err:
                logger.exception(f"path profile of {method.label} failed on sample {sample_id}")
                return [], f"profile {method.label}/{sample_id}: {_detail(err)}"

        results = _fan_out(run, jobs, cfg.experiment.workers)
        rows = [row for items, _ in results for row in items]
        summaries = {}
        for label, method, _, profile in rows:
            summaries.setdefault((label, method, profile.kind), []).append(profile)
        aggregated = {key: self.metric_service.aggregate_profiles(group) for key, group in sorted(summaries.items())}
        return rows, aggregated, [failure for _, failure in results if failure]

    @staticmethod
    def _profile_frame(rows) -> pd.DataFrame:
        records = [{
            "sample_id": sample_id, "label": label, "method": method, "kind": profile.kind,
            "auc": profile.auc, "interior_auc": profile.interior_auc,
            "max_interior": float(profile.values[1:-1].max()) if len(profile.values) > 2 else 0.0,
        } for label, method, sample_id, profile in rows]
        return pd.DataFrame(records, columns=["sample_id", "label", "method", "kind", "auc", "interior_auc", "max_interior"])

    def path_diagnostics(self, ctx: RunContext) -> CommandResponse[dict]:
        logger.info(f"Path diagnostics for {len(ctx.sample_ids)} samples, profiles {ctx.cfg.evaluation.profiles}")
        rows, aggregated, failures = self._profiles(ctx)
        series = [{
            "level_or_alpha": alpha, "value": value, "series_id": f"{label}:{profile.kind}", "sample_id": sample_id,
        } for label, _, sample_id, profile in rows for alpha, value in zip(profile.alphas, profile.values)]
        summary_series = [{
            "alpha": alpha, "mean": mean, "std": std, "series_id": f"{label}:{kind}",
        } for (label, _, kind), summary in aggregated.items()
            for alpha, mean, std in zip(summary.alphas, summary.mean, summary.std)]
        auc_table = [{
            "label": label, "method": method, "kind": kind, "count": summary.count,
            "auc_mean": summary.auc_mean, "auc_std": summary.auc_std,
            "interior_auc_mean": summary.interior_auc_mean, "interior_auc_std": summary.interior_auc_std,
        } for (label, method, kind), summary in aggregated.items()]

        reports = ReportRepository(ctx.root)
        outputs = [
            reports.write_table(PROFILES_CSV, pd.DataFrame(series, columns=["level_or_alpha", "value", "series_id", "sample_id"]),
                                sort_by=["series_id", "sample_id", "level_or_alpha"]),
            reports.write_table(PROFILE_SUMMARY_CSV, pd.DataFrame(summary_series, columns=["alpha", "mean", "std", "series_id"]),
                                sort_by=["series_id", "alpha"]),
            reports.write_table(PROFILE_SAMPLES_CSV, self._profile_frame(rows), sort_by=["label", "kind", "sample_id"]),
            reports.write_table(PROFILE_AUC_CSV, pd.DataFrame(auc_table, columns=[
                "label", "method", "kind", "count", "auc_mean", "auc_std", "interior_auc_mean", "interior_auc_std",
            ]), sort_by=["label", "kind"]),
        ]
        return CommandResponse(data={"series": len(aggregated), "auc": auc_table},
                               outputs=[str(p) for p in outputs], failures=sorted(failures))

    # Reports

    def compose_report(self, cfg: ExperimentConfig, runs: Sequence[Path], failures: Optional[List[str]] = None) -> RunReport:
        frames: Dict[str, List[pd.DataFrame]] = {EVALUATION_CSV: [], SWEEP_CSV: [], PROFILE_SAMPLES_CSV: []}
        autoencoder = {}
        for run in runs:
            repository = ReportRepository(run)
            for name in frames:
                table = repository.read_table(name)
                if table is not None:
                    frames[name].append(table)
            if repository.exists("autoencoder.json"):
                autoencoder[str(run)] = repository.read_json("autoencoder.json")
        evaluation = pd.concat(frames[EVALUATION_CSV], ignore_index=True) if frames[EVALUATION_CSV] else pd.DataFrame()
        if evaluation.empty:
            raise PreconditionError(f"no evaluation rows found in {[str(run) for run in runs]}")
        sweep = pd.concat(frames[SWEEP_CSV], ignore_index=True) if frames[SWEEP_CSV] else pd.DataFrame()
        profiles = pd.concat(frames[PROFILE_SAMPLES_CSV], ignore_index=True) if frames[PROFILE_SAMPLES_CSV] else pd.DataFrame()

        signed = evaluation[~evaluation["absolute"].astype(bool)]
        metrics = ["diffid", "insertion_auc", "deletion_auc", "completeness_residual"]
        grouped = evaluation.groupby(["label", "method", "absolute"], sort=True)[metrics]
        aggregates = grouped.agg(["mean", "std", "count"])
        aggregates.columns = [f"{metric}_{stat}" for metric, stat in aggregates.columns]
        aggregates = aggregates.reset_index()

        ranking = (signed.groupby("label", sort=True)["diffid"].mean()
                   .sort_values(ascending=False, kind="stable").reset_index())
        ranking["rank"] = np.arange(1, len(ranking) + 1)

        sweep_table = []
        if not sweep.empty:
            table = sweep.groupby(["label", "method", "fraction"], sort=True)[["diffid", "completeness_residual"]].mean()
            table = table.reset_index()
            for label, group in table.groupby("label", sort=True):
                spread = group["diffid"].max() - group["diffid"].min()
                centre = abs(group["diffid"].mean())
                table.loc[group.index, "relative_spread"] = spread / centre if centre > 0 else np.inf
            sweep_table = _records(table)

        profile_table = []
        if not profiles.empty:
            table = profiles.groupby(["label", "method", "kind"], sort=True)[["auc", "interior_auc", "max_interior"]]
            summary = table.agg(["mean", "std"])
            summary.columns = [f"{metric}_{stat}" for metric, stat in summary.columns]
            profile_table = _records(summary.reset_index())

        return RunReport(
            version=magig.__version__,
            seed=cfg.experiment.seed,
            config_text=cfg.source_text,
            config=cfg.echo(),
            rows=_records(signed.sort_values(["seed", "label", "sample_id"], kind="stable")),
            aggregates=_records(aggregates),
            ranking=_records(ranking),
            sweep=sweep_table,
            profiles=profile_table,
            sign_tests=self._sign_tests(signed),
            autoencoder=autoencoder,
            failures=failures or [],
        )

    @staticmethod
    def _paired(frame: pd.DataFrame, candidate: str, reference: str, column: str, sign: float = 1.0) -> dict:
        left = frame[frame["label"] == candidate].set_index(["seed", "sample_id"])[column]
        right = frame[frame["label"] == reference].set_index(["seed", "sample_id"])[column]
        joined = pd.concat([left.rename("a"), right.rename("b")], axis=1, join="inner").sort_index()
        groups = {int(seed): (sign * group["a"].to_numpy(), sign * group["b"].to_numpy())
                  for seed, group in joined.groupby(level=0, sort=True)}
        return groups

    def _sign_tests(self, signed: pd.DataFrame) -> List[dict]:
        labels = signed.drop_duplicates("label").set_index("label")["method"].to_dict()
        candidates = [label for label, method in sorted(labels.items()) if method == "magig"]
        references = [label for label, method in sorted(labels.items()) if method in ("ig", "gig")]
        tests = []
        for candidate in candidates:
            for reference in references:
                for column, sign, name in (("diffid", 1.0, "diffid"), ("completeness_residual", -1.0, "residual")):
                    if name == "residual" and labels[reference] != "gig":
                        continue
                    groups = self._paired(signed, candidate, reference, column, sign)
                    if not groups:
                        continue
                    result = self.metric_service.multi_seed_sign_test(groups, label=f"{candidate}>{reference}:{name}")
                    tests.append({"candidate": candidate, "reference": reference, "metric": name,
                                  **result.model_dump(mode="json")})
        return tests

    def report(self, cfg: ExperimentConfig, runs: Optional[Sequence[str]] = None) -> CommandResponse[RunReport]:
        run_dirs = [Path(run) for run in runs] if runs else [self._root(cfg)]
        logger.info(f"Composing report from {[str(run) for run in run_dirs]}")
        report = self.compose_report(cfg, run_dirs)
        saved = ReportRepository(self._root(cfg)).save(report)
        return CommandResponse(data=report, outputs=[str(path) for path in saved.values()])
