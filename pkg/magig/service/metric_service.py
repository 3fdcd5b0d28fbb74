from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import binomtest

from magig.core.autodiff import ScalarTarget, forward
from magig.core.config import config
from magig.core.exception_error import PreconditionError, ShapeMismatchError
from magig.core.logger import logger
from magig.core.manifold import AnalyticManifold
from magig.core.utils import attribution_order, fraction_count
from magig.model.attribution_model import AttributionMap, PathTrace
from magig.model.autoencoder_model import Autoencoder
from magig.model.metric_model import (
    BaselineMode,
    DeviationProfile,
    DiffIdResult,
    PerturbationCurve,
    ProfileKind,
    ProfileSummary,
    SignTestResult,
)


def uniform_grid(levels: Optional[int] = None) -> np.ndarray:
    return np.linspace(0.0, 1.0, levels or config.diffid_levels)


def imputation_baseline(mode: BaselineMode, dataset_mean: Optional[np.ndarray], dim: int) -> np.ndarray:
    if mode == "zero":
        return np.zeros(dim)
    if dataset_mean is None:
        raise PreconditionError("mean imputation needs the dataset mean")
    return np.asarray(dataset_mean, dtype=np.float64)


def confidences(target: ScalarTarget, batch: np.ndarray) -> np.ndarray:
    output, _ = forward(target.fn, batch)
    return output[..., target.selector]


def _check_grid(grid: np.ndarray) -> None:
    if grid.ndim != 1 or len(grid) < 2 or grid[0] != 0.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
        raise PreconditionError("perturbation grid must increase strictly from 0 to 1")


class MetricService:
    def perturb_insertion(self, x, attribution, alpha: float, baseline, absolute: bool = False) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        keep = attribution_order(attribution, absolute)[:fraction_count(alpha, x.size)]
        perturbed = np.array(baseline, dtype=np.float64)
        perturbed[keep] = x[keep]
        return perturbed

    def perturb_deletion(
        self, x, attribution, delta: float, baseline, absolute: bool = False, most_salient: bool = False
    ) -> np.ndarray:
        """Replace the lowest-ranked delta fraction by the baseline, or the highest-ranked one with `most_salient`."""
        x = np.asarray(x, dtype=np.float64)
        count = fraction_count(delta, x.size)
        if most_salient:
            drop = attribution_order(attribution, absolute)[:count]
        else:
            scores = np.abs(attribution) if absolute else np.asarray(attribution, dtype=np.float64)
            drop = np.argsort(scores.ravel(), kind="stable")[:count]
        perturbed = x.copy()
        perturbed[drop] = np.asarray(baseline, dtype=np.float64)[drop]
        return perturbed

    def insertion_curve(self, x, attribution, target: ScalarTarget, baseline, grid=None, absolute: bool = False) -> PerturbationCurve:
        grid = uniform_grid() if grid is None else np.asarray(grid, dtype=np.float64)
        batch = np.stack([self.perturb_insertion(x, attribution, alpha, baseline, absolute) for alpha in grid])
        return PerturbationCurve(levels=grid, confidences=confidences(target, batch), mode="insertion")

    def deletion_curve(self, x, attribution, target: ScalarTarget, baseline, grid=None, absolute: bool = False) -> PerturbationCurve:
        grid = uniform_grid() if grid is None else np.asarray(grid, dtype=np.float64)
        batch = np.stack([self.perturb_deletion(x, attribution, delta, baseline, absolute, most_salient=True) for delta in grid])
        return PerturbationCurve(levels=grid, confidences=confidences(target, batch), mode="deletion")

    def diffid(self, x, attribution, target: ScalarTarget, baseline, grid=None, absolute: bool = False) -> DiffIdResult:
        grid = uniform_grid() if grid is None else np.asarray(grid, dtype=np.float64)
        _check_grid(grid)
        inserted = np.stack([self.perturb_insertion(x, attribution, 1.0 - delta, baseline, absolute) for delta in grid])
        # salient-first deletion: the integral of psi is the insertion AUC minus the deletion AUC
        deleted = np.stack([self.perturb_deletion(x, attribution, delta, baseline, absolute, most_salient=True) for delta in grid])
        psi = confidences(target, inserted) - confidences(target, deleted)
        # identical images on both sides give exactly zero, whatever the batching
        psi[np.all(inserted == deleted, axis=1)] = 0.0

        insertion = self.insertion_curve(x, attribution, target, baseline, grid, absolute)
        deletion = self.deletion_curve(x, attribution, target, baseline, grid, absolute)
        return DiffIdResult(
            levels=grid,
            psi=psi,
            score=float(trapezoid(psi, grid)),
            insertion_auc=insertion.auc,
            deletion_auc=deletion.auc,
            absolute_ranking=absolute,
        )

    def completeness_residual(self, attribution: AttributionMap, target: ScalarTarget, x, baseline) -> float:
        return float(abs(attribution.total - (target.value(x) - target.value(baseline))))

    def deviation_profile(
        self,
        trace: PathTrace,
        reference: Union[AnalyticManifold, ScalarTarget, Autoencoder],
        kind: Optional[ProfileKind] = None,
    ) -> DeviationProfile:
        states = trace.states
        if isinstance(reference, AnalyticManifold):
            kind = kind or "distance-to-manifold"
            values = np.array([reference.distance(state) for state in states])
        elif isinstance(reference, Autoencoder):
            kind = kind or "reconstruction-distance"
            values = np.linalg.norm(states - reference.reconstruct(states), axis=1)
        elif isinstance(reference, ScalarTarget):
            kind = kind or "target-confidence"
            values = confidences(reference, states)
        else:
            raise PreconditionError(f"cannot profile a path against {type(reference).__name__}")

        alphas = np.linspace(0.0, 1.0, len(states)) if len(states) > 1 else np.zeros(1)
        auc = float(trapezoid(values, alphas)) if len(states) > 1 else 0.0
        interior_auc = float(trapezoid(values[1:-1], alphas[1:-1])) if len(states) > 3 else 0.0
        return DeviationProfile(
            alphas=alphas, values=values, kind=kind, auc=auc, interior_auc=interior_auc, method=trace.method,
        )

    def aggregate_profiles(self, profiles: Sequence[DeviationProfile]) -> ProfileSummary:
        if not profiles:
            raise PreconditionError("no profiles to aggregate")
        lengths = {len(profile.values) for profile in profiles}
        if len(lengths) != 1:
            raise ShapeMismatchError(f"profiles have different lengths {sorted(lengths)}")
        values = np.stack([profile.values for profile in profiles])
        aucs = np.array([profile.auc for profile in profiles])
        interior = np.array([profile.interior_auc for profile in profiles])
        return ProfileSummary(
            alphas=profiles[0].alphas,
            mean=values.mean(axis=0),
            std=values.std(axis=0),
            kind=profiles[0].kind,
            method=profiles[0].method,
            auc_mean=float(aucs.mean()),
            auc_std=float(aucs.std()),
            interior_auc_mean=float(interior.mean()),
            interior_auc_std=float(interior.std()),
            count=len(profiles),
        )

    def sign_test(self, candidate: Sequence[float], reference: Sequence[float], label: str = "") -> SignTestResult:
        """One-sided paired sign test that `candidate` beats `reference`; ties are dropped."""
        candidate, reference = np.asarray(candidate, dtype=np.float64), np.asarray(reference, dtype=np.float64)
        if candidate.shape != reference.shape:
            raise ShapeMismatchError(f"paired samples differ in length: {candidate.shape} vs {reference.shape}")
        wins, losses = int(np.sum(candidate > reference)), int(np.sum(candidate < reference))
        ties = int(candidate.size - wins - losses)
        p_value = binomtest(wins, wins + losses, 0.5, alternative="greater").pvalue if wins + losses else 1.0
        logger.info(f"Sign test {label}: {wins} wins, {losses} losses, {ties} ties, p={p_value:.3g}")
        return SignTestResult(wins=wins, losses=losses, ties=ties, p_value=float(p_value), label=label)

    def multi_seed_sign_test(self, groups: dict, label: str = "") -> SignTestResult:
        """Pooled sign test over {seed: (candidate, reference)} plus one test per seed."""
        per_seed = [self.sign_test(a, b, label=f"{label} seed={seed}") for seed, (a, b) in sorted(groups.items())]
        pooled_a = np.concatenate([np.asarray(a, dtype=np.float64) for _, (a, _) in sorted(groups.items())])
        pooled_b = np.concatenate([np.asarray(b, dtype=np.float64) for _, (_, b) in sorted(groups.items())])
        pooled = self.sign_test(pooled_a, pooled_b, label=label)
        for result in per_seed:
            if result.p_value >= 0.05:
                logger.warning(f"{result.label}: not significant (p={result.p_value:.3g})")
        return pooled.model_copy(update={"per_seed": per_seed})

    def residuals_by_steps(self, build, target: ScalarTarget, x, baseline, steps: Sequence[int]) -> List[float]:
        """Completeness residual of `build(K)` attributions for each K."""
        return [self.completeness_residual(build(k), target, x, baseline) for k in steps]
