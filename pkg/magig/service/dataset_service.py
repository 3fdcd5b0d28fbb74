import math
from typing import Tuple

import numpy as np
from scipy.stats import norm

from magig.core.exception_error import DatasetError
from magig.core.logger import logger
from magig.core.manifold import build_manifold, orthonormal_frame
from magig.core.utils import render_shape
from magig.model.dataset_model import Dataset, DatasetSpec
from magig.model.manifold_model import ManifoldSpec

SPLIT_STREAM, INIT_STREAM, BATCH_STREAM = 0, 1, 2


def stream(seed: int, purpose: int) -> np.random.Generator:
    """Independent generator per purpose so the split never depends on the model size."""
    return np.random.default_rng(np.random.SeedSequence([seed, purpose]))


def split_indices(count: int, holdout_fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    order = stream(seed, SPLIT_STREAM).permutation(count)
    holdout = max(1, int(round(holdout_fraction * count))) if count > 1 else 0
    return np.sort(order[holdout:]), np.sort(order[:holdout])


def sector_labels(angles: np.ndarray, classes: int) -> np.ndarray:
    fraction = np.remainder(angles + math.pi, 2.0 * math.pi) / (2.0 * math.pi)
    return np.minimum((fraction * classes).astype(np.int64), classes - 1)


def manifold_spec_for(spec: DatasetSpec) -> ManifoldSpec:
    return ManifoldSpec(
        kind=spec.kind,
        ambient_dim=spec.ambient_dim,
        radius=spec.radius,
        semi_axes=spec.semi_axes,
        intrinsic_dim=spec.intrinsic_dim,
        seed=spec.seed,
    )


class DatasetService:
    def generate(self, spec: DatasetSpec) -> Dataset:
        logger.info(f"Generating {spec.kind} dataset: n={spec.ambient_dim}, samples={spec.samples}, seed={spec.seed}")
        if spec.samples == 0:
            raise DatasetError("zero samples requested; refusing to write an empty dataset")

        rng = np.random.default_rng(spec.seed)
        if spec.kind == "blobs":
            dataset = self._blobs(spec, rng)
        elif spec.kind == "shapes":
            dataset = self._shapes(spec, rng)
        else:
            dataset = self._on_manifold(spec, rng)

        counts = np.bincount(dataset.labels, minlength=spec.classes)
        logger.info(f"Generated {len(dataset)} samples, label counts {counts.tolist()}")
        return dataset

    def _on_manifold(self, spec: DatasetSpec, rng: np.random.Generator) -> Dataset:
        manifold = build_manifold(manifold_spec_for(spec))
        latents = manifold.sample_latent(spec.samples, rng)
        features = manifold.chart(latents)
        if spec.kind == "subspace":
            # equal-mass bins of the first latent coordinate
            edges = norm.ppf(np.arange(1, spec.classes) / spec.classes)
            labels = np.searchsorted(edges, latents[:, 0]).astype(np.int64)
        else:
            angle = latents[:, -1] if spec.kind == "sphere" else latents[:, 0]
            labels = sector_labels(angle, spec.classes)
        if spec.noise > 0:
            features = features + spec.noise * rng.standard_normal(features.shape)
        return Dataset(spec=spec, features=features, labels=labels, latents=latents)

    def _blobs(self, spec: DatasetSpec, rng: np.random.Generator) -> Dataset:
        if spec.classes > spec.ambient_dim:
            raise DatasetError(f"{spec.classes} blobs need at least {spec.classes} ambient dimensions")
        centres = orthonormal_frame(spec.ambient_dim, spec.classes, spec.seed).T * (spec.separation / math.sqrt(2.0))
        labels = rng.integers(0, spec.classes, size=spec.samples)
        features = centres[labels] + (1.0 + spec.noise) * rng.standard_normal((spec.samples, spec.ambient_dim))
        return Dataset(spec=spec, features=features, labels=labels)

    def _shapes(self, spec: DatasetSpec, rng: np.random.Generator) -> Dataset:
        if spec.classes != 2:
            raise DatasetError("the shapes dataset has exactly two classes (squares, crosses)")
        labels = rng.integers(0, 2, size=spec.samples)
        images = []
        for label in labels:
            size = int(rng.integers(3, 7))
            left, top = (int(v) for v in rng.integers(0, 8 - size + 1, size=2))
            intensity = float(rng.uniform(0.6, 1.0))
            images.append(render_shape("square" if label == 0 else "cross", size, left, top, intensity))
        features = np.stack(images)
        if spec.noise > 0:
            features = features + spec.noise * rng.standard_normal(features.shape)
        return Dataset(spec=spec, features=features, labels=labels)
