from typing import Tuple, Union

import numpy as np
from scipy.special import expit, log_softmax, softmax

from magig.core.autodiff import INPUT, jacobian
from magig.core.config import config
from magig.core.exception_error import (
    AccuracyFloorError,
    ChartUndefinedError,
    CheckpointError,
    DivergenceError,
    NonFiniteValueError,
    PreconditionError,
    ReconstructionCeilingError,
    ShapeMismatchError,
)
from magig.core.logger import logger
from magig.core.manifold import AnalyticManifold, ChartDecoder, ChartEncoder, build_manifold
from magig.core.network import Mlp, LinearMap, bias_name, build_optimizer, prefixed, unprefixed, weight_name
from magig.model.autoencoder_model import Autoencoder
from magig.model.checkpoint_model import Checkpoint
from magig.model.classifier_model import Classifier
from magig.model.dataset_model import Dataset
from magig.model.manifold_model import ManifoldSpec
from magig.model.network_model import AutoencoderMetrics, ClassifierMetrics, MlpSpec, TrainConfig
from magig.repository.checkpoint_repository import CheckpointRepository
from magig.service.dataset_service import BATCH_STREAM, INIT_STREAM, split_indices, stream

RANK_CHECK_POINTS = 50


def _batches(count: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(count)
    for start in range(0, count, batch_size):
        yield order[start:start + batch_size]


def pca_reconstruction_mse(features: np.ndarray, latent_dim: int, fit_on: np.ndarray = None) -> float:
    """MSE of the best rank-d affine reconstruction, the oracle for linear autoencoders."""
    fit_on = features if fit_on is None else fit_on
    mean = fit_on.mean(axis=0)
    _, _, vt = np.linalg.svd(fit_on - mean, full_matrices=False)
    basis = vt[:latent_dim].T
    centred = features - mean
    return float(np.mean((centred @ basis @ basis.T - centred) ** 2))


def _reconstruction_mse(encoder: Mlp, decoder: Mlp, features: np.ndarray) -> float:
    return float(np.mean((decoder(encoder(features)) - features) ** 2))


def _embed(network: Mlp, cores) -> Mlp:
    """Overwrite the leading rows of every layer with a fixed (weight, bias) block."""
    params = dict(network.params)
    for layer, (weight, bias) in enumerate(cores):
        w = params[weight_name(layer)].copy()
        b = params[bias_name(layer)].copy()
        rows, cols = weight.shape
        w[:rows] = 0.0
        w[:rows, :cols] = weight
        b[:rows] = 0.0 if bias is None else bias
        params[weight_name(layer)], params[bias_name(layer)] = w, b
    network.assign(params)
    return network


class ModelService:
    def __init__(self):
        self.checkpoints = CheckpointRepository()

    # Classifiers

    def _loss_and_cotangent(self, spec: MlpSpec, logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
        count = len(labels)
        if spec.head == "sigmoid-scalar":
            p = expit(logits[:, 0])
            loss = float(np.mean(np.logaddexp(0.0, logits[:, 0]) - labels * logits[:, 0]))
            return loss, ((p - labels) / count)[:, None]
        onehot = np.eye(spec.widths[-1])[labels]
        loss = float(-np.mean(np.sum(onehot * log_softmax(logits, axis=1), axis=1)))
        return loss, (softmax(logits, axis=1) - onehot) / count

    @staticmethod
    def _accuracy(network: Mlp, features: np.ndarray, labels: np.ndarray) -> float:
        if len(labels) == 0:
            return float("nan")
        probs = network(features)
        predicted = (probs[:, 0] >= 0.5).astype(np.int64) if probs.shape[1] == 1 else np.argmax(probs, axis=1)
        return float(np.mean(predicted == labels))

    def train_classifier(self, data: Dataset, spec: MlpSpec, cfg: TrainConfig) -> Classifier:
        logger.info(f"Training classifier {spec.widths} ({spec.activation}, {spec.head}) for {cfg.epochs} epochs, seed={cfg.seed}")
        if len(data) == 0:
            raise PreconditionError("cannot train on an empty dataset")
        if spec.head == "linear":
            raise PreconditionError("classifier head must be softmax-k or sigmoid-scalar")
        if spec.hidden_layers < 1:
            raise PreconditionError("trained classifiers need at least one hidden layer")
        if spec.widths[0] != data.features.shape[1]:
            raise ShapeMismatchError(f"input width {spec.widths[0]} does not match data dimension {data.features.shape[1]}")
        classes = int(data.labels.max()) + 1
        expected = 1 if spec.head == "sigmoid-scalar" else classes
        if spec.widths[-1] != expected or (spec.head == "sigmoid-scalar" and classes > 2):
            raise PreconditionError(f"{classes} label classes do not fit a {spec.head} head of width {spec.widths[-1]}")
        if cfg.epochs == 0:
            logger.warning("zero-epoch training requested; returning the initialised classifier")

        train, heldout = split_indices(len(data), cfg.holdout_fraction, cfg.seed)
        network = Mlp.initialize(spec, stream(cfg.seed, INIT_STREAM))
        optimizer = build_optimizer(cfg)
        batch_rng = stream(cfg.seed, BATCH_STREAM)
        features, labels = data.features[train], data.labels[train]

        history = []
        for epoch in range(cfg.epochs):
            losses = []
            for batch in _batches(len(train), cfg.batch_size, batch_rng):
                try:
                    logits, tape = network.forward_logits(features[batch])
                except NonFiniteValueError as err:
                    raise DivergenceError(f"classifier diverged at epoch {epoch}: {err.detail}", metrics={"loss_history": history})
                loss, cotangent = self._loss_and_cotangent(spec, logits, labels[batch])
                if not np.isfinite(loss):
                    raise DivergenceError(f"classifier loss became non-finite at epoch {epoch}", metrics={"loss_history": history})
                grads = tape.backward(cotangent)
                network.assign(optimizer.step(network.params, grads))
                losses.append(loss)
            history.append(float(np.mean(losses)))

        floor = config.accuracy_floor if cfg.accuracy_floor is None else cfg.accuracy_floor
        metrics = ClassifierMetrics(
            seed=cfg.seed,
            epochs=cfg.epochs,
            loss_history=history,
            train_accuracy=self._accuracy(network, features, labels),
            heldout_accuracy=self._accuracy(network, data.features[heldout], data.labels[heldout]),
            accuracy_floor=floor,
        )
        logger.info(f"Classifier held-out accuracy {metrics.heldout_accuracy:.4f} (floor {floor})")
        if not metrics.heldout_accuracy >= floor:
            logger.error(f"held-out accuracy {metrics.heldout_accuracy:.4f} below floor {floor}")
            raise AccuracyFloorError(
                f"held-out accuracy {metrics.heldout_accuracy:.4f} below floor {floor}", metrics=metrics.model_dump()
            )
        return Classifier(network=network.freeze(), spec=spec, metrics=metrics)

    # Autoencoders

    def _closed_form(self, features: np.ndarray, latent_dim: int) -> Tuple[Mlp, Mlp]:
        mean = features.mean(axis=0)
        _, _, vt = np.linalg.svd(features - mean, full_matrices=True)
        basis = vt[:latent_dim]
        n = features.shape[1]
        encoder = Mlp(MlpSpec(widths=[n, latent_dim], head="linear"),
                      {"layers.0.weight": basis, "layers.0.bias": -basis @ mean})
        decoder = Mlp(MlpSpec(widths=[latent_dim, n], head="linear"),
                      {"layers.0.weight": basis.T, "layers.0.bias": mean})
        return encoder, decoder

    def _relu_warm_start(self, features: np.ndarray, latent_dim: int, spec: MlpSpec,
                         rng: np.random.Generator) -> Tuple[Mlp, Mlp]:
        """ReLU encoder/decoder pair that reproduces the rank-d PCA reconstruction exactly.

        Each hidden layer carries the positive and negative parts of the PCA code in
        its first 2d units; the remaining units start random but are not read by the
        next layer until training moves them.
        """
        if spec.activation != "relu" or min(spec.widths[1:-1]) < 2 * latent_dim:
            raise PreconditionError(
                f"PCA warm start needs relu hidden layers at least {2 * latent_dim} wide, got {spec.activation} {spec.widths[1:-1]}"
            )
        linear_encoder, linear_decoder = self._closed_form(features, latent_dim)
        basis, mean = linear_encoder.params["layers.0.weight"], linear_decoder.params["layers.0.bias"]
        eye = np.eye(latent_dim)
        split, merge = np.vstack([eye, -eye]), np.hstack([eye, -eye])
        relay = np.block([[eye, -eye], [-eye, eye]])
        middle = [(relay, None)] * (spec.hidden_layers - 1)
        encoder = _embed(Mlp.initialize(spec, rng), [(split @ basis, split @ (-basis @ mean)), *middle, (merge, None)])
        decoder = _embed(Mlp.initialize(spec.mirrored(), rng), [(split, None), *middle, (basis.T @ merge, mean)])
        return encoder, decoder

    def train_autoencoder(self, data: Dataset, latent_dim: int, spec: MlpSpec, cfg: TrainConfig) -> Autoencoder:
        n = data.features.shape[1]
        logger.info(f"Training autoencoder n={n} -> d={latent_dim}, hidden={spec.widths[1:-1]}, epochs={cfg.epochs}, seed={cfg.seed}")
        if len(data) == 0:
            raise PreconditionError("cannot train on an empty dataset")
        linear = spec.hidden_layers == 0
        if latent_dim > n or (latent_dim == n and not linear):
            raise PreconditionError(f"latent dimension {latent_dim} must be below the ambient dimension {n}")
        if spec.widths[0] != n or spec.widths[-1] != latent_dim:
            raise ShapeMismatchError(f"encoder widths {spec.widths} do not map {n} -> {latent_dim}")

        train, heldout = split_indices(len(data), cfg.holdout_fraction, cfg.seed)
        features = data.features[train]
        history = []
        if linear:
            # rank-d PCA is the optimum a linear autoencoder can reach
            encoder, decoder = self._closed_form(features, latent_dim)
        else:
            encoder_spec = spec.model_copy(update={"head": "linear"})
            init_rng = stream(cfg.seed, INIT_STREAM)
            if cfg.pca_warm_start:
                encoder, decoder = self._relu_warm_start(features, latent_dim, encoder_spec, init_rng)
            else:
                encoder = Mlp.initialize(encoder_spec, init_rng)
                decoder = Mlp.initialize(encoder_spec.mirrored(), init_rng)
            history = self._fit_autoencoder(encoder, decoder, features, cfg, keep_best=cfg.pca_warm_start)

        ceiling = config.mse_ceiling if cfg.mse_ceiling is None else cfg.mse_ceiling
        evaluation = data.features[heldout] if len(heldout) else features
        mse = _reconstruction_mse(encoder, decoder, evaluation)
        metrics = AutoencoderMetrics(
            seed=cfg.seed, epochs=0 if linear else cfg.epochs, loss_history=history,
            heldout_mse=mse, mse_ceiling=ceiling, closed_form=linear,
            train_mse=_reconstruction_mse(encoder, decoder, features), warm_started=cfg.pca_warm_start and not linear,
        )
        logger.info(f"Autoencoder held-out reconstruction MSE {mse:.3e} (ceiling {ceiling})")
        if not mse < ceiling:
            logger.error(f"reconstruction MSE {mse:.3e} above ceiling {ceiling}")
            raise ReconstructionCeilingError(f"held-out MSE {mse:.3e} above ceiling {ceiling}", metrics=metrics.model_dump())
        return Autoencoder(encoder=encoder.freeze(), decoder=decoder.freeze(), mode="trained", spec=spec, metrics=metrics)

    def _fit_autoencoder(self, encoder: Mlp, decoder: Mlp, features: np.ndarray, cfg: TrainConfig,
                         keep_best: bool = False) -> list:
        optimizer = build_optimizer(cfg)
        batch_rng = stream(cfg.seed, BATCH_STREAM)
        history = []
        best_mse = _reconstruction_mse(encoder, decoder, features) if keep_best else None
        best = (dict(encoder.params), dict(decoder.params))
        for epoch in range(cfg.epochs):
            losses = []
            for batch in _batches(len(features), cfg.batch_size, batch_rng):
                target = features[batch]
                try:
                    z, encoder_tape = encoder.forward_logits(target)
                    if cfg.latent_noise:
                        z = z + cfg.latent_noise * batch_rng.standard_normal(z.shape)
                    reconstruction, decoder_tape = decoder.forward_logits(z)
                except NonFiniteValueError as err:
                    raise DivergenceError(f"autoencoder diverged at epoch {epoch}: {err.detail}", metrics={"loss_history": history})
                residual = reconstruction - target
                loss = float(np.mean(residual ** 2))
                if not np.isfinite(loss):
                    raise DivergenceError(f"autoencoder loss became non-finite at epoch {epoch}", metrics={"loss_history": history})
                decoder_grads = decoder_tape.backward(2.0 * residual / residual.size)
                encoder_grads = encoder_tape.backward(decoder_grads.pop(INPUT))
                encoder_grads.pop(INPUT)
                params = {**prefixed(encoder.params, "encoder"), **prefixed(decoder.params, "decoder")}
                grads = {**prefixed(encoder_grads, "encoder"), **prefixed(decoder_grads, "decoder")}
                updated = optimizer.step(params, grads)
                encoder.assign(unprefixed(updated, "encoder"))
                decoder.assign(unprefixed(updated, "decoder"))
                losses.append(loss)
            history.append(float(np.mean(losses)))
            if keep_best:
                epoch_mse = _reconstruction_mse(encoder, decoder, features)
                if epoch_mse < best_mse:
                    best_mse, best = epoch_mse, (dict(encoder.params), dict(decoder.params))
        if keep_best:
            logger.info(f"Keeping autoencoder parameters with training MSE {best_mse:.3e}")
            encoder.assign(best[0])
            decoder.assign(best[1])
        return history

    def exact_chart_autoencoder(self, manifold: AnalyticManifold, seed: int = 0) -> Autoencoder:
        logger.info(f"Building exact-chart autoencoder for {manifold.kind} in R^{manifold.ambient_dim}")
        decoder = ChartDecoder(manifold)
        rng = np.random.default_rng(seed)
        for z in manifold.sample_latent(RANK_CHECK_POINTS, rng):
            rank = np.linalg.matrix_rank(jacobian(decoder, z))
            if rank != manifold.intrinsic_dim:
                raise ChartUndefinedError(f"decoder Jacobian has rank {rank} < {manifold.intrinsic_dim} at z={z.tolist()}")
        return Autoencoder(encoder=ChartEncoder(manifold), decoder=decoder, mode="exact-chart", manifold=manifold)

    # Checkpoints

    @staticmethod
    def to_checkpoint(model: Union[Classifier, Autoencoder]) -> Checkpoint:
        if isinstance(model, Classifier):
            network = model.network
            if isinstance(network, LinearMap):
                return Checkpoint(
                    metadata={"kind": "linear-probe", "softmax": network.softmax},
                    tensors={"weight": network.weight, "bias": network.bias},
                )
            metadata = {"kind": "classifier", "spec": network.spec.model_dump(mode="json")}
            if model.metrics is not None:
                metadata.update(seed=model.metrics.seed, metrics=model.metrics.model_dump(mode="json"))
            return Checkpoint(metadata=metadata, tensors=dict(network.params))

        if model.mode == "exact-chart":
            return Checkpoint(metadata={"kind": "autoencoder", "mode": "exact-chart", "manifold": model.manifold.describe()})
        metadata = {
            "kind": "autoencoder",
            "mode": "trained",
            "encoder": model.encoder.spec.model_dump(mode="json"),
            "decoder": model.decoder.spec.model_dump(mode="json"),
        }
        if model.metrics is not None:
            metadata.update(seed=model.metrics.seed, metrics=model.metrics.model_dump(mode="json"))
        tensors = {**prefixed(model.encoder.params, "encoder"), **prefixed(model.decoder.params, "decoder")}
        return Checkpoint(metadata=metadata, tensors=tensors)

    def from_checkpoint(self, checkpoint: Checkpoint) -> Union[Classifier, Autoencoder]:
        metadata, tensors = checkpoint.metadata, checkpoint.tensors
        kind = metadata.get("kind")
        try:
            if kind == "linear-probe":
                return Classifier(network=LinearMap(tensors["weight"], tensors["bias"], softmax=metadata["softmax"]))
            if kind == "classifier":
                spec = MlpSpec(**metadata["spec"])
                metrics = ClassifierMetrics(**metadata["metrics"]) if "metrics" in metadata else None
                return Classifier(network=Mlp(spec, tensors).freeze(), spec=spec, metrics=metrics)
            if kind == "autoencoder" and metadata.get("mode") == "exact-chart":
                return self.exact_chart_autoencoder(build_manifold(ManifoldSpec(**metadata["manifold"])))
            if kind == "autoencoder":
                encoder = Mlp(MlpSpec(**metadata["encoder"]), unprefixed(tensors, "encoder")).freeze()
                decoder = Mlp(MlpSpec(**metadata["decoder"]), unprefixed(tensors, "decoder")).freeze()
                metrics = AutoencoderMetrics(**metadata["metrics"]) if "metrics" in metadata else None
                return Autoencoder(encoder=encoder, decoder=decoder, mode="trained", spec=encoder.spec, metrics=metrics)
        except (KeyError, ValueError, ShapeMismatchError) as err:
            raise CheckpointError(f"checkpoint metadata does not describe a valid {kind}: {err}")
        raise CheckpointError(f"unknown checkpoint kind '{kind}'")

    def save_checkpoint(self, model: Union[Classifier, Autoencoder], path):
        return self.checkpoints.save(self.to_checkpoint(model), path)

    def load_checkpoint(self, path) -> Union[Classifier, Autoencoder]:
        logger.info(f"Loading checkpoint {path}")
        return self.from_checkpoint(self.checkpoints.load(path))
