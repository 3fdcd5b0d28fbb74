"""PGCKPT encoding and model checkpoints."""
import struct

import numpy as np
import pytest

from magig.core.exception_error import CheckpointError
from magig.core.network import Mlp, parameters_equal
from magig.model.checkpoint_model import Checkpoint
from magig.model.classifier_model import Classifier
from magig.model.dataset_model import DatasetSpec
from magig.model.network_model import MlpSpec, TrainConfig
from magig.repository.checkpoint_repository import MAGIC, CheckpointRepository, decode, encode
from magig.service.dataset_service import DatasetService
from magig.service.model_service import ModelService


@pytest.fixture
def classifier(rng):
    spec = MlpSpec(widths=[3, 5, 2])
    return Classifier(network=Mlp.initialize(spec, rng).freeze(), spec=spec)


@pytest.fixture
def blob(classifier):
    return encode(ModelService.to_checkpoint(classifier))


class TestEncoding:
    def test_header(self, blob):
        assert blob.startswith(MAGIC)
        assert struct.unpack("<H", blob[6:8])[0] == 1

    def test_decode_restores_tensors(self, classifier, blob):
        checkpoint = decode(blob)
        assert sorted(checkpoint.tensors) == sorted(classifier.network.params)
        for name, value in classifier.network.params.items():
            np.testing.assert_array_equal(checkpoint.tensors[name], value)

    def test_tensor_order_does_not_change_bytes(self):
        a = Checkpoint(metadata={"b": 1, "a": 2}, tensors={"x": np.ones(2), "w": np.eye(2)})
        b = Checkpoint(metadata={"a": 2, "b": 1}, tensors={"w": np.eye(2), "x": np.ones(2)})
        assert encode(a) == encode(b)

    def test_truncated_file_names_the_tensor(self, blob):
        with pytest.raises(CheckpointError, match="layers.1.weight"):
            decode(blob[:-4])

    def test_truncated_at_tensor_boundary_names_the_last_tensor(self):
        blob = encode(Checkpoint(metadata={}, tensors={"a": np.ones(2), "b": np.ones(3)}))
        record_b = 4 + 1 + 1 + 4 + 8 + 3 * 8
        with pytest.raises(CheckpointError, match=r"tensor #1 of 2 \(after 'a'\) name length"):
            decode(blob[:-record_b])

    def test_version_mismatch(self, blob):
        tampered = blob[:6] + struct.pack("<H", 2) + blob[8:]
        with pytest.raises(CheckpointError, match="version 2"):
            decode(tampered)

    def test_trailing_bytes(self, blob):
        with pytest.raises(CheckpointError, match="shape table inconsistent"):
            decode(blob + b"\x00" * 8)

    def test_bad_magic(self, blob):
        with pytest.raises(CheckpointError, match="magic"):
            decode(b"XXXXXX" + blob[6:])


class TestModelCheckpoints:
    def test_save_load_save_is_byte_identical(self, tmp_path, classifier):
        service = ModelService()
        first = service.save_checkpoint(classifier, tmp_path / "a.ckpt")
        restored = service.load_checkpoint(first)
        second = service.save_checkpoint(restored, tmp_path / "b.ckpt")
        assert first.read_bytes() == second.read_bytes()
        assert parameters_equal(restored.network, classifier.network)

    def test_exact_chart_autoencoder(self, tmp_path, exact_circle16, circle16, rng):
        service = ModelService()
        path = service.save_checkpoint(exact_circle16, tmp_path / "ae.ckpt")
        restored = service.load_checkpoint(path)
        assert restored.mode == "exact-chart"
        z = circle16.sample_latent(4, rng)
        np.testing.assert_array_equal(restored.decode(z), exact_circle16.decode(z))

    def test_linear_probe(self, tmp_path, linear_probe):
        probe = linear_probe([[1.0, -2.0], [0.5, 0.0]], softmax=True)
        service = ModelService()
        restored = service.load_checkpoint(service.save_checkpoint(probe, tmp_path / "probe.ckpt"))
        np.testing.assert_array_equal(restored.predict_proba([0.3, 0.1]), probe.predict_proba([0.3, 0.1]))

    def test_unknown_kind(self):
        with pytest.raises(CheckpointError, match="unknown checkpoint kind"):
            ModelService().from_checkpoint(Checkpoint(metadata={"kind": "mystery"}))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            CheckpointRepository().load(tmp_path / "absent.ckpt")

    def test_trained_classifier_predictions_survive_round_trip(self, tmp_path, rng):
        data = DatasetService().generate(DatasetSpec(kind="blobs", ambient_dim=6, classes=3, samples=120, seed=4))
        service = ModelService()
        trained = service.train_classifier(
            data, MlpSpec(widths=[6, 10, 3]), TrainConfig(seed=4, epochs=5, accuracy_floor=0.0)
        )
        restored = service.load_checkpoint(service.save_checkpoint(trained, tmp_path / "trained.ckpt"))
        inputs = rng.standard_normal((100, 6))
        assert np.array_equal(restored.predict_proba(inputs), trained.predict_proba(inputs))
        assert np.array_equal(restored.predict(inputs), trained.predict(inputs))
