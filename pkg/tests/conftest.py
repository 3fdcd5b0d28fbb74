import math

import numpy as np
import pytest

from magig.core.manifold import build_manifold
from magig.core.network import LinearMap
from magig.model.classifier_model import Classifier
from magig.model.manifold_model import ManifoldSpec
from magig.service.attribution_service import AttributionService
from magig.service.geometry_service import GeometryService
from magig.service.metric_service import MetricService
from magig.service.model_service import ModelService


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture
def unit_circle():
    """Unit circle in the plane; the embedding frame is the identity."""
    return build_manifold(ManifoldSpec(kind="circle", ambient_dim=2))


@pytest.fixture
def circle16():
    return build_manifold(ManifoldSpec(kind="circle", ambient_dim=16, seed=3))


@pytest.fixture
def exact_circle(unit_circle):
    return ModelService().exact_chart_autoencoder(unit_circle)


@pytest.fixture
def exact_circle16(circle16):
    return ModelService().exact_chart_autoencoder(circle16)


def linear_classifier(weight, bias=None, softmax=False) -> Classifier:
    return Classifier(network=LinearMap(np.atleast_2d(weight), bias, softmax=softmax))


@pytest.fixture
def linear_probe():
    return linear_classifier


@pytest.fixture
def attribution_service():
    return AttributionService()


@pytest.fixture
def metric_service():
    return MetricService()


@pytest.fixture
def geometry_service():
    return GeometryService()


@pytest.fixture
def quarter_point():
    return np.array([math.cos(math.pi / 4), math.sin(math.pi / 4)])
