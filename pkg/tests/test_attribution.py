"""Path construction and Riemann attribution for gxi, ig, gig, eig and magig."""
import math

import numpy as np
import pytest

from magig.core.autodiff import DifferentiableFunction
from magig.core.exception_error import PreconditionError, SelectorError
from magig.core.manifold import build_manifold
from magig.core.network import Constant, Mlp
from magig.model.classifier_model import Classifier
from magig.model.dataset_model import DatasetSpec
from magig.model.manifold_model import ManifoldSpec
from magig.model.network_model import MlpSpec, TrainConfig
from magig.schema.attribution_schema import AttributionRequest, PathRequest
from magig.service.dataset_service import DatasetService, split_indices
from magig.service.model_service import ModelService


@pytest.fixture
def tanh_classifier():
    spec = MlpSpec(widths=[16, 12, 3], activation="tanh")
    return Classifier(network=Mlp.initialize(spec, np.random.default_rng(7)).freeze(), spec=spec)


@pytest.fixture
def plane():
    return build_manifold(ManifoldSpec(kind="subspace", ambient_dim=3, intrinsic_dim=2, seed=5))


@pytest.fixture
def exact_plane(plane):
    return ModelService().exact_chart_autoencoder(plane)


@pytest.fixture
def circle_endpoints(circle16):
    return circle16.chart(np.array([1.0])), circle16.chart(np.array([-2.5]))


class TestGradientTimesInput:
    def test_linear(self, attribution_service, linear_probe):
        w = np.array([2.0, -1.0, 0.5])
        x = np.array([1.0, 3.0, -2.0])
        result = attribution_service.gxi(x, linear_probe(w).target(0))
        np.testing.assert_allclose(result.values, w * x)

    def test_zero_input(self, attribution_service, linear_probe):
        result = attribution_service.gxi(np.zeros(3), linear_probe([1.0, 2.0, 3.0]).target(0))
        np.testing.assert_array_equal(result.values, np.zeros(3))

    def test_baseline_difference(self, attribution_service, linear_probe):
        w, x, b = np.array([1.0, 2.0]), np.array([3.0, 1.0]), np.array([1.0, 1.0])
        result = attribution_service.gxi(x, linear_probe(w).target(0), b)
        np.testing.assert_allclose(result.values, w * (x - b))


class TestStraightLine:
    def test_midpoint(self, attribution_service):
        trace = attribution_service.ig_path([1.0, 1.0], [0.0, 0.0], steps=2)
        np.testing.assert_array_equal(trace.states, [[0.0, 0.0], [0.5, 0.5], [1.0, 1.0]])

    def test_linear_closed_form(self, attribution_service, linear_probe, rng):
        w, x, b = rng.standard_normal(6), rng.standard_normal(6), rng.standard_normal(6)
        target = linear_probe(w).target(0)
        result = attribution_service.riemann_attribute(attribution_service.ig_path(x, b, 7), target)
        np.testing.assert_allclose(result.values, w * (x - b), atol=1e-12)

    def test_constant_function(self, attribution_service, rng):
        target = Classifier(network=Constant(4, value=0.3)).target(0)
        trace = attribution_service.ig_path(rng.standard_normal(4), np.zeros(4), 10)
        np.testing.assert_array_equal(attribution_service.riemann_attribute(trace, target).values, np.zeros(4))

    def test_residual_shrinks_with_steps(self, attribution_service, metric_service, tanh_classifier, rng):
        x, baseline = 2.0 * rng.standard_normal(16), np.zeros(16)
        target = tanh_classifier.target(1)

        def build(steps):
            return attribution_service.riemann_attribute(attribution_service.ig_path(x, baseline, steps), target)

        residuals = metric_service.residuals_by_steps(build, target, x, baseline, [50, 100, 200, 400, 1000])
        assert all(fine < coarse for coarse, fine in zip(residuals[:-1], residuals[1:]))
        # first-order quadrature: 20x more steps, roughly 20x less residual
        assert residuals[-1] < residuals[0] / 10.0
        dense = build(10_000).total
        assert abs(build(1000).total - dense) < residuals[0]


class TestGuidedPath:
    def test_hand_trace(self, attribution_service, linear_probe):
        target = linear_probe([10.0, 1.0]).target(0)
        trace = attribution_service.gig_path([1.0, 1.0], [0.0, 0.0], target, steps=3, fraction=0.5, eta=1.0)
        np.testing.assert_array_equal(trace.states, [[0.0, 0.0], [0.0, 1.0], [0.0, 1.0], [1.0, 1.0]])
        assert [s.tolist() for s in trace.selections] == [[1], [1]]
        result = attribution_service.riemann_attribute(trace, target)
        np.testing.assert_allclose(result.values, [10.0, 1.0])

    def test_ties_select_everything(self, attribution_service):
        target = Classifier(network=Constant(3)).target(0)
        x = np.array([1.0, -2.0, 0.5])
        trace = attribution_service.gig_path(x, np.zeros(3), target, steps=4, fraction=0.1, eta=1.0)
        np.testing.assert_array_equal(trace.states[1], x)
        np.testing.assert_array_equal(attribution_service.riemann_attribute(trace, target).values, np.zeros(3))

    def test_gradients_are_shared_per_step(self, attribution_service, tanh_classifier, rng):
        target = tanh_classifier.target(0)
        trace = attribution_service.gig_path(rng.standard_normal(16), np.zeros(16), target, steps=6, fraction=0.25, eta=0.3)
        assert trace.gradients.shape == (6, 16)
        assert len(trace.selections) == 5
        for state, gradient in zip(trace.states[:-1], trace.gradients):
            np.testing.assert_allclose(gradient, target.grad(state), rtol=1e-12, atol=1e-15)


class TestLatentInterpolation:
    def test_linear_midpoint(self, attribution_service, plane, exact_plane):
        x = plane.chart(np.array([2.0, 0.0]))
        trace = attribution_service.latent_interp_path(x, np.zeros(3), exact_plane, steps=2)
        np.testing.assert_allclose(trace.latents[1], [1.0, 0.0], atol=1e-12)
        np.testing.assert_allclose(trace.states[1], plane.chart(np.array([1.0, 0.0])), atol=1e-12)
        assert trace.method == "eig"

    def test_slerp_midpoint(self, attribution_service, plane, exact_plane):
        x, baseline = plane.chart(np.array([1.0, 0.0])), plane.chart(np.array([0.0, 1.0]))
        trace = attribution_service.latent_interp_path(x, baseline, exact_plane, steps=2, mode="slerp")
        np.testing.assert_allclose(trace.latents[1], [math.sqrt(0.5), math.sqrt(0.5)], atol=1e-12)

    def test_endpoints_are_corrected(self, attribution_service, circle16, exact_circle16, rng):
        x = circle16.chart(np.array([0.4])) + 0.01 * rng.standard_normal(16)
        baseline = 1.2 * circle16.chart(np.array([-1.0]))
        trace = attribution_service.latent_interp_path(x, baseline, exact_circle16, steps=5)
        np.testing.assert_array_equal(trace.states[0], baseline)
        np.testing.assert_array_equal(trace.states[-1], x)

    def test_periodic_latent_takes_shorter_arc(self, attribution_service, unit_circle, exact_circle):
        x, baseline = unit_circle.chart(np.array([3.0])), unit_circle.chart(np.array([-3.0]))
        trace = attribution_service.latent_interp_path(x, baseline, exact_circle, steps=4)
        assert np.all(np.abs(np.diff(trace.latents[:, 0])) < 0.1)


class TestManifoldAlignedPath:
    def test_linear_closed_form(self, attribution_service, linear_probe, circle_endpoints, exact_circle16, rng):
        w = rng.standard_normal(16)
        x, baseline = circle_endpoints
        target = linear_probe(w).target(0)
        trace = attribution_service.magig_path(x, baseline, target, exact_circle16, steps=20, fraction=0.5, eta=0.2)
        result = attribution_service.riemann_attribute(trace, target)
        np.testing.assert_allclose(result.values, w * (x - baseline), atol=1e-6)

    @pytest.mark.parametrize("method", ["gxi", "ig", "gig", "eig", "magig"])
    def test_dummy_coordinate(self, attribution_service, circle_endpoints, exact_circle16, method):
        spec = MlpSpec(widths=[16, 8, 2])
        params = dict(Mlp.initialize(spec, np.random.default_rng(3)).params)
        weight = np.array(params["layers.0.weight"])
        weight[:, 5] = 0.0
        params["layers.0.weight"] = weight
        classifier = Classifier(network=Mlp(spec, params).freeze(), spec=spec)
        x, baseline = circle_endpoints
        request = AttributionRequest(x=x, baseline=baseline, classifier=classifier, method=method,
                                     steps=30, fraction=0.5, autoencoder=exact_circle16)
        values = attribution_service.attribute(request)[0].values
        assert abs(values[5]) < 1e-10
        assert np.max(np.abs(values)) > 0.0

    @pytest.mark.slow
    def test_on_manifold_contrast(self, attribution_service, metric_service, tanh_classifier, circle16, exact_circle16):
        angles = np.random.default_rng(11).uniform(-np.pi, np.pi, size=20)
        gaps = np.linspace(1.0, 3.0, 20)
        left = 0
        for angle, gap in zip(angles, gaps):
            x, baseline = circle16.chart(np.array([angle])), circle16.chart(np.array([angle + gap]))
            target = tanh_classifier.target(0)
            gig = attribution_service.gig_path(x, baseline, target, steps=200, fraction=0.05, eta=0.2)
            magig = attribution_service.magig_path(x, baseline, target, exact_circle16, steps=200,
                                                   fraction=0.05, eta=0.2)
            assert metric_service.deviation_profile(magig, circle16).interior_auc < 1e-9
            left += metric_service.deviation_profile(gig, circle16).interior_auc > 0.01
        assert left >= 18

    def test_exact_chart_path_stays_on_manifold(self, attribution_service, metric_service, tanh_classifier,
                                                circle16, circle_endpoints, exact_circle16):
        x, baseline = circle_endpoints
        trace = attribution_service.magig_path(x, baseline, tanh_classifier.target(2), exact_circle16,
                                               steps=25, fraction=0.5, eta=0.2)
        assert max(circle16.distance(state) for state in trace.states) < 1e-9
        profile = metric_service.deviation_profile(trace, circle16)
        assert profile.auc < 1e-9

    def test_guided_input_path_leaves_where_latent_path_does_not(self, attribution_service, tanh_classifier,
                                                                   circle16, circle_endpoints, exact_circle16):
        x, baseline = circle_endpoints
        target = tanh_classifier.target(0)
        gig = attribution_service.gig_path(x, baseline, target, steps=25, fraction=0.5, eta=0.2)
        magig = attribution_service.magig_path(x, baseline, target, exact_circle16, steps=25, fraction=0.5, eta=0.2)
        assert max(circle16.distance(state) for state in gig.interior) > 1e-3
        assert max(circle16.distance(state) for state in magig.interior) < 1e-9

    def test_trace_layout(self, attribution_service, tanh_classifier, circle_endpoints, exact_circle16):
        x, baseline = circle_endpoints
        target = tanh_classifier.target(0)
        trace = attribution_service.magig_path(x, baseline, target, exact_circle16, steps=8, fraction=0.5, eta=0.3)
        assert trace.states.shape == (9, 16)
        assert trace.latents.shape == (9, 1)
        assert trace.gradients.shape == (8, 16)
        assert len(trace.selections) == 7
        np.testing.assert_array_equal(trace.states[0], baseline)
        np.testing.assert_array_equal(trace.states[-1], x)
        np.testing.assert_allclose(trace.gradients[0], target.grad(baseline), rtol=1e-12)

    def test_slerp_variant_reaches_the_input(self, attribution_service, plane, exact_plane, linear_probe):
        x, baseline = plane.chart(np.array([1.0, 0.2])), plane.chart(np.array([0.1, 1.0]))
        target = linear_probe([1.0, -1.0, 0.5]).target(0)
        trace = attribution_service.magig_path(x, baseline, target, exact_plane, steps=10, fraction=0.5,
                                               eta=0.5, mode="slerp")
        assert max(plane.distance(state) for state in trace.states) < 1e-9
        np.testing.assert_allclose(attribution_service.riemann_attribute(trace, target).total,
                                   target.value(x) - target.value(baseline), atol=1e-12)


class TestAttributeRequest:
    def test_input_equal_to_baseline(self, attribution_service, tanh_classifier, rng):
        x = rng.standard_normal(16)
        request = AttributionRequest(x=x, baseline=x.copy(), classifier=tanh_classifier, method="ig", steps=10)
        attribution, trace = attribution_service.attribute(request)
        np.testing.assert_array_equal(attribution.values, np.zeros(16))
        assert trace is None
        assert attribution.completeness_residual == 0.0

    def test_residual_and_metadata(self, attribution_service, linear_probe, rng):
        w, x = rng.standard_normal(4), rng.standard_normal(4)
        request = AttributionRequest(x=x, classifier=linear_probe(w), method="gig", steps=12, eta=0.5)
        attribution, trace = attribution_service.attribute(request)
        assert attribution.completeness_residual < 1e-10
        assert attribution.metadata["fraction"] == pytest.approx(0.1)
        assert trace.steps == 12

    def test_latent_methods_need_an_autoencoder(self, tanh_classifier):
        with pytest.raises(ValueError, match="autoencoder"):
            AttributionRequest(x=np.ones(16), classifier=tanh_classifier, method="magig")

    def test_magig_attribute_rejects_other_methods(self, attribution_service, tanh_classifier):
        request = AttributionRequest(x=np.ones(16), classifier=tanh_classifier, method="ig", steps=4)
        with pytest.raises(PreconditionError):
            attribution_service.magig_attribute(request)

    def test_gxi_has_no_path(self, attribution_service, tanh_classifier):
        request = AttributionRequest(x=np.ones(16), classifier=tanh_classifier, method="gxi")
        with pytest.raises(PreconditionError):
            attribution_service.build_path(request)

    def test_bad_target(self, attribution_service, tanh_classifier):
        request = AttributionRequest(x=np.ones(16), classifier=tanh_classifier, method="ig", steps=4, target=3)
        with pytest.raises(SelectorError):
            attribution_service.attribute(request)

    def test_single_step_path_for_diagnostics(self, attribution_service, tanh_classifier, rng):
        x = rng.standard_normal(16)
        target = tanh_classifier.target(2)
        for method in ("ig", "gig"):
            request = PathRequest(x=x, classifier=tanh_classifier, method=method, steps=1, target=2)
            trace = attribution_service.build_path(request)
            assert trace.steps == 1
            np.testing.assert_array_equal(trace.states, [np.zeros(16), x])
            values = attribution_service.riemann_attribute(trace, target).values
            np.testing.assert_allclose(values, target.grad(np.zeros(16)) * x, rtol=1e-10, atol=1e-14)

    def test_attribution_needs_two_steps(self, tanh_classifier):
        with pytest.raises(ValueError):
            AttributionRequest(x=np.ones(16), classifier=tanh_classifier, method="ig", steps=1)


class AffineChain(DifferentiableFunction):
    """tanh of a chain of affine maps, each traced as its own op."""

    def __init__(self, layers):
        self.layers = layers
        self.input_shape = (layers[0][0].shape[1],)
        self.output_shape = (layers[-1][0].shape[0],)

    def trace(self, tape, x):
        h = x
        for weight, bias in self.layers:
            h = tape.affine(h, tape.constant(weight), tape.constant(bias))
        return tape.tanh(h)


class TestImplementationInvariance:
    @pytest.fixture
    def networks(self):
        rng = np.random.default_rng(11)
        w1, b1 = 0.5 * rng.standard_normal((5, 8)), rng.standard_normal(5)
        w2, b2 = 0.5 * rng.standard_normal((3, 5)), rng.standard_normal(3)
        split = Classifier(network=AffineChain([(w1, b1), (w2, b2)]))
        fused = Classifier(network=AffineChain([(w2 @ w1, w2 @ b1 + b2)]))
        return split, fused

    @pytest.mark.parametrize("method", ["gxi", "ig", "gig"])
    def test_fused_and_split_layers_agree(self, attribution_service, networks, method):
        split, fused = networks
        rng = np.random.default_rng(12)
        for _ in range(20):
            x = rng.standard_normal(8)
            maps = [
                attribution_service.attribute(
                    AttributionRequest(x=x, classifier=net, method=method, steps=50, target=1)
                )[0]
                for net in (split, fused)
            ]
            np.testing.assert_allclose(maps[0].values, maps[1].values, rtol=0, atol=1e-9)


class TestTrainedCompleteness:
    @pytest.mark.slow
    def test_straight_line_completeness_on_trained_classifier(self, attribution_service):
        data = DatasetService().generate(DatasetSpec(kind="blobs", ambient_dim=16, classes=3, samples=600, seed=3))
        classifier = ModelService().train_classifier(
            data, MlpSpec(widths=[16, 16, 3], activation="tanh"), TrainConfig(seed=3, epochs=20, accuracy_floor=0.0)
        )
        _, heldout = split_indices(len(data), 0.2, 3)
        passed = 0
        for x in data.features[heldout[:100]]:
            selector = int(classifier.predict(x))
            target = classifier.target(selector)
            request = AttributionRequest(x=x, classifier=classifier, method="ig", steps=1000, target=selector)
            attribution, _ = attribution_service.attribute(request)
            gap = abs(target.value(x) - target.value(np.zeros(16)))
            passed += gap > 0 and attribution.completeness_residual / gap < 1e-2
        assert passed >= 95
