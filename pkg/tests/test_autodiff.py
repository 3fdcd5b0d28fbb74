"""Forward evaluation, tapes and gradients of the float64 autodiff core."""
import numpy as np
import pytest
from scipy.special import softmax

from magig.core.autodiff import (
    INPUT,
    DifferentiableFunction,
    decoder_vjp,
    finite_diff_gradient,
    finite_diff_jacobian,
    forward,
    grad_input,
    jacobian,
    target_value_and_grad,
)
from magig.core.exception_error import NonFiniteValueError, SelectorError, ShapeMismatchError, StaleTapeError
from magig.core.network import Constant, Identity, LinearMap, Mlp, SumOfSquares
from magig.model.network_model import MlpSpec


@pytest.fixture
def classifier_net(rng):
    return Mlp.initialize(MlpSpec(widths=[4, 8, 3], activation="tanh"), rng)


class TestForward:
    def test_identity(self):
        output, _ = forward(Identity(2), [1.5, -2.0])
        np.testing.assert_array_equal(output, [1.5, -2.0])

    def test_sum_of_squares(self):
        output, _ = forward(SumOfSquares(2), [1.0, 2.0])
        np.testing.assert_array_equal(output, [5.0])

    def test_mlp_matches_straight_line_arithmetic(self, classifier_net, rng):
        x = rng.standard_normal(4)
        p = classifier_net.params
        hidden = np.tanh(p["layers.0.weight"] @ x + p["layers.0.bias"])
        expected = softmax(p["layers.1.weight"] @ hidden + p["layers.1.bias"])
        output, _ = forward(classifier_net, x)
        np.testing.assert_allclose(output, expected, rtol=1e-12)
        assert np.all((output >= 0) & (output <= 1))

    def test_batched_rows_match_single_evaluations(self, classifier_net, rng):
        batch = rng.standard_normal((5, 4))
        output, _ = forward(classifier_net, batch)
        for row, x in zip(output, batch):
            np.testing.assert_allclose(row, forward(classifier_net, x)[0], rtol=1e-12)

    def test_wrong_input_shape(self, classifier_net):
        with pytest.raises(ShapeMismatchError):
            forward(classifier_net, np.zeros(3))

    def test_non_finite_value_is_reported(self):
        with pytest.raises(NonFiniteValueError):
            forward(Identity(2), [np.inf, 0.0])


class TestGradients:
    def test_sum_of_squares_gradient(self):
        _, tape = forward(SumOfSquares(2), [1.0, 2.0])
        np.testing.assert_array_equal(grad_input(tape, 0), [2.0, 4.0])

    def test_constant_has_zero_gradient(self):
        _, tape = forward(Constant(3, value=0.7), [0.3, -1.0, 2.0])
        np.testing.assert_array_equal(grad_input(tape, 0), np.zeros(3))

    def test_mlp_gradient_matches_finite_differences(self, classifier_net, rng):
        x = rng.standard_normal(4)
        _, grad = target_value_and_grad(classifier_net, x, selector=1)
        numeric = finite_diff_gradient(classifier_net, x, step=1e-5, selector=1)
        assert np.linalg.norm(grad - numeric) / np.linalg.norm(numeric) < 1e-4

    def test_batched_gradient_rows(self, classifier_net, rng):
        batch = rng.standard_normal((4, 4))
        _, tape = forward(classifier_net, batch)
        grads = grad_input(tape, 2)
        for row, x in zip(grads, batch):
            _, single = target_value_and_grad(classifier_net, x, selector=2)
            np.testing.assert_allclose(row, single, rtol=1e-10, atol=1e-14)

    def test_parameter_gradients_are_keyed_by_parameter_name(self, classifier_net, rng):
        x = rng.standard_normal(4)
        output, tape = forward(classifier_net, x)
        grads = tape.backward(np.eye(3)[0])
        assert set(grads) == set(classifier_net.params) | {INPUT}
        for name, value in classifier_net.params.items():
            assert grads[name].shape == value.shape
        np.testing.assert_allclose(grads["layers.1.bias"], output[0] * (np.eye(3)[0] - output), rtol=1e-12)

    def test_selector_out_of_range(self, classifier_net):
        _, tape = forward(classifier_net, np.zeros(4))
        with pytest.raises(SelectorError):
            grad_input(tape, 3)

    def test_tape_goes_stale_after_parameter_update(self, classifier_net):
        _, tape = forward(classifier_net, np.zeros(4))
        classifier_net.assign(dict(classifier_net.params))
        with pytest.raises(StaleTapeError):
            grad_input(tape, 0)

    def test_tape_can_be_replayed(self, classifier_net, rng):
        _, tape = forward(classifier_net, rng.standard_normal(4))
        first = grad_input(tape, 0)
        np.testing.assert_array_equal(grad_input(tape, 0), first)


class TestFiniteDifferences:
    def test_linear(self):
        np.testing.assert_allclose(finite_diff_gradient(lambda x: 3.0 * x, [1.0], step=1e-5), [3.0], atol=1e-9)

    def test_quadratic(self):
        np.testing.assert_allclose(finite_diff_gradient(lambda x: x ** 2, [2.0], step=1e-5), [4.0], atol=1e-6)


class TestDecoderVjp:
    def test_linear_decoder(self):
        weight = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
        v = np.array([0.5, -1.0, 2.0])
        np.testing.assert_allclose(decoder_vjp(LinearMap(weight), np.zeros(2), v), weight.T @ v)

    def test_identity_decoder(self):
        v = np.array([0.1, -0.2, 0.3])
        np.testing.assert_array_equal(decoder_vjp(Identity(3), np.ones(3), v), v)

    def test_mlp_decoder_matches_finite_difference_jacobian(self, rng):
        decoder = Mlp.initialize(MlpSpec(widths=[2, 6, 5], head="linear"), rng)
        z, v = rng.standard_normal(2), rng.standard_normal(5)
        numeric = finite_diff_jacobian(decoder, z)
        np.testing.assert_allclose(jacobian(decoder, z), numeric, rtol=1e-6, atol=1e-8)
        vjp = decoder_vjp(decoder, z, v)
        assert np.linalg.norm(vjp - numeric.T @ v) / np.linalg.norm(numeric.T @ v) < 1e-4

    def test_cotangent_shape_is_checked(self):
        with pytest.raises(ShapeMismatchError):
            decoder_vjp(Identity(3), np.ones(3), np.ones(2))


class Traced(DifferentiableFunction):
    def __init__(self, dim, outputs, body):
        self.input_shape, self.output_shape = (dim,), (outputs,)
        self.body = body

    def trace(self, tape, x):
        return self.body(tape, x)


_W = np.random.default_rng(0).standard_normal((3, 5))
_B = np.random.default_rng(1).standard_normal(3)
_KERNEL = np.random.default_rng(2).standard_normal((1, 4))


def _affine(tape, x):
    return tape.affine(x, tape.constant(_W), tape.constant(_B))


def _convolution(tape, x):
    patches = tape.im2col(x, (1, 4, 4), (2, 2))
    return tape.reshape(tape.matmul(patches, tape.constant(_KERNEL)), (9,))


PRIMITIVES = {
    "affine": (5, 3, _affine),
    "convolution": (16, 9, _convolution),
    "relu": (5, 3, lambda t, x: t.relu(_affine(t, x))),
    "tanh": (5, 3, lambda t, x: t.tanh(_affine(t, x))),
    "sigmoid": (5, 3, lambda t, x: t.sigmoid(_affine(t, x))),
    "softmax": (5, 3, lambda t, x: t.softmax(_affine(t, x))),
    "sum": (5, 1, lambda t, x: t.sum(t.tanh(x))),
    "mean": (5, 1, lambda t, x: t.mean(t.mul(x, x))),
    "product": (5, 5, lambda t, x: t.mul(x, t.sin(x))),
    "quotient": (5, 5, lambda t, x: t.div(t.cos(x), t.sqrt(t.add(t.mul(x, x), t.constant(1.0))))),
    "atan2": (2, 1, lambda t, x: t.atan2(t.take(x, [0]), t.take(x, [1]))),
    "concat": (4, 6, lambda t, x: t.concat([t.tanh(x), t.scale(t.take(x, [3, 0]), 2.0)])),
}


class TestPrimitives:
    @pytest.mark.parametrize("name", sorted(PRIMITIVES))
    def test_gradient_matches_finite_differences(self, name):
        dim, outputs, body = PRIMITIVES[name]
        fn = Traced(dim, outputs, body)
        points = np.random.default_rng(5).standard_normal((100, dim))
        for selector in (0, outputs - 1):
            for x in points:
                _, tape = forward(fn, x)
                np.testing.assert_allclose(
                    grad_input(tape, selector), finite_diff_gradient(fn, x, selector=selector), rtol=1e-4, atol=1e-7
                )

    def test_ops_are_recorded_in_order(self):
        _, tape = forward(Traced(5, 3, lambda t, x: t.tanh(_affine(t, x))), np.ones(5))
        assert tape.ops[-2:] == ["affine", "tanh"]
