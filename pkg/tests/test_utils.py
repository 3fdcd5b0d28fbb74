import math

import numpy as np
import pytest

from magig.core.interpolation import LatentInterpolator, unwrap_periodic
from magig.core.utils import IMAGE_SIZE, attribution_order, fraction_count, nearest_rank_threshold, render_shape


class TestInterpolation:
    def test_linear_midpoint(self):
        np.testing.assert_allclose(LatentInterpolator([0.0, 0.0], [2.0, 0.0]).at(0.5), [1.0, 0.0])

    def test_slerp_quarter_arc_midpoint(self):
        midpoint = LatentInterpolator([1.0, 0.0], [0.0, 1.0], "slerp").at(0.5)
        np.testing.assert_allclose(midpoint, [math.sqrt(0.5), math.sqrt(0.5)], atol=1e-15)

    def test_slerp_endpoints(self):
        interpolator = LatentInterpolator([2.0, 1.0], [-1.0, 3.0], "slerp")
        np.testing.assert_allclose(interpolator.at(0.0), [2.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(interpolator.at(1.0), [-1.0, 3.0], atol=1e-14)

    def test_slerp_falls_back_for_zero_and_antiparallel(self):
        assert LatentInterpolator([0.0, 0.0], [1.0, 1.0], "slerp").fell_back
        assert LatentInterpolator([1.0, 0.0], [-2.0, 0.0], "slerp").fell_back
        assert LatentInterpolator([1.0, 1.0], [2.0, 2.0], "slerp").mode == "linear"

    def test_per_coordinate_progress(self):
        interpolator = LatentInterpolator([0.0, 0.0], [4.0, 8.0])
        np.testing.assert_allclose(interpolator.at(np.array([0.25, 1.0])), [1.0, 8.0])

    def test_unwrap_takes_the_shorter_arc(self):
        z = unwrap_periodic(np.array([3.0]), np.array([-3.0]), (0,))
        np.testing.assert_allclose(z, [3.0 - 2.0 * math.pi])
        assert abs(z[0] - (-3.0)) < math.pi

    def test_unwrap_ignores_other_dimensions(self):
        np.testing.assert_allclose(unwrap_periodic([0.5, 3.0], np.array([0.0, -3.0]), (0,)), [0.5, 3.0], atol=1e-15)


class TestRanking:
    def test_signed_order_is_stable(self):
        np.testing.assert_array_equal(attribution_order([1.0, 3.0, 1.0, -5.0]), [1, 0, 2, 3])

    def test_absolute_order(self):
        np.testing.assert_array_equal(attribution_order([1.0, 3.0, 1.0, -5.0], absolute=True), [3, 1, 0, 2])

    @pytest.mark.parametrize("fraction, total, expected", [(0.5, 4, 2), (0.3, 10, 3), (0.05, 16, 1), (0.0, 5, 0), (1.0, 7, 7)])
    def test_fraction_count(self, fraction, total, expected):
        assert fraction_count(fraction, total) == expected

    def test_nearest_rank_threshold(self):
        assert nearest_rank_threshold(np.array([10.0, 1.0]), 0.5) == 1.0
        assert nearest_rank_threshold(np.array([4.0, 2.0, 8.0, 6.0]), 0.01) == 2.0


class TestShapes:
    def test_square_is_hollow(self):
        image = render_shape("square", 4, 1, 2).reshape(IMAGE_SIZE, IMAGE_SIZE)
        assert image[2, 1] == 1.0 and image[5, 4] == 1.0
        assert image[3, 2] == 0.0
        assert image.sum() == 12.0

    def test_cross_is_a_plus(self):
        image = render_shape("cross", 5, 0, 0, intensity=0.6).reshape(IMAGE_SIZE, IMAGE_SIZE)
        lit = image > 0
        assert lit.sum() == 9
        assert lit[2].sum() == 5 and lit[:, 2].sum() == 5
        assert image.max() == pytest.approx(153 / 255)
