import numpy as np
import pytest

from shapepix import MeasurementSet, apply_adjoint, build_kernel, measure, sample_shape
from shapepix.shapes import Circle, rasterize


@pytest.mark.parametrize("family", ["box", "bilinear", "biquadratic"])
def test_all_ones_measures_one(family):
    k = build_kernel(family, 5, 40)
    np.testing.assert_allclose(measure(np.ones((40, 40)), k).values, 1.0, atol=1e-14)
    assert np.all(measure(np.zeros((40, 40)), k).values == 0.0)


def test_dimension_mismatch():
    k = build_kernel("box", 2, 8)
    with pytest.raises(ValueError):
        measure(np.ones((9, 9)), k)
    with pytest.raises(ValueError):
        apply_adjoint(np.ones(5), k)


def test_one_hot_adjoint_is_patch():
    k = build_kernel("bilinear", 3, 24)
    for idx in range(9):
        y = np.zeros(9)
        y[idx] = 1.0
        np.testing.assert_allclose(apply_adjoint(y, k), k.patch(idx), atol=1e-15)


def test_box_adjoint_of_ones():
    k = build_kernel("box", 2, 8)
    np.testing.assert_allclose(apply_adjoint(np.ones(4), k), 1 / 16)


def test_flat_order_is_vertical_scan():
    v = np.arange(9.0).reshape(3, 3)
    meas = MeasurementSet(v)
    assert meas.flat[1] == v[1, 0]
    np.testing.assert_array_equal(MeasurementSet(meas.flat).values, v)


def test_sample_shape_matches_direct_measurement_for_box():
    c = Circle((0.47, 0.52), 0.3)
    meas = sample_shape(c, "box", 6, 60, oversample=3)
    fine = measure(rasterize(c, 180), build_kernel("box", 6, 180)).values
    np.testing.assert_allclose(meas.values, fine, atol=1e-12)
    coarse = measure(rasterize(c, 60, 12), build_kernel("box", 6, 60)).values
    np.testing.assert_allclose(meas.values, coarse, atol=2e-3)


def test_scaled():
    meas = MeasurementSet(np.full((2, 2), 0.4), "bilinear")
    assert np.all(meas.scaled(2).values == 0.8)
    assert meas.scaled(2).family == meas.family
