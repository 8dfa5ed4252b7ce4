import math

import numpy as np
import pytest
from conftest import make_stack

from lfsr.model.lightfield import LightFieldStack, PerspectiveIndex, View
from lfsr.model.operators import OffsetSet
from lfsr.model.weights import (
    WEIGHT_FLOOR,
    WeightAssembler,
    WeightParams,
    assemble_weights,
    edge_weight,
    occlusion_boundary,
    occlusion_weight,
    projection_error,
    spatial_weight,
)


def _constant_stack(value=0.4, shape=(8, 8), zeta=2):
    disparity = np.ones(shape)
    lr = np.full((shape[0] // zeta, shape[1] // zeta), value)
    views = (View(lr, PerspectiveIndex(0.0, 0.0), disparity), View(lr, PerspectiveIndex(1.0, 0.0), disparity))
    return LightFieldStack(views, 0, zeta)


def test_spatial_weight_decays_with_offset_length():
    assert spatial_weight((1, 0), 1.0) == pytest.approx(math.exp(-1.0))
    assert spatial_weight((1, 1), 1.0) == pytest.approx(math.exp(-2.0))
    assert spatial_weight((2, 0), 1.0) < spatial_weight((1, 1), 1.0) < spatial_weight((0, 1), 1.0)
    assert spatial_weight((2, 2), math.inf) == 1.0


def test_edge_weight_on_flat_and_ramp_images():
    np.testing.assert_allclose(edge_weight(np.full((5, 5), 0.3), 0.01), 1.0)
    ramp = np.tile(0.05 * np.arange(6.0), (4, 1))
    np.testing.assert_allclose(edge_weight(ramp, 0.01), math.exp(-0.0025 / 0.01))


def test_edge_weight_is_floored():
    step = np.zeros((4, 4))
    step[:, 2:] = 1e3
    assert edge_weight(step, 0.01).min() == WEIGHT_FLOOR


def test_edge_weight_falls_at_edges():
    step = np.zeros((6, 6))
    step[:, 3:] = 1.0
    w = edge_weight(step, 0.01)
    assert w[2, 2] < w[2, 0]
    assert w[2, 0] == 1.0


def test_occlusion_boundary_is_one_sided():
    cols = np.tile(np.arange(5.0), (3, 1))
    np.testing.assert_array_equal(occlusion_boundary(cols), 0.0)
    b = occlusion_boundary(-cols)
    np.testing.assert_allclose(b[:, :-1], -1.0)
    np.testing.assert_allclose(b[:, -1], 0.0)


def test_occlusion_weight_limits_and_monotonicity():
    zero = np.zeros((2, 2))
    np.testing.assert_allclose(occlusion_weight(zero, zero, 1.0, 0.1), 1.0)
    near = occlusion_weight(np.full((1, 1), -0.5), zero[:1, :1], 1.0, 0.1)
    far = occlusion_weight(np.full((1, 1), -1.0), zero[:1, :1], 1.0, 0.1)
    assert far[0, 0] < near[0, 0] < 1.0
    np.testing.assert_allclose(occlusion_weight(np.full((2, 2), -3.0), np.full((2, 2), 2.0), math.inf, math.inf), 1.0)


def test_projection_error_of_consistent_views_is_distance_to_their_value():
    stack = _constant_stack(0.4)
    x = np.full((8, 8), 0.1)
    np.testing.assert_allclose(projection_error(stack, x), 0.3, atol=1e-12)


def test_projection_error_without_other_views_is_zero():
    stack = make_stack(thetas=((0, 0),))
    np.testing.assert_array_equal(projection_error(stack, np.ones((8, 8))), 0.0)


def test_assembled_weights_lie_in_unit_interval():
    stack = make_stack(seed=4)
    x = np.random.default_rng(0).uniform(0, 1, size=(8, 8))
    weights = assemble_weights(x, stack, OffsetSet.window(2), WeightParams())
    assert weights.maps.shape == (12, 8, 8)
    assert np.all(weights.maps > 0) and np.all(weights.maps <= 1)


def test_btv_weights_depend_on_offset_only():
    stack = make_stack(seed=5)
    x = np.random.default_rng(1).uniform(0, 1, size=(8, 8))
    weights = assemble_weights(x, stack, OffsetSet.window(1), WeightParams.btv(sigma_s=2.0))
    np.testing.assert_array_equal(weights.shared, 1.0)
    for (dx, dy), w_map in zip(weights.offsets, weights.maps):
        np.testing.assert_allclose(w_map, math.exp(-(dx * dx + dy * dy) / 2.0))


def test_large_falloffs_approach_disabled_factors():
    stack = make_stack(seed=6)
    x = np.random.default_rng(2).uniform(0, 1, size=(8, 8))
    offsets = OffsetSet.window(1)
    big = WeightParams(sigma_s=1e12, sigma_e=1e12, sigma_o1=1e12, sigma_o2=1e12)
    off = WeightParams(sigma_s=math.inf, sigma_e=math.inf, sigma_o1=math.inf, sigma_o2=math.inf)
    np.testing.assert_allclose(
        assemble_weights(x, stack, offsets, big).maps, assemble_weights(x, stack, offsets, off).maps, atol=1e-9
    )


def test_assembler_without_offsets_returns_none():
    stack = make_stack()
    assert WeightAssembler(stack, None, WeightParams())(np.ones((8, 8))) is None


def test_weight_params_reject_unknown_and_nonpositive():
    with pytest.raises(ValueError):
        WeightParams(sigma_s=0.0)
    with pytest.raises(ValueError):
        WeightParams(sigma_x=1.0)
