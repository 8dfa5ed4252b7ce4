import numpy as np
import pytest
from conftest import make_rng

from lfsr.data.degrade import (
    NoiseParams,
    add_gaussian_noise,
    add_impulse_noise,
    degrade_lightfield,
    degrade_view,
    noise_rng,
    prepare_disparity,
)
from lfsr.model.lightfield import ColorImage
from lfsr.model.operators import BlurKernel, apply_A, gaussian_psf
from lfsr.model.utils import DimensionError, RangeError


def _hr(shape=(16, 16), seed=0):
    return make_rng(seed).uniform(0.1, 0.9, size=shape)


def test_gaussian_noise_statistics():
    x = np.full((400, 400), 0.5)
    noisy = add_gaussian_noise(x, 10.0, noise_rng(7))
    std = float(np.std(noisy - x))
    assert abs(std - 10.0 / 255.0) <= 0.02 * 10.0 / 255.0


@pytest.mark.parametrize(
    "nu,count",
    [(0.5, 50), (1.0, 100), (5.0, 500), (33.3, 3330), (0.57, 57), (1.13, 113), (1.14, 114), (1.38, 138)],
)
def test_impulse_count_is_exact(nu, count):
    x = np.full((100, 100), 0.5)
    out = add_impulse_noise(x, nu, noise_rng(3))
    assert int(np.sum(out != 0.5)) == count
    assert set(np.unique(out[out != 0.5])) <= {0.0, 1.0}


def test_impulse_mask_is_shared_across_channels():
    x = np.full((3, 20, 20), 0.5)
    out = add_impulse_noise(x, 10.0, noise_rng(1))
    hit = out != 0.5
    np.testing.assert_array_equal(hit[0], hit[1])
    np.testing.assert_array_equal(hit[0], hit[2])
    assert int(hit[0].sum()) == 40


def test_noise_parameters_are_validated():
    with pytest.raises(RangeError):
        add_impulse_noise(np.zeros((2, 2)), 101.0, noise_rng(0))
    with pytest.raises(ValueError):
        NoiseParams(sigma_g=-1.0)


def test_zero_noise_leaves_image_untouched():
    x = np.linspace(-0.2, 1.2, 16).reshape(4, 4)
    np.testing.assert_array_equal(add_gaussian_noise(x, 0.0, noise_rng(0)), x)
    np.testing.assert_array_equal(add_impulse_noise(x, 0.0, noise_rng(0)), x)


def test_identity_chain_returns_input():
    x = _hr((8, 8))
    out = degrade_view(x, np.ones((8, 8)), (0.0, 0.0), 1, BlurKernel.identity())
    np.testing.assert_array_equal(out, x)


def test_prepare_disparity():
    np.testing.assert_allclose(prepare_disparity(np.full((8, 8), 1.25), 2), 1.25, atol=1e-12)
    rows, cols = np.mgrid[0:16, 0:16]
    ramp = 0.1 * cols + 0.05 * rows
    np.testing.assert_allclose(prepare_disparity(ramp, 2)[2:-4, 2:-4], ramp[2:-4, 2:-4], atol=1e-3)
    with pytest.raises(DimensionError):
        prepare_disparity(np.ones((5, 4)), 2)


def test_noiseless_stack_matches_forward_model_bit_for_bit():
    x = _hr()
    disparity = make_rng(1).uniform(0.5, 1.5, size=(16, 16))
    result = degrade_lightfield(x, disparity, grid=3, pattern="star", zeta=2, prepare=False)
    stack = result.stack
    assert len(stack) == 9
    assert stack.theta0.rho == 0.0 and stack.theta0.tau == 0.0
    expected = apply_A(x, stack, 2, gaussian_psf(2))
    for k, view in enumerate(stack.views):
        np.testing.assert_array_equal(view.image, expected[k])


def test_degradation_is_deterministic_and_view_independent():
    x = _hr()
    disparity = np.ones((16, 16))
    noise = NoiseParams(sigma_g=5.0, nu=1.0, seed=42)
    a = degrade_lightfield(x, disparity, grid=3, pattern="cross", noise=noise, max_workers=1)
    b = degrade_lightfield(x, disparity, grid=3, pattern="cross", noise=noise, max_workers=4)
    for va, vb in zip(a.stack.views, b.stack.views):
        np.testing.assert_array_equal(va.image, vb.image)

    k = 3
    delta = a.stack.offset(k)
    alone = degrade_view(x, disparity, delta, 2, gaussian_psf(2), noise, noise_rng(42, k))
    np.testing.assert_array_equal(a.stack.views[k].image, alone)

    other = degrade_lightfield(x, disparity, grid=3, pattern="cross", noise=noise.model_copy(update={"seed": 43}))
    assert not np.array_equal(other.stack.views[0].image, a.stack.views[0].image)


def test_view_noise_is_uncorrelated_across_views():
    x = np.full((1024, 1024), 0.5)
    disparity = np.ones((1024, 1024))
    clean = degrade_lightfield(x, disparity, grid=3, pattern="row", zeta=2, prepare=False)
    noise = NoiseParams(sigma_g=5.0, seed=42)
    noisy = degrade_lightfield(x, disparity, grid=3, pattern="row", zeta=2, noise=noise, prepare=False)
    residuals = np.stack([(n.image - c.image).ravel() for n, c in zip(noisy.stack.views, clean.stack.views)])
    corr = np.corrcoef(residuals)
    off_diagonal = corr[~np.eye(len(corr), dtype=bool)]
    assert np.max(np.abs(off_diagonal)) <= 0.01


def test_prepared_disparity_is_stored_in_the_stack():
    x = _hr()
    rows, cols = np.mgrid[0:16, 0:16]
    disparity = 1.0 + 0.05 * np.sin(cols) + 0.02 * rows
    result = degrade_lightfield(x, disparity, grid=3, pattern="row")
    np.testing.assert_array_equal(result.gt_disparity, disparity)
    np.testing.assert_allclose(result.stack.views[0].disparity, prepare_disparity(disparity, 2))


def test_colour_scene_solves_on_luma(scene):
    hr, disparity = scene
    result = degrade_lightfield(hr, disparity, grid=3, pattern="row", zeta=2, prepare=False)
    assert result.color_views is not None and len(result.color_views) == 3
    assert isinstance(result.gt_color, ColorImage)
    assert result.ground_truth.shape == (64, 64)
    assert result.stack.views[0].image.shape == (32, 32)
    ref = result.color_views[result.stack.reference]
    luma = 0.299 * ref.channels[0] + 0.587 * ref.channels[1] + 0.114 * ref.channels[2]
    np.testing.assert_allclose(result.stack.reference_view.image, luma, atol=1e-9)


def test_disparity_must_match_image():
    with pytest.raises(DimensionError):
        degrade_lightfield(_hr(), np.ones((8, 8)))
