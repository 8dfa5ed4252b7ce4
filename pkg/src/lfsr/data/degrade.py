"""Synthesize low-resolution light-field stacks from a high-resolution ground truth.

Each selected view goes through ``D B W_k`` (the same code path as the solver's
forward model), then Gaussian noise, then salt-and-pepper noise, then a clamp
to ``[0, 1]``. Every view draws from its own Philox stream seeded with
``seed ^ k``, so results do not depend on scheduling.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from lfsr.data.io import write_image, write_pfm, write_stack
from lfsr.model.lightfield import (
    ColorImage,
    ImageGrid,
    LightFieldStack,
    PerspectiveIndex,
    View,
    bicubic_resample,
    select_views,
    to_luma,
)
from lfsr.model.operators import BlurKernel, blur, default_kernel, downsample, warp
from lfsr.model.utils import DimensionError, RangeError, as_grid


logger = logging.getLogger(__name__)


class NoiseParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma_g: float = Field(0.0, ge=0)
    nu: float = Field(0.0, ge=0, le=100)
    seed: int = Field(0, ge=0, lt=2**64)


def noise_rng(seed: int, k: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed ^ k))


def add_gaussian_noise(x: np.ndarray, sigma_g: float, rng: np.random.Generator) -> np.ndarray:
    """``x + n / 255`` with ``n ~ N(0, sigma_g^2)`` per sample, clamped to [0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if sigma_g < 0:
        raise RangeError(f"sigma_g must be >= 0, got {sigma_g}")
    if sigma_g == 0:
        return x.copy()
    return np.clip(x + rng.standard_normal(x.shape) * (sigma_g / 255.0), 0.0, 1.0)


def add_impulse_noise(x: np.ndarray, nu: float, rng: np.random.Generator) -> np.ndarray:
    """Set ``floor(nu * n / 100)`` distinct pixels to 0 or 1.

    For a ``(3, H, W)`` colour array the same pixels are hit in every channel.
    """
    x = np.asarray(x, dtype=np.float64)
    if not 0 <= nu <= 100:
        raise RangeError(f"impulse fraction must be within 0..100 percent, got {nu}")
    if nu == 0:
        return x.copy()
    h, w = x.shape[-2:]
    n = h * w
    count = math.floor(Fraction(str(nu)) * n / 100)
    idx = rng.choice(n, size=count, replace=False)
    values = rng.integers(0, 2, size=count).astype(np.float64)
    out = np.clip(x, 0.0, 1.0)
    rows, cols = np.divmod(idx, w)
    out[..., rows, cols] = values
    return out


def _degrade_linear(x_hr: np.ndarray, disparity: np.ndarray, delta, zeta: int, kernel: BlurKernel) -> np.ndarray:
    return downsample(blur(warp(x_hr, disparity, delta), kernel), zeta)


def degrade_view(
    x_hr: ImageGrid | ColorImage,
    disparity: ImageGrid,
    delta: tuple[float, float],
    zeta: int,
    kernel: BlurKernel,
    noise: NoiseParams | None = None,
    rng: np.random.Generator | None = None,
) -> ImageGrid | ColorImage:
    """Degrade one view; ``delta`` is ``theta_k - theta_0`` as ``(d_rho, d_tau)``."""
    if isinstance(x_hr, ColorImage):
        lr = np.stack([_degrade_linear(c, disparity, delta, zeta, kernel) for c in x_hr.channels])
    else:
        lr = _degrade_linear(as_grid(x_hr), disparity, delta, zeta, kernel)
    if noise is not None:
        rng = rng if rng is not None else noise_rng(noise.seed)
        lr = add_impulse_noise(add_gaussian_noise(lr, noise.sigma_g, rng), noise.nu, rng)
    return ColorImage(lr, x_hr.space) if isinstance(x_hr, ColorImage) else lr


def prepare_disparity(disparity: ImageGrid, zeta: int) -> ImageGrid:
    """Bicubic down by ``zeta`` and back up; values keep their HR-pixel units."""
    disparity = as_grid(disparity, "disparity map")
    h, w = disparity.shape
    if h % zeta or w % zeta:
        raise DimensionError(f"disparity shape {disparity.shape} is not divisible by scale {zeta}")
    if zeta == 1:
        return disparity.copy()
    low = bicubic_resample(disparity, w // zeta, h // zeta)
    return bicubic_resample(low, w, h)


@dataclass(frozen=True, eq=False)
class DegradedLightField:
    stack: LightFieldStack
    ground_truth: np.ndarray
    gt_disparity: np.ndarray
    grid: int
    pattern: str
    color_views: tuple[ColorImage, ...] | None = None
    gt_color: ColorImage | None = None


def degrade_lightfield(
    x_hr: ImageGrid | ColorImage,
    disparity_gt: ImageGrid,
    grid: int = 3,
    pattern: str = "star",
    zeta: int = 2,
    kernel: BlurKernel | None = None,
    noise: NoiseParams | None = None,
    arm: int | None = None,
    prepare: bool = True,
    out_dir: str | Path | None = None,
    max_workers: int | None = None,
) -> DegradedLightField:
    """Render every selected perspective of a Lambertian scene, degrade it and optionally write the stack."""
    noise = noise if noise is not None else NoiseParams()
    kernel = kernel if kernel is not None else default_kernel(zeta)
    disparity_gt = as_grid(disparity_gt, "disparity map")
    hr_shape = x_hr.shape if isinstance(x_hr, ColorImage) else as_grid(x_hr).shape
    if disparity_gt.shape != tuple(hr_shape):
        raise DimensionError(f"disparity {disparity_gt.shape} does not match HR image {tuple(hr_shape)}")

    thetas = select_views(grid, pattern, arm)
    theta0 = PerspectiveIndex(0.0, 0.0)
    reference = thetas.index(theta0)
    solve_disparity = prepare_disparity(disparity_gt, zeta) if prepare else disparity_gt

    def run(k: int):
        return degrade_view(x_hr, disparity_gt, thetas[k] - theta0, zeta, kernel, noise, noise_rng(noise.seed, k))

    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        lr_views = list(executor.map(run, range(len(thetas))))

    views = tuple(View(to_luma(lr), theta, solve_disparity) for lr, theta in zip(lr_views, thetas))
    stack = LightFieldStack(views, reference, zeta)
    is_color = isinstance(x_hr, ColorImage)
    result = DegradedLightField(
        stack=stack,
        ground_truth=to_luma(x_hr),
        gt_disparity=disparity_gt,
        grid=grid,
        pattern=pattern,
        color_views=tuple(lr_views) if is_color else None,
        gt_color=x_hr if is_color else None,
    )
    logger.info(
        "degraded %d views at scale %d (sigma_g=%g, nu=%g%%, seed=%d)",
        len(views), zeta, noise.sigma_g, noise.nu, noise.seed,
    )
    if out_dir is not None:
        write_degraded(out_dir, result, kernel)
    return result


def write_degraded(out_dir: str | Path, result: DegradedLightField, kernel: BlurKernel | None = None):
    out_dir = Path(out_dir)
    default_taps = default_kernel(result.stack.scale).taps
    custom_kernel = None
    if kernel is not None and not np.array_equal(kernel.taps, default_taps):
        custom_kernel = kernel
    write_stack(
        out_dir,
        result.stack,
        result.grid,
        result.pattern,
        color_views=list(result.color_views) if result.color_views is not None else None,
        kernel=custom_kernel,
    )
    if result.gt_color is not None:
        write_image(out_dir / "gt.ppm", result.gt_color)
    else:
        write_image(out_dir / "gt.pgm", result.ground_truth)
    write_pfm(out_dir / "gt_disp.pfm", result.gt_disparity)
