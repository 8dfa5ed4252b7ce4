"""Discontinuity-aware weights for the nonlocal TV regularizer.

``W_d = w_d * (w_e ⊙ w_o)`` where ``w_d`` decays with the offset length, ``w_e``
with the local image gradient and ``w_o`` with occlusion boundaries and
view-projection error. All factors decay (exponent <= 0), so the maps stay in
``(0, 1]``; an infinite falloff turns a factor off.
"""

from __future__ import annotations

import logging

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from lfsr.model.lightfield import ImageGrid, LightFieldStack, bicubic_upsample
from lfsr.model.operators import OffsetSet, RegWeightSet, warp
from lfsr.model.utils import as_grid, check_same_shape


logger = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-12


class WeightParams(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    sigma_s: float = Field(1.0, gt=0)
    sigma_e: float = Field(0.01, gt=0)
    sigma_o1: float = Field(1.0, gt=0)
    sigma_o2: float = Field(0.1, gt=0)

    @classmethod
    def btv(cls, sigma_s: float = 1.0) -> WeightParams:
        """Spatial weighting only (bilateral TV)."""
        return cls(sigma_s=sigma_s, sigma_e=np.inf, sigma_o1=np.inf, sigma_o2=np.inf)


def _decay(sq: np.ndarray | float, scale: float) -> np.ndarray:
    if np.isinf(scale):
        return np.ones_like(np.asarray(sq, dtype=np.float64))
    return np.exp(-np.asarray(sq, dtype=np.float64) / scale)


def spatial_weight(d: tuple[int, int], sigma_s: float) -> float:
    return float(max(_decay(d[0] ** 2 + d[1] ** 2, sigma_s), WEIGHT_FLOOR))


def edge_weight(x: ImageGrid, sigma_e: float) -> ImageGrid:
    x = as_grid(x)
    gy, gx = np.gradient(x) if min(x.shape) > 1 else (np.zeros_like(x), np.zeros_like(x))
    return np.maximum(_decay(gx**2 + gy**2, sigma_e), WEIGHT_FLOOR)


def occlusion_boundary(disparity: ImageGrid) -> ImageGrid:
    """One-sided divergence ``min(0, dω/dx + dω/dy)`` with forward differences."""
    w = as_grid(disparity, "disparity map")
    dx = np.zeros_like(w)
    dy = np.zeros_like(w)
    dx[:, :-1] = w[:, 1:] - w[:, :-1]
    dy[:-1, :] = w[1:, :] - w[:-1, :]
    return np.minimum(0.0, dx + dy)


def reference_projections(stack: LightFieldStack) -> list[ImageGrid]:
    """Every non-reference LR view, upsampled and warped back onto the reference grid."""
    ref = stack.reference_view.disparity
    out = []
    for k, view in enumerate(stack.views):
        if k == stack.reference:
            continue
        d_rho, d_tau = stack.offset(k)
        out.append(warp(bicubic_upsample(view.image, stack.scale), ref, (-d_rho, -d_tau)))
    return out


def projection_error(stack: LightFieldStack, x: ImageGrid, projections: list[ImageGrid] | None = None) -> ImageGrid:
    """Mean absolute difference between ``x`` and the reprojected non-reference views."""
    x = as_grid(x)
    check_same_shape(x, stack.reference_view.disparity, "HR estimate and disparity map")
    projections = reference_projections(stack) if projections is None else projections
    if not projections:
        return np.zeros_like(x)
    return np.mean([np.abs(x - pk) for pk in projections], axis=0)


def occlusion_weight(b: ImageGrid, p: ImageGrid, sigma_o1: float, sigma_o2: float) -> ImageGrid:
    b, p = as_grid(b), as_grid(p)
    w = _decay(b**2, 2 * sigma_o1**2) * _decay(p**2, 2 * sigma_o2**2)
    return np.maximum(w, WEIGHT_FLOOR)


def assemble_weights(
    x: ImageGrid,
    stack: LightFieldStack,
    offsets: OffsetSet,
    params: WeightParams,
    projections: list[ImageGrid] | None = None,
) -> RegWeightSet:
    w_e = edge_weight(x, params.sigma_e)
    b = occlusion_boundary(stack.reference_view.disparity)
    p = projection_error(stack, x, projections)
    w_o = occlusion_weight(b, p, params.sigma_o1, params.sigma_o2)
    shared = np.maximum(w_e * w_o, WEIGHT_FLOOR)
    spatial = tuple(spatial_weight(d, params.sigma_s) for d in offsets)
    return RegWeightSet(offsets, spatial, shared)


class WeightAssembler:
    """Reassembles weights for a fixed stack; the view reprojections are computed once."""

    def __init__(self, stack: LightFieldStack, offsets: OffsetSet | None, params: WeightParams):
        self.stack = stack
        self.offsets = offsets
        self.params = params
        self._projections = reference_projections(stack) if offsets is not None else []

    def __call__(self, x: ImageGrid) -> RegWeightSet | None:
        if self.offsets is None:
            return None
        return assemble_weights(x, self.stack, self.offsets, self.params, self._projections)
