"""Matrix-free degradation and regularization operators.

Every operator works directly on image grids; none of them assembles a sparse
matrix. Forward/adjoint pairs satisfy ``<Op x, y> == <x, Op^T y>`` to rounding
error (warp in ``exact`` mode). Scatter-type adjoints accumulate with
``np.bincount`` so results do not depend on thread count.
"""

from __future__ import annotations

import logging
import math
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np
from scipy import ndimage

from lfsr.model.lightfield import ImageGrid, LightFieldStack
from lfsr.model.utils import DimensionError, RangeError, as_grid, check_same_shape, frozen


logger = logging.getLogger(__name__)

AdjointMode = Literal["exact", "reverse"]
ADJOINT_MODES = ("exact", "reverse")
# alternate spelling accepted from configs
ADJOINT_ALIASES = {"paper": "reverse"}


def resolve_adjoint_mode(mode: str) -> AdjointMode:
    mode = ADJOINT_ALIASES.get(mode, mode)
    if mode not in ADJOINT_MODES:
        raise ValueError(f"unknown adjoint mode {mode!r}, choose from {ADJOINT_MODES}")
    return mode


# types


@dataclass(frozen=True, eq=False)
class BlurKernel:
    taps: np.ndarray

    def __post_init__(self):
        taps = np.asarray(self.taps, dtype=np.float64)
        if taps.ndim != 2 or taps.shape[0] != taps.shape[1] or taps.shape[0] % 2 == 0:
            raise DimensionError(f"blur kernel must be square with odd side, got {taps.shape}")
        if not np.all(np.isfinite(taps)):
            raise RangeError("blur kernel taps must be finite")
        if abs(taps.sum() - 1.0) > 1e-12:
            raise RangeError(f"blur kernel taps must sum to 1, got {taps.sum():.15g}")
        object.__setattr__(self, "taps", frozen(taps))

    @classmethod
    def from_taps(cls, taps, normalize: bool = True) -> BlurKernel:
        taps = np.asarray(taps, dtype=np.float64)
        if normalize:
            total = taps.sum()
            if total <= 0:
                raise RangeError("blur kernel taps must have a positive sum")
            taps = taps / total
        return cls(taps)

    @classmethod
    def identity(cls) -> BlurKernel:
        return cls(np.ones((1, 1)))

    @property
    def radius(self) -> int:
        return (self.taps.shape[0] - 1) // 2

    @property
    def is_symmetric(self) -> bool:
        return bool(np.allclose(self.taps, self.taps[::-1, ::-1], atol=1e-15))


@dataclass(frozen=True)
class OffsetSet:
    """Integer offsets ``(dx, dy)``: ``dx`` steps along columns, ``dy`` along rows."""

    offsets: tuple[tuple[int, int], ...]

    def __post_init__(self):
        offsets = tuple((int(dx), int(dy)) for dx, dy in self.offsets)
        if not offsets:
            raise RangeError("offset set must not be empty")
        if (0, 0) in offsets:
            raise RangeError("offset set must not contain the zero offset")
        if len(set(offsets)) != len(offsets):
            raise RangeError(f"duplicate offsets in {offsets}")
        object.__setattr__(self, "offsets", offsets)

    @classmethod
    def window(cls, radius: int) -> OffsetSet:
        """Half of a (2r+1)^2 window: one offset out of every +d/-d pair."""
        if radius < 1:
            raise RangeError(f"window radius must be >= 1, got {radius}")
        offsets = [
            (dx, dy)
            for dy in range(0, radius + 1)
            for dx in range(-radius, radius + 1)
            if dy > 0 or dx > 0
        ]
        return cls(tuple(offsets))

    def __len__(self):
        return len(self.offsets)

    def __iter__(self):
        return iter(self.offsets)


@dataclass(frozen=True, eq=False)
class RegWeightSet:
    offsets: OffsetSet
    spatial: tuple[float, ...]
    shared: np.ndarray
    maps: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        shared = as_grid(self.shared, "shared weight map")
        spatial = tuple(float(w) for w in self.spatial)
        if len(spatial) != len(self.offsets):
            raise DimensionError(f"{len(spatial)} spatial weights for {len(self.offsets)} offsets")
        maps = np.stack([w * shared for w in spatial])
        if not (np.all(maps > 0) and np.all(maps <= 1)):
            raise RangeError("regularization weights must lie in (0, 1]")
        object.__setattr__(self, "spatial", spatial)
        object.__setattr__(self, "shared", frozen(shared))
        object.__setattr__(self, "maps", frozen(maps))

    @classmethod
    def uniform(cls, offsets: OffsetSet, shape: tuple[int, int], spatial: Sequence[float] | None = None):
        spatial = [1.0] * len(offsets) if spatial is None else spatial
        return cls(offsets, tuple(spatial), np.ones(shape))

    @property
    def shape(self) -> tuple[int, int]:
        return self.shared.shape


@dataclass
class CuCounter:
    """Counts full stacked passes: one forward CU = all A_k plus all S_d, one adjoint CU likewise."""

    forward_cu: int = 0
    adjoint_cu: int = 0
    _paused: int = field(default=0, repr=False)

    @property
    def total(self) -> int:
        return self.forward_cu + self.adjoint_cu

    def add_forward(self, n: int = 1):
        if not self._paused:
            self.forward_cu += n

    def add_adjoint(self, n: int = 1):
        if not self._paused:
            self.adjoint_cu += n

    @contextmanager
    def paused(self):
        self._paused += 1
        try:
            yield self
        finally:
            self._paused -= 1


# point spread functions


def gaussian_psf(zeta: int) -> BlurKernel:
    if zeta < 2:
        raise RangeError(f"gaussian PSF needs scale >= 2, got {zeta}; use BlurKernel.identity()")
    sigma = 0.25 * math.sqrt(zeta * zeta - 1)
    radius = math.ceil(3 * sigma)
    u = np.arange(-radius, radius + 1)
    g = np.exp(-(u[:, None] ** 2 + u[None, :] ** 2) / (2 * sigma * sigma))
    return BlurKernel(g / g.sum())


def default_kernel(zeta: int) -> BlurKernel:
    return BlurKernel.identity() if zeta == 1 else gaussian_psf(zeta)


def motion_kernel(length: float, angle: float = 45.0) -> BlurKernel:
    """Linear motion blur of ``length`` pixels at ``angle`` degrees (counter-clockwise from +x)."""
    if length <= 0:
        raise RangeError(f"motion length must be positive, got {length}")
    radius = max(1, math.ceil(length / 2))
    size = 2 * radius + 1
    taps = np.zeros((size, size))
    t = np.linspace(-length / 2, length / 2, 8 * size + 1)
    cols = radius + t * math.cos(math.radians(angle))
    rows = radius - t * math.sin(math.radians(angle))
    r0, c0 = np.floor(rows).astype(int), np.floor(cols).astype(int)
    fr, fc = rows - r0, cols - c0
    for dr, dc, w in ((0, 0, (1 - fr) * (1 - fc)), (0, 1, (1 - fr) * fc), (1, 0, fr * (1 - fc)), (1, 1, fr * fc)):
        rr, cc = np.clip(r0 + dr, 0, size - 1), np.clip(c0 + dc, 0, size - 1)
        np.add.at(taps, (rr, cc), w)
    return BlurKernel.from_taps(taps)


# sampling


def downsample(x: ImageGrid, zeta: int) -> ImageGrid:
    x = as_grid(x)
    if x.shape[0] % zeta or x.shape[1] % zeta:
        raise DimensionError(f"image shape {x.shape} is not divisible by scale {zeta}")
    return x[::zeta, ::zeta].copy()


def downsample_adjoint(y: ImageGrid, zeta: int) -> ImageGrid:
    y = as_grid(y)
    out = np.zeros((y.shape[0] * zeta, y.shape[1] * zeta))
    out[::zeta, ::zeta] = y
    return out


# blur


def _check_kernel_fits(x: np.ndarray, kernel: BlurKernel):
    if kernel.radius >= min(x.shape):
        raise DimensionError(f"kernel radius {kernel.radius} too large for image {x.shape}")


def blur(x: ImageGrid, kernel: BlurKernel) -> ImageGrid:
    x = as_grid(x)
    _check_kernel_fits(x, kernel)
    if kernel.radius == 0:
        return x * kernel.taps[0, 0]
    return ndimage.convolve(x, kernel.taps, mode="constant", cval=0.0)


def blur_adjoint(y: ImageGrid, kernel: BlurKernel) -> ImageGrid:
    y = as_grid(y)
    _check_kernel_fits(y, kernel)
    if kernel.radius == 0:
        return y * kernel.taps[0, 0]
    # point-symmetric taps: the transpose is the blur itself
    if kernel.is_symmetric:
        return ndimage.convolve(y, kernel.taps, mode="constant", cval=0.0)
    return ndimage.correlate(y, kernel.taps, mode="constant", cval=0.0)


# warping


@dataclass(frozen=True, eq=False)
class WarpTaps:
    """Bilinear gather weights: ``out.flat[i] = sum_t weights[t, i] * x.flat[index[t, i]]``."""

    shape: tuple[int, int]
    index: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, disparity: ImageGrid, delta: tuple[float, float]) -> WarpTaps:
        h, w = disparity.shape
        d_rho, d_tau = delta
        rows, cols = np.mgrid[0:h, 0:w].astype(np.float64)
        # replicate border: clamping the sample coordinate is equivalent for bilinear taps
        r = np.clip(rows + d_tau * disparity, 0, h - 1)
        c = np.clip(cols + d_rho * disparity, 0, w - 1)
        r0, c0 = np.floor(r).astype(np.int64), np.floor(c).astype(np.int64)
        r1, c1 = np.minimum(r0 + 1, h - 1), np.minimum(c0 + 1, w - 1)
        fr, fc = r - r0, c - c0
        index = np.stack([r0 * w + c0, r0 * w + c1, r1 * w + c0, r1 * w + c1]).reshape(4, -1)
        weights = np.stack([(1 - fr) * (1 - fc), (1 - fr) * fc, fr * (1 - fc), fr * fc]).reshape(4, -1)
        index.setflags(write=False)
        weights.setflags(write=False)
        return cls((h, w), index, weights)

    def gather(self, x: np.ndarray) -> np.ndarray:
        flat = x.ravel()
        return np.sum(self.weights * flat[self.index], axis=0).reshape(self.shape)

    def scatter(self, y: np.ndarray) -> np.ndarray:
        vals = self.weights * y.ravel()[None, :]
        n = self.shape[0] * self.shape[1]
        return np.bincount(self.index.ravel(), weights=vals.ravel(), minlength=n).reshape(self.shape)


def warp(x: ImageGrid, disparity: ImageGrid, delta: tuple[float, float]) -> ImageGrid:
    """Backward-sample ``x`` at ``z + delta * disparity(z)``; ``delta = (d_rho, d_tau)``."""
    x, disparity = as_grid(x), as_grid(disparity, "disparity map")
    check_same_shape(x, disparity, "image and disparity map")
    if delta[0] == 0 and delta[1] == 0:
        return x.copy()
    return WarpTaps.build(disparity, delta).gather(x)


def warp_adjoint(
    y: ImageGrid,
    disparity: ImageGrid,
    delta: tuple[float, float],
    mode: AdjointMode = "exact",
    reference_disparity: ImageGrid | None = None,
) -> ImageGrid:
    """Transpose of :func:`warp`.

    ``exact`` splats ``y`` back along the bilinear taps. ``reverse`` approximates the
    transpose by the reverse warp driven by the reference-view disparity.
    """
    y, disparity = as_grid(y), as_grid(disparity, "disparity map")
    check_same_shape(y, disparity, "image and disparity map")
    mode = resolve_adjoint_mode(mode)
    if delta[0] == 0 and delta[1] == 0:
        return y.copy()
    if mode == "reverse":
        ref = disparity if reference_disparity is None else as_grid(reference_disparity, "disparity map")
        return warp(y, ref, (-delta[0], -delta[1]))
    return WarpTaps.build(disparity, delta).scatter(y)


# regularization stencil


def _shift_index(shape: tuple[int, int], offset: tuple[int, int]) -> np.ndarray:
    h, w = shape
    dx, dy = offset
    rows = np.clip(np.arange(h) + dy, 0, h - 1)
    cols = np.clip(np.arange(w) + dx, 0, w - 1)
    return rows[:, None] * w + cols[None, :]


def apply_S(x: ImageGrid, weights: RegWeightSet) -> np.ndarray:  # noqa: N802
    """Weighted differences ``W_d * (x(z) - x(z + d))`` stacked over offsets, replicate border."""
    x = as_grid(x)
    check_same_shape(x, weights.shared, "image and weight maps")
    flat = x.ravel()
    out = np.empty((len(weights.offsets),) + x.shape)
    for i, d in enumerate(weights.offsets):
        out[i] = weights.maps[i] * (x - flat[_shift_index(x.shape, d)])
    return out


def apply_S_adjoint(g: Sequence[ImageGrid] | np.ndarray, weights: RegWeightSet) -> ImageGrid:  # noqa: N802
    shape = weights.shape
    n = shape[0] * shape[1]
    if len(g) != len(weights.offsets):
        raise DimensionError(f"{len(g)} gradient images for {len(weights.offsets)} offsets")
    out = np.zeros(shape)
    for i, d in enumerate(weights.offsets):
        t = weights.maps[i] * as_grid(g[i])
        out += t
        out -= np.bincount(_shift_index(shape, d).ravel(), weights=t.ravel(), minlength=n).reshape(shape)
    return out


# stacked model


class ForwardModel:
    """Degradation model ``A_k = D B W_k`` over one light-field stack, plus the regularizer stencil.

    Only the fused passes (:meth:`forward`, :meth:`adjoint`, :meth:`normal`) advance
    :attr:`counter`.
    """

    def __init__(
        self,
        stack: LightFieldStack,
        kernel: BlurKernel,
        adjoint_mode: AdjointMode = "exact",
        counter: CuCounter | None = None,
    ):
        self.stack = stack
        self.kernel = kernel
        self.zeta = stack.scale
        self.adjoint_mode = resolve_adjoint_mode(adjoint_mode)
        self.counter = counter if counter is not None else CuCounter()
        self.hr_shape = stack.dims.hr_shape
        self.lr_shape = stack.dims.lr_shape
        _check_kernel_fits(np.empty(self.hr_shape), kernel)

        self._deltas = [stack.offset(k) for k in range(len(stack))]
        self._taps = [
            None if d == (0.0, 0.0) else WarpTaps.build(v.disparity, d) for v, d in zip(stack.views, self._deltas)
        ]
        self._observations = np.stack(stack.observations)
        logger.debug("forward model: %d views, scale %d, kernel radius %d", len(stack), self.zeta, kernel.radius)

    @property
    def observations(self) -> np.ndarray:
        return self._observations

    def _warp(self, k: int, x: np.ndarray) -> np.ndarray:
        taps = self._taps[k]
        return x if taps is None else taps.gather(x)

    def _warp_adjoint(self, k: int, y: np.ndarray) -> np.ndarray:
        taps = self._taps[k]
        if taps is None:
            return y
        if self.adjoint_mode == "exact":
            return taps.scatter(y)
        d_rho, d_tau = self._deltas[k]
        return warp(y, self.stack.reference_view.disparity, (-d_rho, -d_tau))

    def apply_A(self, x: np.ndarray) -> np.ndarray:  # noqa: N802
        return np.stack(
            [downsample(blur(self._warp(k, x), self.kernel), self.zeta) for k in range(len(self.stack))]
        )

    def apply_A_adjoint(self, r: Sequence[np.ndarray] | np.ndarray) -> np.ndarray:  # noqa: N802
        if len(r) != len(self.stack):
            raise DimensionError(f"{len(r)} residual images for {len(self.stack)} views")
        out = np.zeros(self.hr_shape)
        for k in range(len(self.stack)):
            rk = as_grid(r[k], "residual")
            if rk.shape != self.lr_shape:
                raise DimensionError(f"residual {k} has shape {rk.shape}, expected {self.lr_shape}")
            out += self._warp_adjoint(k, blur_adjoint(downsample_adjoint(rk, self.zeta), self.kernel))
        return out

    def forward(self, x: ImageGrid, weights: RegWeightSet | None) -> tuple[np.ndarray, np.ndarray]:
        """One forward CU: ``(A x, S x)``; ``S x`` is empty without weights."""
        x = as_grid(x)
        if x.shape != self.hr_shape:
            raise DimensionError(f"HR estimate has shape {x.shape}, expected {self.hr_shape}")
        ax = self.apply_A(x)
        sx = apply_S(x, weights) if weights is not None else np.zeros((0,) + self.hr_shape)
        self.counter.add_forward()
        return ax, sx

    def adjoint(self, ra, rs, weights: RegWeightSet | None) -> np.ndarray:
        """One adjoint CU: ``A^T ra + S^T rs``."""
        out = self.apply_A_adjoint(ra)
        if weights is not None:
            out = out + apply_S_adjoint(rs, weights)
        self.counter.add_adjoint()
        return out

    def normal(self, x: ImageGrid, weights: RegWeightSet | None, coeff_a: float, coeff_s: float) -> np.ndarray:
        """``coeff_a * A^T A x + coeff_s * S^T S x`` in one forward and one adjoint pass."""
        ax, sx = self.forward(x, weights)
        return self.adjoint(coeff_a * ax, coeff_s * sx, weights)


def normal_coefficients(lambda1: float, lambda2: float, theta: float) -> tuple[float, float]:
    return lambda2 + 0.5 * theta * lambda1 * lambda1, 0.5 * theta


def apply_A(  # noqa: N802
    x: ImageGrid,
    stack: LightFieldStack,
    zeta: int,
    kernel: BlurKernel,
    counter: CuCounter | None = None,
) -> np.ndarray:
    if zeta != stack.scale:
        raise DimensionError(f"scale {zeta} does not match stack scale {stack.scale}")
    model = ForwardModel(stack, kernel, counter=counter)
    out = model.apply_A(as_grid(x))
    model.counter.add_forward()
    return out


def apply_A_adjoint(  # noqa: N802
    r: Sequence[ImageGrid] | np.ndarray,
    stack: LightFieldStack,
    zeta: int,
    kernel: BlurKernel,
    mode: AdjointMode = "exact",
    counter: CuCounter | None = None,
) -> ImageGrid:
    if zeta != stack.scale:
        raise DimensionError(f"scale {zeta} does not match stack scale {stack.scale}")
    model = ForwardModel(stack, kernel, adjoint_mode=mode, counter=counter)
    out = model.apply_A_adjoint(r)
    model.counter.add_adjoint()
    return out


def apply_normal(
    x: ImageGrid,
    model: ForwardModel,
    weights: RegWeightSet | None,
    lambda1: float,
    lambda2: float,
    theta: float,
) -> ImageGrid:
    """``G^T G x = (lambda2 + theta/2 lambda1^2) A^T A x + (theta/2) S^T S x``."""
    coeff_a, coeff_s = normal_coefficients(lambda1, lambda2, theta)
    return model.normal(x, weights, coeff_a, coeff_s)


def estimate_lipschitz(model: ForwardModel, lambda2: float, n_iter: int = 50, seed: int = 0) -> float:
    """Largest eigenvalue of ``2 lambda2 A^T A`` by power iteration; not counted as CU."""
    rng = np.random.Generator(np.random.Philox(seed))
    v = rng.standard_normal(model.hr_shape)
    v /= np.linalg.norm(v)
    eig = 0.0
    with model.counter.paused():
        for _ in range(n_iter):
            u = model.apply_A_adjoint(model.apply_A(v))
            eig = float(np.vdot(v, u))
            norm = np.linalg.norm(u)
            if norm == 0:
                return 0.0
            v = u / norm
    return 2.0 * lambda2 * eig
