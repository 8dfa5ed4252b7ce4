"""Light-field containers, colour handling and resampling primitives.

All images are ``float64`` arrays in row-major ``(height, width)`` layout with a
nominal intensity range of ``[0, 1]``. Containers freeze their arrays on
construction so they can be shared between worker threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Literal, Sequence

import numpy as np

from lfsr.model.utils import DimensionError, RangeError, as_grid, frozen


ImageGrid = np.ndarray
DisparityMap = np.ndarray

SUPPORTED_SCALES = (1, 2, 3, 4)
VIEW_PATTERNS = ("full", "star", "cross", "row")


# geometry


@dataclass(frozen=True)
class Dimensions:
    s_x: int
    s_y: int
    zeta: int

    def __post_init__(self):
        if self.zeta not in SUPPORTED_SCALES:
            raise RangeError(f"scale factor must be one of {SUPPORTED_SCALES}, got {self.zeta}")
        if self.s_x <= 0 or self.s_y <= 0:
            raise DimensionError(f"LR size must be positive, got {self.s_x}x{self.s_y}")

    @classmethod
    def from_hr(cls, hr_shape: tuple[int, int], zeta: int) -> Dimensions:
        h, w = hr_shape
        if h % zeta or w % zeta:
            raise DimensionError(f"HR size {w}x{h} is not divisible by scale {zeta}")
        return cls(s_x=w // zeta, s_y=h // zeta, zeta=zeta)

    @property
    def s_X(self) -> int:  # noqa: N802
        return self.zeta * self.s_x

    @property
    def s_Y(self) -> int:  # noqa: N802
        return self.zeta * self.s_y

    @property
    def p(self) -> int:
        return self.s_X * self.s_Y

    @property
    def q(self) -> int:
        return self.s_x * self.s_y

    @property
    def lr_shape(self) -> tuple[int, int]:
        return (self.s_y, self.s_x)

    @property
    def hr_shape(self) -> tuple[int, int]:
        return (self.s_Y, self.s_X)


@dataclass(frozen=True)
class PerspectiveIndex:
    """Angular position of a view in baseline steps: ``rho`` horizontal, ``tau`` vertical."""

    rho: float
    tau: float

    def __post_init__(self):
        if not (np.isfinite(self.rho) and np.isfinite(self.tau)):
            raise RangeError(f"perspective coordinates must be finite, got ({self.rho}, {self.tau})")

    def __sub__(self, other: PerspectiveIndex) -> tuple[float, float]:
        return (self.rho - other.rho, self.tau - other.tau)

    def grid_position(self, radius: int) -> tuple[int, int]:
        return (int(round(self.tau)) + radius, int(round(self.rho)) + radius)


@dataclass(frozen=True, eq=False)
class View:
    image: ImageGrid
    theta: PerspectiveIndex
    disparity: DisparityMap

    def __post_init__(self):
        object.__setattr__(self, "image", frozen(as_grid(self.image, "view image")))
        object.__setattr__(self, "disparity", frozen(as_grid(self.disparity, "disparity map")))
        if not np.all(np.isfinite(self.disparity)):
            raise RangeError("disparity map contains non-finite values")


@dataclass(frozen=True, eq=False)
class LightFieldStack:
    views: tuple[View, ...]
    reference: int
    scale: int
    dims: Dimensions = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "views", tuple(self.views))
        if len(self.views) < 1:
            raise DimensionError("a light-field stack needs at least one view")
        if not 0 <= self.reference < len(self.views):
            raise RangeError(f"reference index {self.reference} outside 0..{len(self.views) - 1}")
        lr_shape = self.views[0].image.shape
        hr_shape = self.views[0].disparity.shape
        for k, view in enumerate(self.views):
            if view.image.shape != lr_shape:
                raise DimensionError(f"view {k} has LR shape {view.image.shape}, expected {lr_shape}")
            if view.disparity.shape != hr_shape:
                raise DimensionError(f"disparity {k} has shape {view.disparity.shape}, expected {hr_shape}")
        dims = Dimensions(s_x=lr_shape[1], s_y=lr_shape[0], zeta=self.scale)
        if dims.hr_shape != hr_shape:
            raise DimensionError(f"disparity shape {hr_shape} does not match LR {lr_shape} at scale {self.scale}")
        object.__setattr__(self, "dims", dims)

    def __len__(self):
        return len(self.views)

    @property
    def reference_view(self) -> View:
        return self.views[self.reference]

    @property
    def theta0(self) -> PerspectiveIndex:
        return self.reference_view.theta

    def offset(self, k: int) -> tuple[float, float]:
        return self.views[k].theta - self.theta0

    @property
    def observations(self) -> list[ImageGrid]:
        return [v.image for v in self.views]


# colour


ColorSpace = Literal["rgb", "ycbcr"]

# ITU-R BT.601, full range
_RGB_TO_YCBCR = np.array(
    [
        [0.299, 0.587, 0.114],
        [-0.168736, -0.331264, 0.5],
        [0.5, -0.418688, -0.081312],
    ]
)
_YCBCR_TO_RGB = np.linalg.inv(_RGB_TO_YCBCR)
_CHROMA_OFFSET = np.array([0.0, 0.5, 0.5])


@dataclass(frozen=True, eq=False)
class ColorImage:
    channels: np.ndarray
    space: ColorSpace

    def __post_init__(self):
        if self.space not in ("rgb", "ycbcr"):
            raise ValueError(f"unknown colour space {self.space!r}")
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.ndim != 3 or ch.shape[0] != 3 or ch.shape[1] == 0 or ch.shape[2] == 0:
            raise DimensionError(f"colour image needs shape (3, H, W), got {ch.shape}")
        object.__setattr__(self, "channels", frozen(ch))

    @classmethod
    def from_channels(cls, c0, c1, c2, space: ColorSpace = "rgb") -> ColorImage:
        grids = [as_grid(c, "channel") for c in (c0, c1, c2)]
        if not grids[0].shape == grids[1].shape == grids[2].shape:
            raise DimensionError(f"channel shapes differ: {[g.shape for g in grids]}")
        return cls(np.stack(grids), space)

    @property
    def shape(self) -> tuple[int, int]:
        return self.channels.shape[1:]


def ycbcr_from_rgb(img: ColorImage) -> ColorImage:
    if img.space != "rgb":
        raise ValueError(f"expected an rgb image, got {img.space}")
    out = np.tensordot(_RGB_TO_YCBCR, img.channels, axes=1) + _CHROMA_OFFSET[:, None, None]
    return ColorImage(out, "ycbcr")


def rgb_from_ycbcr(img: ColorImage) -> ColorImage:
    if img.space != "ycbcr":
        raise ValueError(f"expected a ycbcr image, got {img.space}")
    out = np.tensordot(_YCBCR_TO_RGB, img.channels - _CHROMA_OFFSET[:, None, None], axes=1)
    return ColorImage(np.clip(out, 0.0, 1.0), "rgb")


def to_luma(img: ColorImage | ImageGrid) -> ImageGrid:
    if isinstance(img, ColorImage):
        return (img.channels[0] if img.space == "ycbcr" else ycbcr_from_rgb(img).channels[0]).copy()
    return as_grid(img)


def compose_color(y_hr: ImageGrid, reference_lr: ColorImage) -> ColorImage:
    """Combine a solved HR luma with bicubic-upsampled chroma of the LR reference."""
    y_hr = as_grid(y_hr, "luma")
    ycc = reference_lr if reference_lr.space == "ycbcr" else ycbcr_from_rgb(reference_lr)
    h, w = y_hr.shape
    cb = bicubic_resample(ycc.channels[1], w, h)
    cr = bicubic_resample(ycc.channels[2], w, h)
    return rgb_from_ycbcr(ColorImage.from_channels(y_hr, cb, cr, "ycbcr"))


# resampling


def _cubic(s: np.ndarray, a: float = -0.5) -> np.ndarray:
    s = np.abs(s)
    near = (a + 2) * s**3 - (a + 3) * s**2 + 1
    far = a * s**3 - 5 * a * s**2 + 8 * a * s - 4 * a
    return np.where(s <= 1, near, np.where(s < 2, far, 0.0))


@lru_cache(maxsize=64)
def _resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    # top-left aligned: output sample i sits at input coordinate i * n_in / n_out
    src = np.arange(n_out) * (n_in / n_out)
    base = np.floor(src).astype(np.int64)
    frac = src - base
    mat = np.zeros((n_out, n_in))
    rows = np.arange(n_out)
    for tap in (-1, 0, 1, 2):
        idx = np.clip(base + tap, 0, n_in - 1)
        np.add.at(mat, (rows, idx), _cubic(frac - tap))
    mat.setflags(write=False)
    return mat


def bicubic_resample(img: ImageGrid, out_w: int, out_h: int) -> ImageGrid:
    """Catmull-Rom bicubic resampling with replicate borders; no clamping of overshoot."""
    img = as_grid(img)
    if out_w < 1 or out_h < 1:
        raise DimensionError(f"output size must be positive, got {out_w}x{out_h}")
    h, w = img.shape
    return _resample_matrix(h, out_h) @ img @ _resample_matrix(w, out_w).T


def bicubic_upsample(img: ImageGrid, zeta: int) -> ImageGrid:
    h, w = np.shape(img)
    return bicubic_resample(img, w * zeta, h * zeta)


# view selection


def _grid_radius(grid: int | Sequence[int]) -> int:
    if isinstance(grid, (int, np.integer)):
        rows = cols = int(grid)
    else:
        rows, cols = (int(g) for g in grid)
    if rows != cols or rows < 1 or rows % 2 == 0:
        raise DimensionError(f"angular grid must be an odd-sided square, got {rows}x{cols}")
    return (rows - 1) // 2


def select_views(grid: int | Sequence[int], pattern: str = "full", arm: int | None = None) -> list[PerspectiveIndex]:
    """Pick perspectives from a square angular grid centred on the reference view.

    Returned row-major (``tau`` first, then ``rho``); the centre is always included.
    """
    radius = _grid_radius(grid)
    arm = radius if arm is None else arm
    if arm < 0 or arm > radius:
        raise RangeError(f"arm {arm} outside 0..{radius} for a {2 * radius + 1}x{2 * radius + 1} grid")
    if pattern not in VIEW_PATTERNS:
        raise ValueError(f"unknown view pattern {pattern!r}, choose from {VIEW_PATTERNS}")

    picked = []
    for i in range(-radius, radius + 1):
        for j in range(-radius, radius + 1):
            within = max(abs(i), abs(j)) <= arm
            if pattern == "full":
                keep = True
            elif pattern == "star":
                keep = within and (i == 0 or j == 0 or abs(i) == abs(j))
            elif pattern == "cross":
                keep = within and (i == 0 or j == 0)
            else:
                keep = within and i == 0
            if keep:
                picked.append(PerspectiveIndex(rho=float(j), tau=float(i)))
    return picked
