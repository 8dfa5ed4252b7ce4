from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from skimage.metrics import structural_similarity

from lfsr.model.utils import DimensionError, RangeError, as_grid, check_same_shape


DEFAULT_CROP = 8
SSIM_WINDOW = 11


@dataclass(frozen=True)
class QualityReport:
    psnr: float
    ssim: float
    crop_border: int

    def as_csv(self) -> str:
        psnr = "inf" if math.isinf(self.psnr) else f"{self.psnr:.6f}"
        ssim = "1.0" if self.ssim == 1.0 else f"{self.ssim:.6f}"
        return f"{psnr},{ssim}"


def _cropped_pair(a, b, crop: int) -> tuple[np.ndarray, np.ndarray]:
    a, b = as_grid(a), as_grid(b)
    check_same_shape(a, b)
    if crop < 0:
        raise RangeError(f"crop must be >= 0, got {crop}")
    if crop:
        if 2 * crop >= min(a.shape):
            raise DimensionError(f"crop {crop} leaves nothing of a {a.shape} image")
        a, b = a[crop:-crop, crop:-crop], b[crop:-crop, crop:-crop]
    return a, b


def psnr(a, b, crop: int = DEFAULT_CROP) -> float:
    """PSNR in dB for intensities in [0, 1]; ``inf`` for identical images."""
    a, b = _cropped_pair(a, b, crop)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim(a, b, crop: int = DEFAULT_CROP) -> float:
    a, b = _cropped_pair(a, b, crop)
    if min(a.shape) < SSIM_WINDOW:
        raise DimensionError(f"SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {a.shape}")
    # win_size follows from sigma (truncate 3.5 -> 11 taps)
    return float(
        structural_similarity(
            a,
            b,
            data_range=1.0,
            gaussian_weights=True,
            sigma=1.5,
            use_sample_covariance=False,
            K1=0.01,
            K2=0.03,
        )
    )


def evaluate(a, b, crop: int = DEFAULT_CROP) -> QualityReport:
    return QualityReport(psnr=psnr(a, b, crop), ssim=ssim(a, b, crop), crop_border=crop)
