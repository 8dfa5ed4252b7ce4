"""Synthetic ground-truth scenes: textured colour image plus a matching disparity map."""

from __future__ import annotations

import numpy as np

from lfsr.model.lightfield import ColorImage
from lfsr.model.utils import DimensionError


# 5x5 block glyphs
GLYPHS = {
    "L": ["10000", "10000", "10000", "10000", "11111"],
    "F": ["11111", "10000", "11110", "10000", "10000"],
    "S": ["01111", "10000", "01110", "00001", "11110"],
    "R": ["11110", "10001", "11110", "10100", "10011"],
}

BACKGROUND_DISPARITY = (0.75, 1.25)
FOREGROUND_DISPARITY = 1.5


def _stamp_glyph(canvas: np.ndarray, glyph: str, top: int, left: int, cell: int, value: float):
    for i, row in enumerate(GLYPHS[glyph]):
        for j, bit in enumerate(row):
            if bit == "1":
                canvas[top + i * cell : top + (i + 1) * cell, left + j * cell : left + (j + 1) * cell] = value


def generate_scene(size: int = 64, seed: int = 0) -> tuple[ColorImage, np.ndarray]:
    """Checkerboard background on a tilted disparity plane, with ramps, disks, glyphs and a near disk."""
    if size < 16:
        raise DimensionError(f"scene size must be at least 16, got {size}")
    rng = np.random.Generator(np.random.Philox(seed))
    yy, xx = np.mgrid[0:size, 0:size] / size
    cell = max(2, size // 8)

    checker = (((np.arange(size)[:, None] // cell) + (np.arange(size)[None, :] // cell)) % 2) * 0.4 + 0.3
    rgb = np.stack([checker, 0.8 * checker + 0.1, 0.6 * checker + 0.2])

    # horizontal and vertical ramps
    band = slice(size // 10, size // 4)
    rgb[:, band, :] = np.stack([xx[band], 1.0 - xx[band], 0.5 + 0.4 * (xx[band] - 0.5)])
    rgb[:, :, band] = np.stack([0.2 + 0.6 * yy[:, band], 0.5 * np.ones_like(yy[:, band]), yy[:, band]])

    for _ in range(3):
        cy, cx = rng.uniform(0.2, 0.8, size=2)
        radius = rng.uniform(0.06, 0.12)
        colour = rng.uniform(0.05, 0.95, size=3)
        mask = (yy - cy) ** 2 + (xx - cx) ** 2 < radius**2
        rgb[:, mask] = colour[:, None]

    glyph_cell = max(1, size // 32)
    top = size - 6 * glyph_cell - 2
    for i, glyph in enumerate("LFSR"):
        left = 2 + i * 6 * glyph_cell
        if left + 5 * glyph_cell < size:
            value = 0.05 if i % 2 == 0 else 0.95
            for c in range(3):
                _stamp_glyph(rgb[c], glyph, top, left, glyph_cell, value)

    disparity = BACKGROUND_DISPARITY[0] + (BACKGROUND_DISPARITY[1] - BACKGROUND_DISPARITY[0]) * xx

    # near disk with stripes, in front of everything else
    cy, cx = rng.uniform(0.4, 0.6, size=2)
    near = (yy - cy) ** 2 + (xx - cx) ** 2 < 0.18**2
    stripes = 0.5 + 0.35 * np.sign(np.sin(2 * np.pi * (xx + yy) * size / (2 * cell)))
    rgb[0, near] = stripes[near]
    rgb[1, near] = 0.3
    rgb[2, near] = 1.0 - stripes[near]
    disparity[near] = FOREGROUND_DISPARITY

    return ColorImage(np.clip(rgb, 0.0, 1.0), "rgb"), disparity
