from __future__ import annotations

import numpy as np


# errors


class DimensionError(ValueError):
    """Shape or divisibility mismatch between images, maps or operators."""


class RangeError(ValueError):
    """A parameter lies outside its allowed range."""


class ConfigError(ValueError):
    """Missing, unknown or inconsistent configuration keys."""


class StackFormatError(OSError):
    """Malformed on-disk stack directory or image file."""


class SolverDivergedError(RuntimeError):
    def __init__(self, iteration: int, what: str):
        super().__init__(f"solver diverged at iteration {iteration}: non-finite values in {what}")
        self.iteration = iteration
        self.what = what


# helpers


def exists(v):
    return v is not None


def default(v, d):
    return v if exists(v) else d


def as_grid(x, name: str = "image") -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name} is empty")
    return arr


def check_same_shape(a: np.ndarray, b: np.ndarray, what: str = "images"):
    if a.shape != b.shape:
        raise DimensionError(f"{what} differ in shape: {a.shape} vs {b.shape}")


def check_finite(x: np.ndarray, iteration: int, what: str):
    if not np.all(np.isfinite(x)):
        raise SolverDivergedError(iteration, what)


def frozen(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=np.float64, copy=True)
    x.setflags(write=False)
    return x
