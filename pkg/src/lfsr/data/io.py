"""Image and light-field stack IO.

PGM/PPM go through Pillow; PFM (little-endian float32, rows stored bottom to
top) is read and written with numpy. A stack directory holds
``view_{row}_{col}.pgm|ppm``, ``disp_{row}_{col}.pfm`` and a TOML manifest
``stack.txt``.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import tomli
from PIL import Image, UnidentifiedImageError

from lfsr.model.lightfield import ColorImage, LightFieldStack, PerspectiveIndex, View, rgb_from_ycbcr, to_luma
from lfsr.model.operators import BlurKernel
from lfsr.model.utils import StackFormatError, as_grid


logger = logging.getLogger(__name__)

MANIFEST = "stack.txt"
KERNEL_FILE = "kernel.pfm"


# PNM


def read_image(path: str | os.PathLike) -> ColorImage | np.ndarray:
    """Load a PGM as a 2-D grid or a PPM as an rgb :class:`ColorImage`, scaled to [0, 1]."""
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            data = np.asarray(img)
    except (UnidentifiedImageError, OSError) as e:
        raise StackFormatError(f"cannot read image {path}: {e}") from e
    if mode == "L":
        return data.astype(np.float64) / 255.0
    if mode in ("I", "I;16", "I;16B"):
        return data.astype(np.float64) / 65535.0
    if mode == "RGB":
        return ColorImage(np.moveaxis(data.astype(np.float64) / 255.0, -1, 0), "rgb")
    raise StackFormatError(f"{path}: unsupported image mode {mode}")


def _quantize(x: np.ndarray, maxval: int, dtype) -> np.ndarray:
    return np.round(np.clip(x, 0.0, 1.0) * maxval).astype(dtype)


def write_image(path: str | os.PathLike, image: ColorImage | np.ndarray, bit_depth: int = 8):
    """Write a grid as binary PGM (8 or 16 bit) or a colour image as 8-bit PPM."""
    if isinstance(image, ColorImage):
        if bit_depth != 8:
            raise ValueError("colour images are written as 8-bit PPM only")
        rgb = image if image.space == "rgb" else rgb_from_ycbcr(image)
        pil = Image.fromarray(np.moveaxis(_quantize(rgb.channels, 255, np.uint8), 0, -1), mode="RGB")
    elif bit_depth == 8:
        pil = Image.fromarray(_quantize(as_grid(image), 255, np.uint8), mode="L")
    elif bit_depth == 16:
        pil = Image.fromarray(_quantize(as_grid(image), 65535, np.uint16))
    else:
        raise ValueError(f"bit depth must be 8 or 16, got {bit_depth}")
    pil.save(path, format="PPM")


# PFM


def write_pfm(path: str | os.PathLike, data: np.ndarray | ColorImage):
    if isinstance(data, ColorImage):
        arr, tag = np.moveaxis(data.channels, 0, -1), b"PF"
    else:
        arr, tag = as_grid(data), b"Pf"
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(tag + b"\n" + f"{w} {h}\n".encode() + b"-1.0\n")
        f.write(np.ascontiguousarray(np.flipud(arr), dtype="<f4").tobytes())


def read_pfm(path: str | os.PathLike) -> np.ndarray:
    """Return a float64 ``(H, W)`` or ``(H, W, 3)`` array, top row first."""
    try:
        with open(path, "rb") as f:
            tag = f.readline().strip()
            dims = f.readline().split()
            scale_line = f.readline().strip()
            payload = f.read()
    except OSError as e:
        raise StackFormatError(f"cannot read PFM {path}: {e}") from e
    if tag not in (b"Pf", b"PF") or len(dims) != 2:
        raise StackFormatError(f"{path}: not a PFM file")
    try:
        w, h = int(dims[0]), int(dims[1])
        scale = float(scale_line)
    except ValueError as e:
        raise StackFormatError(f"{path}: malformed PFM header: {e}") from e
    if w <= 0 or h <= 0 or scale == 0 or not np.isfinite(scale):
        raise StackFormatError(f"{path}: malformed PFM header")
    channels = 3 if tag == b"PF" else 1
    dtype = "<f4" if scale < 0 else ">f4"
    count = w * h * channels
    if len(payload) < 4 * count:
        raise StackFormatError(f"{path}: truncated PFM payload")
    arr = np.frombuffer(payload, dtype=dtype, count=count).astype(np.float64)
    arr = arr.reshape((h, w, channels) if channels == 3 else (h, w))
    return np.flipud(arr).copy()


# stacks


@dataclass(frozen=True, eq=False)
class StackRecord:
    stack: LightFieldStack
    grid: int
    pattern: str
    positions: tuple[tuple[int, int], ...]
    reference_color: ColorImage | None = None
    kernel: BlurKernel | None = None


def view_name(row: int, col: int, color: bool) -> str:
    return f"view_{row}_{col}.{'ppm' if color else 'pgm'}"


def disparity_name(row: int, col: int) -> str:
    return f"disp_{row}_{col}.pfm"


def write_stack(
    out_dir: str | os.PathLike,
    stack: LightFieldStack,
    grid: int,
    pattern: str,
    color_views: list[ColorImage] | None = None,
    kernel: BlurKernel | None = None,
    bit_depth: int = 8,
):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    radius = (grid - 1) // 2
    positions = [v.theta.grid_position(radius) for v in stack.views]
    for k, (view, (row, col)) in enumerate(zip(stack.views, positions)):
        image = color_views[k] if color_views is not None else view.image
        write_image(out_dir / view_name(row, col, color_views is not None), image, bit_depth=bit_depth)
        write_pfm(out_dir / disparity_name(row, col), view.disparity)
    if kernel is not None:
        write_pfm(out_dir / KERNEL_FILE, kernel.taps)

    lines = [
        f"grid = {grid}",
        f'pattern = "{pattern}"',
        f"scale = {stack.scale}",
        f"reference = {stack.reference}",
        f"color = {'true' if color_views is not None else 'false'}",
        "views = [" + ", ".join(f"[{r}, {c}]" for r, c in positions) + "]",
    ]
    if kernel is not None:
        lines.append(f'kernel = "{KERNEL_FILE}"')
    (out_dir / MANIFEST).write_text("\n".join(lines) + "\n")
    logger.info("wrote %d views to %s", len(stack), out_dir)


def read_stack(stack_dir: str | os.PathLike) -> StackRecord:
    stack_dir = Path(stack_dir)
    manifest_path = stack_dir / MANIFEST
    try:
        with open(manifest_path, "rb") as f:
            manifest = tomli.load(f)
    except tomli.TOMLDecodeError as e:
        raise StackFormatError(f"{manifest_path}: {e}") from e
    except OSError as e:
        raise StackFormatError(f"cannot read stack manifest {manifest_path}: {e}") from e

    missing = [key for key in ("grid", "scale", "reference", "views") if key not in manifest]
    if missing:
        raise StackFormatError(f"{manifest_path}: missing keys {missing}")
    try:
        grid = int(manifest["grid"])
        radius = (grid - 1) // 2
        color = bool(manifest.get("color", False))
        positions = tuple((int(r), int(c)) for r, c in manifest["views"])
    except (TypeError, ValueError) as e:
        raise StackFormatError(f"{manifest_path}: malformed entry ({e})") from e

    views, color_views = [], []
    for row, col in positions:
        image = read_image(stack_dir / view_name(row, col, color))
        if color:
            if not isinstance(image, ColorImage):
                raise StackFormatError(f"view ({row}, {col}) is not a colour image")
            color_views.append(image)
        theta = PerspectiveIndex(rho=float(col - radius), tau=float(row - radius))
        views.append(View(to_luma(image), theta, read_pfm(stack_dir / disparity_name(row, col))))

    kernel = None
    if "kernel" in manifest:
        kernel = BlurKernel.from_taps(read_pfm(stack_dir / manifest["kernel"]))

    try:
        stack = LightFieldStack(tuple(views), int(manifest["reference"]), int(manifest["scale"]))
    except ValueError as e:
        raise StackFormatError(f"{manifest_path}: inconsistent stack ({e})") from e
    reference_color = color_views[stack.reference] if color else None
    return StackRecord(
        stack=stack,
        grid=grid,
        pattern=str(manifest.get("pattern", "full")),
        positions=positions,
        reference_color=reference_color,
        kernel=kernel,
    )
