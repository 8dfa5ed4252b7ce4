from lfsr.data.degrade import NoiseParams, degrade_lightfield, degrade_view, prepare_disparity
from lfsr.data.io import read_image, read_pfm, read_stack, write_image, write_pfm, write_stack
from lfsr.data.scene import generate_scene


__all__ = [
    "NoiseParams",
    "degrade_lightfield",
    "degrade_view",
    "prepare_disparity",
    "generate_scene",
    "read_image",
    "write_image",
    "read_pfm",
    "write_pfm",
    "read_stack",
    "write_stack",
]
