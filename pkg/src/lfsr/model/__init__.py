from lfsr.model.baselines import GradientDescentSolver, gd_solve
from lfsr.model.lightfield import (
    ColorImage,
    Dimensions,
    LightFieldStack,
    PerspectiveIndex,
    View,
    bicubic_resample,
    rgb_from_ycbcr,
    select_views,
    ycbcr_from_rgb,
)
from lfsr.model.operators import BlurKernel, CuCounter, ForwardModel, OffsetSet, RegWeightSet, gaussian_psf
from lfsr.model.solver import AdmmSolver, SolverConfig, admm_solve, cost, prox_l1, xstep_cg
from lfsr.model.trace import ConvergenceTrace
from lfsr.model.weights import WeightParams, assemble_weights


__all__ = [
    "AdmmSolver",
    "GradientDescentSolver",
    "SolverConfig",
    "WeightParams",
    "ConvergenceTrace",
    "ForwardModel",
    "CuCounter",
    "BlurKernel",
    "OffsetSet",
    "RegWeightSet",
    "LightFieldStack",
    "View",
    "PerspectiveIndex",
    "Dimensions",
    "ColorImage",
    "admm_solve",
    "gd_solve",
    "cost",
    "prox_l1",
    "xstep_cg",
    "assemble_weights",
    "gaussian_psf",
    "bicubic_resample",
    "select_views",
    "ycbcr_from_rgb",
    "rgb_from_ycbcr",
]
