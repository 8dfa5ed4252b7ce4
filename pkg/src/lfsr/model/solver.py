"""ADMM super-resolution solver with a conjugate-gradient x-step.

Minimizes

    J(x) = λ1 Σ_k |A_k x - y_k|_1 + λ2 Σ_k |A_k x - y_k|_2^2 + Σ_d |W_d ⊙ (x - S_d x)|_1

by splitting the two L1 terms through ``z = F x - b'`` with ``F = [λ1 A; S]`` and
``b' = [λ1 y; 0]`` and running scaled-dual ADMM (z- and w-updates before the
x-update). Weights are reassembled from the current estimate after every x-step
and stay frozen inside it.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Literal, NamedTuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from tqdm import tqdm

from lfsr.eval import metrics
from lfsr.model.lightfield import ImageGrid, LightFieldStack, bicubic_upsample
from lfsr.model.operators import (
    BlurKernel,
    CuCounter,
    ForwardModel,
    OffsetSet,
    RegWeightSet,
    default_kernel,
    normal_coefficients,
    resolve_adjoint_mode,
)
from lfsr.model.trace import ConvergenceTrace, TraceRow
from lfsr.model.utils import ConfigError, SolverDivergedError, as_grid, check_finite, exists
from lfsr.model.weights import WeightAssembler, WeightParams


logger = logging.getLogger(__name__)

IterationCallback = Callable[[int, np.ndarray, "RegWeightSet | None"], None]


class SolverConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lambda1: float = Field(1.0, ge=0)
    lambda2: float = Field(10.0, ge=0)
    theta: float = Field(1.0, gt=0)
    n_iter: int = Field(10, ge=0)
    cg_iter: int = Field(5, ge=1)
    cg_tol: float | None = Field(None, gt=0)
    adjoint_mode: Literal["exact", "reverse"] = "exact"
    window_radius: int = Field(2, ge=0)
    weights: WeightParams = WeightParams()
    max_cu: int | None = Field(None, ge=1)
    # gradient-descent baselines
    gd_step: float | None = Field(None, ge=0)
    line_search: bool = False
    armijo_c: float = Field(1e-4, gt=0, lt=1)
    max_backtracks: int = Field(30, ge=0)

    @field_validator("adjoint_mode", mode="before")
    @classmethod
    def _adjoint_alias(cls, v):
        return resolve_adjoint_mode(v) if isinstance(v, str) else v

    @model_validator(mode="after")
    def _data_term_present(self):
        if self.lambda1 + self.lambda2 <= 0:
            raise ValueError("lambda1 + lambda2 must be positive")
        return self

    def tolerance(self, p: int) -> float:
        return self.cg_tol if exists(self.cg_tol) else 1e-8 * p

    def offsets(self) -> OffsetSet | None:
        return OffsetSet.window(self.window_radius) if self.window_radius > 0 else None


# cost


class CostTerms(NamedTuple):
    total: float
    data_l1: float
    data_l2: float
    reg: float


def _cost_terms(ax: np.ndarray, sx: np.ndarray, y: np.ndarray, lambda1: float, lambda2: float) -> CostTerms:
    a = ax - y
    data_l1 = float(np.sum(np.abs(a)))
    data_l2 = float(np.sum(a * a))
    reg = float(np.sum(np.abs(sx)))
    return CostTerms(lambda1 * data_l1 + lambda2 * data_l2 + reg, data_l1, data_l2, reg)


def cost(
    x: ImageGrid,
    stack: LightFieldStack,
    cfg: SolverConfig,
    weights: RegWeightSet | None,
    kernel: BlurKernel | None = None,
) -> CostTerms:
    """``J(x)`` and its three components (unscaled ``|.|_1``, ``|.|_2^2`` and regularizer)."""
    model = ForwardModel(stack, kernel or default_kernel(stack.scale), cfg.adjoint_mode)
    with model.counter.paused():
        ax, sx = model.forward(x, weights)
    return _cost_terms(ax, sx, model.observations, cfg.lambda1, cfg.lambda2)


# proximal step


def prox_l1(u: np.ndarray, threshold: float) -> np.ndarray:
    """Soft threshold ``sgn(u) * max(|u| - threshold, 0)``."""
    return np.sign(u) * np.maximum(np.abs(u) - threshold, 0.0)


# x-step


@dataclass
class CgResult:
    x: np.ndarray
    iterations: int
    breakdown: bool = False
    residuals: list[float] = field(default_factory=list)


def xstep_cg(
    v: np.ndarray,
    x_init: np.ndarray,
    model: ForwardModel,
    weights: RegWeightSet | None,
    coeff_a: float,
    coeff_s: float,
    max_iter: int,
    tol: float,
) -> CgResult:
    """Conjugate gradient on ``G^T G x = G^T c`` started at ``x_init`` with residual ``-v``.

    ``v`` is ``G^T G x_init - G^T c``. Iterates while ``<r, r> >= tol`` for at most
    ``max_iter`` steps; each step is one forward and one adjoint pass.
    """
    x = np.array(x_init, dtype=np.float64, copy=True)
    r = -np.asarray(v, dtype=np.float64)
    p = r.copy()
    pi = float(np.vdot(r, r))
    result = CgResult(x=x, iterations=0, residuals=[pi])
    while pi >= tol and result.iterations < max_iter:
        if pi == 0:
            break
        q = model.normal(p, weights, coeff_a, coeff_s)
        curvature = float(np.vdot(p, q))
        alpha = pi / curvature if curvature != 0 else np.inf
        if not np.isfinite(alpha) or curvature < 0:
            logger.warning("cg breakdown after %d steps (p^T G p = %g)", result.iterations, curvature)
            result.breakdown = True
            break
        x += alpha * p
        r -= alpha * q
        pi_next = float(np.vdot(r, r))
        p = r + (pi_next / pi) * p
        pi = pi_next
        result.iterations += 1
        result.residuals.append(pi)
    result.x = x
    return result


# ADMM


@dataclass
class AdmmState:
    """Split variable ``z`` and scaled dual ``w``, each split in a data part and a regularizer part."""

    x: np.ndarray
    z_a: np.ndarray
    z_s: np.ndarray
    w_a: np.ndarray
    w_s: np.ndarray
    n: int = 0


def initial_estimate(stack: LightFieldStack) -> np.ndarray:
    return bicubic_upsample(stack.reference_view.image, stack.scale)


class _TraceRecorder:
    def __init__(self, name: str, counter: CuCounter, gt: np.ndarray | None, psnr_crop: int):
        self.trace = ConvergenceTrace(solver=name)
        self.counter = counter
        self.gt = gt
        self.psnr_crop = psnr_crop
        self.t0 = time.perf_counter()

    def record(self, n: int, x: np.ndarray, terms: CostTerms, cu: int):
        if not np.isfinite(terms.total):
            raise SolverDivergedError(n, "cost")
        quality = metrics.psnr(x, self.gt, self.psnr_crop) if exists(self.gt) else None
        ms = (time.perf_counter() - self.t0) * 1000.0
        self.trace.append(TraceRow(n, terms.total, terms.data_l1, terms.data_l2, terms.reg, cu, quality, ms))


class AdmmSolver:
    name = "admm"

    def __init__(self, cfg: SolverConfig | None = None, **params):
        self.cfg = cfg if cfg is not None else SolverConfig(**params)

    def solve(
        self,
        stack: LightFieldStack,
        x0: ImageGrid | None = None,
        kernel: BlurKernel | None = None,
        gt: ImageGrid | None = None,
        on_iteration: IterationCallback | None = None,
        progress: bool = True,
        psnr_crop: int = 8,
    ) -> tuple[np.ndarray, ConvergenceTrace]:
        cfg = self.cfg
        model = ForwardModel(stack, kernel or default_kernel(stack.scale), cfg.adjoint_mode)
        counter = model.counter
        assemble = WeightAssembler(stack, cfg.offsets(), cfg.weights)
        y = model.observations
        tol = cfg.tolerance(stack.dims.p)
        lam1, lam2, theta = cfg.lambda1, cfg.lambda2, cfg.theta
        coeff_a, coeff_s = normal_coefficients(lam1, lam2, theta)

        x = initial_estimate(stack) if x0 is None else np.array(as_grid(x0, "x0"), copy=True)
        if x.shape != model.hr_shape:
            raise ConfigError(f"x0 has shape {x.shape}, expected {model.hr_shape}")
        check_finite(x, 0, "x0")

        weights = assemble(x)
        n_offsets = 0 if weights is None else len(weights.offsets)
        state = AdmmState(
            x=x,
            z_a=np.zeros_like(y),
            z_s=np.zeros((n_offsets,) + model.hr_shape),
            w_a=np.zeros_like(y),
            w_s=np.zeros((n_offsets,) + model.hr_shape),
        )
        recorder = _TraceRecorder(self.name, counter, gt, psnr_crop)
        if on_iteration is not None:
            on_iteration(0, state.x, weights)

        logger.info(
            "admm: %d views, %s HR, N=%d K=%d theta=%g lambda1=%g lambda2=%g",
            len(stack), model.hr_shape, cfg.n_iter, cfg.cg_iter, theta, lam1, lam2,
        )
        cu_at_x = 0
        for n in tqdm(range(1, cfg.n_iter + 1), desc="admm", disable=not progress):
            if exists(cfg.max_cu) and counter.total >= cfg.max_cu:
                break
            ax, sx = model.forward(state.x, weights)
            recorder.record(n - 1, state.x, _cost_terms(ax, sx, y, lam1, lam2), cu_at_x)

            # z- and w-updates on the stacked residual u = F x - b' + w
            a = ax - y
            u_a = lam1 * a + state.w_a
            u_s = sx + state.w_s
            z_a = prox_l1(u_a, 1.0 / theta)
            z_s = prox_l1(u_s, 1.0 / theta)
            w_a, w_s = u_a - z_a, u_s - z_s
            f_a, f_s = 2 * w_a - state.w_a, 2 * w_s - state.w_s
            recorder.trace.primal_residuals.append(
                float(np.sqrt(np.sum((w_a - state.w_a) ** 2) + np.sum((w_s - state.w_s) ** 2)))
            )
            for name, arr in (("z", z_a), ("z", z_s), ("w", w_a), ("w", w_s)):
                check_finite(arr, n, name)

            v = model.adjoint(lam2 * a + 0.5 * theta * lam1 * f_a, 0.5 * theta * f_s, weights)
            result = xstep_cg(v, state.x, model, weights, coeff_a, coeff_s, cfg.cg_iter, tol)
            check_finite(result.x, n, "x")
            recorder.trace.cg_iterations.append(result.iterations)
            recorder.trace.cg_breakdowns += int(result.breakdown)

            state = AdmmState(x=result.x, z_a=z_a, z_s=z_s, w_a=w_a, w_s=w_s, n=n)
            cu_at_x = counter.total
            weights = assemble(state.x)
            if on_iteration is not None:
                on_iteration(n, state.x, weights)

        with counter.paused():
            ax, sx = model.forward(state.x, weights)
        recorder.record(state.n, state.x, _cost_terms(ax, sx, y, lam1, lam2), cu_at_x)
        trace = recorder.trace
        logger.info(
            "admm: J %.6g -> %.6g after %d iterations, %d CU", trace.initial_cost, trace.final_cost, state.n, cu_at_x
        )
        return state.x, trace


def admm_solve(
    stack: LightFieldStack,
    cfg: SolverConfig,
    x0: ImageGrid | None = None,
    **kwargs,
) -> tuple[np.ndarray, ConvergenceTrace]:
    return AdmmSolver(cfg).solve(stack, x0=x0, **kwargs)
