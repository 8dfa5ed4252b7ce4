"""Subgradient-descent baselines on the same cost as the ADMM solver."""

from __future__ import annotations

import logging

import numpy as np
from tqdm import tqdm

from lfsr.model.lightfield import ImageGrid, LightFieldStack
from lfsr.model.operators import BlurKernel, ForwardModel, default_kernel, estimate_lipschitz
from lfsr.model.solver import (
    IterationCallback,
    SolverConfig,
    _cost_terms,
    _TraceRecorder,
    initial_estimate,
)
from lfsr.model.trace import ConvergenceTrace
from lfsr.model.utils import ConfigError, as_grid, check_finite, default, exists
from lfsr.model.weights import WeightAssembler


logger = logging.getLogger(__name__)

FALLBACK_STEP = 1e-3


def default_step(model: ForwardModel, cfg: SolverConfig) -> float:
    if exists(cfg.gd_step):
        return cfg.gd_step
    if cfg.lambda2 > 0:
        lipschitz = estimate_lipschitz(model, cfg.lambda2)
        if lipschitz > 0:
            return 1.0 / lipschitz
    return FALLBACK_STEP


class GradientDescentSolver:
    """Fixed-step subgradient descent, or Armijo backtracking when ``cfg.line_search`` is set.

    Every iteration costs one forward and one adjoint pass; each line-search trial
    adds one forward pass.
    """

    def __init__(self, cfg: SolverConfig | None = None, **params):
        self.cfg = cfg if cfg is not None else SolverConfig(**params)
        self.name = "gd-ls" if self.cfg.line_search else "gd"

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
        lam1, lam2 = cfg.lambda1, cfg.lambda2

        x = initial_estimate(stack) if x0 is None else np.array(as_grid(x0, "x0"), copy=True)
        if x.shape != model.hr_shape:
            raise ConfigError(f"x0 has shape {x.shape}, expected {model.hr_shape}")
        step = default_step(model, cfg)
        logger.info("%s: step %.4g, N=%d", self.name, step, cfg.n_iter)

        weights = assemble(x)
        recorder = _TraceRecorder(self.name, counter, gt, psnr_crop)
        if on_iteration is not None:
            on_iteration(0, x, weights)

        n_done = 0
        cu_at_x = 0
        t_prev = step
        for n in tqdm(range(1, cfg.n_iter + 1), desc=self.name, disable=not progress):
            if exists(cfg.max_cu) and counter.total >= cfg.max_cu:
                break
            ax, sx = model.forward(x, weights)
            terms = _cost_terms(ax, sx, y, lam1, lam2)
            recorder.record(n - 1, x, terms, cu_at_x)

            a = ax - y
            g = model.adjoint(lam1 * np.sign(a) + 2 * lam2 * a, np.sign(sx), weights)

            if cfg.line_search:
                g2 = float(np.vdot(g, g))
                t = 2 * t_prev
                for _ in range(cfg.max_backtracks + 1):
                    trial = x - t * g
                    ax_t, sx_t = model.forward(trial, weights)
                    if _cost_terms(ax_t, sx_t, y, lam1, lam2).total <= terms.total - cfg.armijo_c * t * g2:
                        x = trial
                        t_prev = t
                        break
                    t *= 0.5
                else:
                    logger.debug("%s: no Armijo step found at iteration %d", self.name, n)
            else:
                x = x - step * g

            check_finite(x, n, "x")
            n_done = n
            cu_at_x = counter.total
            weights = assemble(x)
            if on_iteration is not None:
                on_iteration(n, x, weights)

        with counter.paused():
            ax, sx = model.forward(x, weights)
        recorder.record(n_done, x, _cost_terms(ax, sx, y, lam1, lam2), cu_at_x)
        return x, recorder.trace


def gd_solve(
    stack: LightFieldStack,
    cfg: SolverConfig,
    step: float | None = None,
    line_search: bool | None = None,
    x0: ImageGrid | None = None,
    **kwargs,
) -> tuple[np.ndarray, ConvergenceTrace]:
    cfg = cfg.model_copy(
        update={"gd_step": default(step, cfg.gd_step), "line_search": default(line_search, cfg.line_search)}
    )
    return GradientDescentSolver(cfg).solve(stack, x0=x0, **kwargs)
