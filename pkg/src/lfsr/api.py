from __future__ import annotations

from pathlib import Path

import numpy as np

from lfsr.data.degrade import DegradedLightField, NoiseParams, degrade_lightfield
from lfsr.data.io import StackRecord, read_stack, write_image
from lfsr.eval.metrics import QualityReport, evaluate
from lfsr.infer.utils_infer import load_solver
from lfsr.model.lightfield import ColorImage, LightFieldStack, compose_color
from lfsr.model.operators import BlurKernel
from lfsr.model.trace import ConvergenceTrace


class LFSR:
    def __init__(self, solver="admm", kernel: BlurKernel | None = None, weights: dict | None = None, **params):
        overrides = dict(params)
        if weights:
            overrides["weights"] = weights
        self.solver = load_solver(solver, overrides)
        self.cfg = self.solver.cfg
        self.kernel = kernel

    def degrade(
        self,
        hr: np.ndarray | ColorImage,
        disparity: np.ndarray,
        grid=3,
        pattern="star",
        scale=2,
        sigma=0.0,
        nu=0.0,
        seed=0,
        prepare=True,
        out_dir=None,
    ) -> DegradedLightField:
        return degrade_lightfield(
            hr,
            disparity,
            grid=grid,
            pattern=pattern,
            zeta=scale,
            kernel=self.kernel,
            noise=NoiseParams(sigma_g=sigma, nu=nu, seed=seed),
            prepare=prepare,
            out_dir=out_dir,
        )

    def load(self, stack_dir) -> StackRecord:
        record = read_stack(stack_dir)
        if self.kernel is None and record.kernel is not None:
            self.kernel = record.kernel
        return record

    def infer(
        self,
        stack: LightFieldStack | StackRecord | DegradedLightField,
        gt=None,
        x0=None,
        on_iteration=None,
        progress=True,
    ) -> tuple[np.ndarray, ConvergenceTrace]:
        if isinstance(stack, DegradedLightField):
            gt = stack.ground_truth if gt is None else gt
            stack = stack.stack
        elif isinstance(stack, StackRecord):
            stack = stack.stack
        return self.solver.solve(stack, x0=x0, kernel=self.kernel, gt=gt, on_iteration=on_iteration, progress=progress)

    def evaluate(self, x, gt, crop=8) -> QualityReport:
        return evaluate(x, gt, crop)

    def export_image(self, x, file_image, reference_color: ColorImage | None = None):
        image = compose_color(x, reference_color) if reference_color is not None else x
        write_image(file_image, image)

    def export_trace(self, trace: ConvergenceTrace, file_trace):
        trace.write_csv(file_trace)


if __name__ == "__main__":
    from lfsr.data.scene import generate_scene

    lfsr = LFSR(theta=50.0)
    hr, disparity = generate_scene(64, seed=0)
    degraded = lfsr.degrade(hr, disparity, grid=3, pattern="star", scale=2, sigma=5.0, nu=1.0, seed=42)

    x, trace = lfsr.infer(degraded)
    print("psnr:", lfsr.evaluate(x, degraded.ground_truth).psnr)

    out = Path("tests") / "api_out"
    out.mkdir(parents=True, exist_ok=True)
    lfsr.export_image(x, out / "out.ppm", reference_color=degraded.color_views[degraded.stack.reference])
    lfsr.export_trace(trace, out / "trace.csv")
