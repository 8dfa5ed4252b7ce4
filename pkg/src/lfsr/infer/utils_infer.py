# Run configuration and pipelines shared by the command line and the api.

from __future__ import annotations

import json
import logging
import os
from importlib.resources import files
from pathlib import Path
from typing import Literal

import numpy as np
import tomli
from hydra.utils import get_class
from omegaconf import OmegaConf
from pydantic import BaseModel, ConfigDict, Field, field_validator

import lfsr
from lfsr.data.degrade import DegradedLightField, NoiseParams, degrade_lightfield
from lfsr.data.io import StackRecord, read_image, read_pfm, read_stack, write_image, write_pfm
from lfsr.data.scene import generate_scene
from lfsr.eval.bench import run_bench
from lfsr.eval.metrics import QualityReport, evaluate
from lfsr.model.lightfield import ColorImage, compose_color, to_luma
from lfsr.model.operators import BlurKernel, default_kernel, motion_kernel, resolve_adjoint_mode
from lfsr.model.solver import SolverConfig, initial_estimate
from lfsr.model.trace import ConvergenceTrace
from lfsr.model.utils import ConfigError, exists
from lfsr.model.weights import WeightAssembler, WeightParams


logger = logging.getLogger(__name__)

# -----------------------------------------

default_config = os.path.join(files("lfsr").joinpath("infer/examples/basic"), "basic.toml")
solver_names = ("admm", "admm-10", "gd", "gd-ls")
grid = 3
pattern = "star"
scale = 2
crop = 8
scene_size = 64
bench_budget_cu = 132

# -----------------------------------------


# run configuration


class RunConfig(BaseModel):
    """Every knob of a run; unknown keys are rejected."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # paths
    input: str | None = None
    disparity: str | None = None
    gt: str | None = None
    stack: str | None = None
    out: str | None = None
    kernel: str | None = None
    pairs: list[str] = []

    # degradation
    grid: int = grid
    pattern: Literal["full", "star", "cross", "row"] = pattern
    arm: int | None = Field(None, ge=0)
    scale: int = Field(scale, ge=1, le=4)
    sigma: float = Field(0.0, ge=0)
    nu: float = Field(0.0, ge=0, le=100)
    seed: int = Field(0, ge=0, lt=2**64)
    prepare: bool = True
    motion_length: float | None = Field(None, gt=0)
    motion_angle: float = 45.0
    size: int = Field(scene_size, ge=16)
    workers: int | None = Field(None, ge=1)

    # solver, None defers to the preset
    solver: Literal["admm", "admm-10", "gd", "gd-ls"] = "admm"
    iterations: int | None = Field(None, ge=0)
    cg_iter: int | None = Field(None, ge=1)
    cg_tol: float | None = Field(None, gt=0)
    lambda1: float | None = Field(None, ge=0)
    lambda2: float | None = Field(None, ge=0)
    theta: float | None = Field(None, gt=0)
    adjoint_mode: Literal["exact", "reverse"] | None = None
    window_radius: int | None = Field(None, ge=0)
    max_cu: int | None = Field(None, ge=1)
    step: float | None = Field(None, ge=0)
    sigma_s: float | None = Field(None, gt=0)
    sigma_e: float | None = Field(None, gt=0)
    sigma_o1: float | None = Field(None, gt=0)
    sigma_o2: float | None = Field(None, gt=0)

    # output
    color: Literal["auto", "gray"] = "auto"
    crop: int = Field(crop, ge=0)
    budget: int = Field(bench_budget_cu, ge=1)
    progress: bool = True

    @field_validator("grid", mode="before")
    @classmethod
    def _parse_grid(cls, v):
        return parse_grid(v)

    @field_validator("adjoint_mode", mode="before")
    @classmethod
    def _adjoint_alias(cls, v):
        return resolve_adjoint_mode(v) if isinstance(v, str) else v

    def noise_params(self) -> NoiseParams:
        return NoiseParams(sigma_g=self.sigma, nu=self.nu, seed=self.seed)

    def solver_overrides(self) -> dict:
        overrides = {
            "n_iter": self.iterations,
            "cg_iter": self.cg_iter,
            "cg_tol": self.cg_tol,
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "theta": self.theta,
            "adjoint_mode": self.adjoint_mode,
            "window_radius": self.window_radius,
            "max_cu": self.max_cu,
            "gd_step": self.step,
        }
        overrides = {k: v for k, v in overrides.items() if exists(v)}
        sigmas = {k: getattr(self, k) for k in ("sigma_s", "sigma_e", "sigma_o1", "sigma_o2")}
        sigmas = {k: v for k, v in sigmas.items() if exists(v)}
        if sigmas:
            overrides["weights"] = sigmas
        return overrides

    def require(self, *keys: str):
        missing = [k for k in keys if getattr(self, k) in (None, [])]
        if missing:
            raise ConfigError("missing required " + ", ".join(f"--{k.replace('_', '-')}" for k in missing))


def parse_grid(v) -> int:
    """Accept ``5``, ``"5"`` or ``"5x5"``."""
    if isinstance(v, int):
        return v
    text = str(v).lower().strip()
    rows, _, cols = text.partition("x")
    try:
        rows_i = int(rows)
        cols_i = int(cols) if cols else rows_i
    except ValueError:
        raise ValueError(f"grid must look like 3 or 3x3, got {v!r}") from None
    if rows_i != cols_i or rows_i < 1 or rows_i % 2 == 0:
        raise ValueError(f"grid must be an odd-sided square, got {v!r}")
    return rows_i


def load_config_file(path: str | os.PathLike | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as f:
        return tomli.load(f)


def resolve_run_config(cli: dict, config_path: str | os.PathLike | None = default_config) -> RunConfig:
    """CLI flags (when given) override config-file keys, which override defaults."""
    merged = dict(load_config_file(config_path))
    merged.update({k: v for k, v in cli.items() if v is not None})
    return RunConfig(**merged)


# solvers


def load_solver_preset(name: str):
    if name not in solver_names:
        raise ConfigError(f"unknown solver {name!r}, choose from {solver_names}")
    return OmegaConf.load(str(files("lfsr").joinpath(f"configs/{name}.yaml")))


def load_solver(name: str, overrides: dict | None = None):
    """Instantiate the preset's backend with ``SolverConfig`` = defaults < preset < overrides."""
    preset = load_solver_preset(name)
    solver_cls = get_class(f"lfsr.model.{preset.solver.backend}")
    params = OmegaConf.to_container(preset.solver.params, resolve=True)
    overrides = dict(overrides or {})
    weights = {**params.pop("weights", {}), **overrides.pop("weights", {})}
    params.update(overrides)
    params["weights"] = WeightParams(**weights)
    solver = solver_cls(SolverConfig(**params))
    solver.name = str(preset.solver.name)
    return solver


# kernels


def load_kernel(cfg: RunConfig, zeta: int, stack_kernel: BlurKernel | None = None) -> BlurKernel:
    if exists(cfg.kernel):
        return BlurKernel.from_taps(read_pfm(cfg.kernel))
    if exists(cfg.motion_length):
        return motion_kernel(cfg.motion_length, cfg.motion_angle)
    if stack_kernel is not None:
        return stack_kernel
    return default_kernel(zeta)


# provenance


def write_run_record(out_dir: str | os.PathLike, command: str, cfg: RunConfig, solver_cfg: SolverConfig | None = None):
    record = {
        "command": command,
        "version": lfsr.__version__,
        "seed": cfg.seed,
        "config": cfg.model_dump(),
    }
    if solver_cfg is not None:
        record["solver"] = solver_cfg.model_dump()
    path = Path(out_dir) / "run.json"
    path.write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n")
    return path


# pipelines


def run_gen_scene(cfg: RunConfig) -> tuple[ColorImage, np.ndarray]:
    cfg.require("out")
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    hr, disparity = generate_scene(cfg.size, cfg.seed)
    write_image(out_dir / "hr.ppm", hr)
    write_pfm(out_dir / "disp.pfm", disparity)
    write_run_record(out_dir, "gen-scene", cfg)
    print(out_dir / "hr.ppm")
    return hr, disparity


def run_degrade(cfg: RunConfig) -> DegradedLightField:
    cfg.require("input", "disparity", "out")
    hr = read_image(cfg.input)
    disparity = read_pfm(cfg.disparity)
    result = degrade_lightfield(
        hr,
        disparity,
        grid=cfg.grid,
        pattern=cfg.pattern,
        zeta=cfg.scale,
        kernel=load_kernel(cfg, cfg.scale),
        noise=cfg.noise_params(),
        arm=cfg.arm,
        prepare=cfg.prepare,
        out_dir=cfg.out,
        max_workers=cfg.workers,
    )
    write_run_record(cfg.out, "degrade", cfg)
    print(f"{len(result.stack)} views -> {cfg.out}")
    return result


def load_gt_luma(path: str | None) -> np.ndarray | None:
    return to_luma(read_image(path)) if path else None


def export_estimate(path_stem: Path, x: np.ndarray, record: StackRecord, color: str) -> Path:
    if record.reference_color is not None and color == "auto":
        path = path_stem.with_suffix(".ppm")
        write_image(path, compose_color(x, record.reference_color))
    else:
        path = path_stem.with_suffix(".pgm")
        write_image(path, x)
    return path


def run_sr(cfg: RunConfig) -> tuple[np.ndarray, ConvergenceTrace, QualityReport | None]:
    cfg.require("stack", "out")
    record = read_stack(cfg.stack)
    gt = load_gt_luma(cfg.gt)
    solver = load_solver(cfg.solver, cfg.solver_overrides())
    kernel = load_kernel(cfg, record.stack.scale, record.kernel)

    x, trace = solver.solve(record.stack, kernel=kernel, gt=gt, progress=cfg.progress, psnr_crop=cfg.crop)

    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    image_path = export_estimate(out_dir / "out", x, record, cfg.color)
    trace.write_csv(out_dir / "trace.csv")
    write_run_record(out_dir, "sr", cfg, solver.cfg)

    report = None
    print(f"final cost: {trace.final_cost:.6g} ({trace.final_cu} CU)")
    if gt is not None:
        report = evaluate(x, gt, cfg.crop)
        bicubic = evaluate(initial_estimate(record.stack), gt, cfg.crop)
        print(f"psnr: {report.psnr:.3f} dB (bicubic {bicubic.psnr:.3f} dB), ssim: {report.ssim:.4f}")
    print(image_path)
    return x, trace, report


def run_eval(cfg: RunConfig) -> list[QualityReport]:
    if len(cfg.pairs) < 2 or len(cfg.pairs) % 2:
        raise ConfigError("eval needs image pairs: A1 B1 [A2 B2 ...]")
    reports = []
    for a_path, b_path in zip(cfg.pairs[::2], cfg.pairs[1::2]):
        report = evaluate(to_luma(read_image(a_path)), to_luma(read_image(b_path)), cfg.crop)
        print(report.as_csv())
        reports.append(report)
    return reports


def run_weights(cfg: RunConfig) -> list[Path]:
    """Dump ``W_d`` per offset at an HR estimate: ``--input`` if given, else bicubic, after ``--iterations`` of ADMM."""
    cfg.require("stack", "out")
    record = read_stack(cfg.stack)
    stack = record.stack
    x = to_luma(read_image(cfg.input)) if cfg.input else initial_estimate(stack)
    solver = load_solver("admm", cfg.solver_overrides())
    if solver.cfg.window_radius == 0:
        raise ConfigError("weights need --window-radius >= 1")
    if exists(cfg.iterations) and cfg.iterations > 0:
        x, _ = solver.solve(stack, x0=x, kernel=load_kernel(cfg, stack.scale, record.kernel), progress=cfg.progress)
    weights = WeightAssembler(stack, solver.cfg.offsets(), solver.cfg.weights)(x)

    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for (dx, dy), w_map in zip(weights.offsets, weights.maps):
        stem = out_dir / f"weight_{dx}_{dy}"
        write_image(stem.with_suffix(".pgm"), w_map)
        write_pfm(stem.with_suffix(".pfm"), w_map)
        written.append(stem.with_suffix(".pfm"))
    write_run_record(out_dir, "weights", cfg, solver.cfg)
    print(f"{len(written)} weight maps -> {out_dir}")
    return written


def run_bench_cmd(cfg: RunConfig) -> dict[str, ConvergenceTrace]:
    cfg.require("stack", "out")
    record = read_stack(cfg.stack)
    traces = run_bench(
        record.stack,
        load_solver,
        cfg.solver_overrides(),
        cfg.budget,
        cfg.out,
        kernel=load_kernel(cfg, record.stack.scale, record.kernel),
        gt=load_gt_luma(cfg.gt),
        progress=cfg.progress,
        psnr_crop=cfg.crop,
    )
    write_run_record(cfg.out, "bench", cfg)
    for name, trace in traces.items():
        print(f"{name}: J {trace.initial_cost:.6g} -> {trace.final_cost:.6g} at {trace.final_cu} CU")
    return traces
