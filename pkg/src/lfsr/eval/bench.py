"""Convergence benchmark: cost against accumulated computation units for four solvers."""

from __future__ import annotations

import csv
import logging
import math
from pathlib import Path

import matplotlib


matplotlib.use("Agg")
import matplotlib.pylab as plt  # noqa: E402

from lfsr.model.lightfield import LightFieldStack  # noqa: E402
from lfsr.model.operators import BlurKernel  # noqa: E402
from lfsr.model.solver import initial_estimate  # noqa: E402
from lfsr.model.trace import ConvergenceTrace  # noqa: E402


logger = logging.getLogger(__name__)

# run name -> solver preset
BENCH_RUNS = {"gd": "gd", "gd-ls": "gd-ls", "admm-5": "admm", "admm-10": "admm-10"}


def run_bench(
    stack: LightFieldStack,
    load_solver,
    overrides: dict,
    budget_cu: int,
    out_dir: str | Path,
    kernel: BlurKernel | None = None,
    gt=None,
    progress: bool = False,
    psnr_crop: int = 8,
) -> dict[str, ConvergenceTrace]:
    """Run every solver from the same bicubic start until ``budget_cu`` is spent."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    x0 = initial_estimate(stack)
    # every iteration costs at least 2 CU, so the budget always stops the run first
    overrides = {**overrides, "max_cu": budget_cu, "n_iter": budget_cu}

    traces = {}
    for name, preset in BENCH_RUNS.items():
        solver = load_solver(preset, overrides)
        logger.info("bench: %s", name)
        _, trace = solver.solve(stack, x0=x0, kernel=kernel, gt=gt, progress=progress, psnr_crop=psnr_crop)
        trace.solver = name
        trace.write_csv(out_dir / f"trace_{name}.csv")
        traces[name] = trace

    write_convergence_csv(out_dir / "convergence.csv", traces)
    plot_convergence(out_dir / "convergence.png", traces)
    return traces


def write_convergence_csv(path: str | Path, traces: dict[str, ConvergenceTrace]):
    rows = [(row.cu, name, row.cost, row.psnr) for name, trace in traces.items() for row in trace.rows]
    rows.sort(key=lambda r: (r[0], r[1]))
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["solver", "cu", "cost", "psnr"])
        for cu, name, cost, quality in rows:
            psnr = "" if quality is None else ("inf" if math.isinf(quality) else f"{quality:.6f}")
            writer.writerow([name, cu, f"{cost:.10e}", psnr])


def plot_convergence(path: str | Path, traces: dict[str, ConvergenceTrace]):
    fig, ax = plt.subplots(figsize=(8, 5))
    for name, trace in traces.items():
        ax.plot([r.cu for r in trace.rows], [r.cost for r in trace.rows], marker=".", label=name)
    ax.set_xlabel("accumulated CU")
    ax.set_ylabel("cost J(x)")
    ax.set_yscale("log")
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    plt.savefig(path)
    plt.close(fig)
