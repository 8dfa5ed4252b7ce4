import argparse
import logging
import sys

from pydantic import ValidationError

from lfsr.infer.utils_infer import (
    bench_budget_cu,
    crop,
    default_config,
    grid,
    pattern,
    resolve_run_config,
    run_bench_cmd,
    run_degrade,
    run_eval,
    run_gen_scene,
    run_sr,
    run_weights,
    scale,
    scene_size,
    solver_names,
)
from lfsr.model.utils import SolverDivergedError


EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_IO = 3
EXIT_DIVERGED = 4


def grid_arg(value: str) -> str:
    rows, _, cols = value.lower().partition("x")
    if not rows.isdigit() or (cols and not cols.isdigit()):
        raise argparse.ArgumentTypeError(f"grid must look like 3 or 3x3, got {value!r}")
    return value


# Note. No defaults on the flags below, so unset flags fall through to the config file

common = argparse.ArgumentParser(add_help=False)
common.add_argument(
    "-c",
    "--config",
    type=str,
    default=default_config,
    help="TOML config file of key = value pairs, default see infer/examples/basic/basic.toml",
)
common.add_argument("--out", type=str, help="The output directory")
common.add_argument("--seed", type=int, help="Seed of every random draw")
common.add_argument(
    "--no-progress",
    dest="progress",
    action="store_const",
    const=False,
    help="Disable progress bars",
)

stack_args = argparse.ArgumentParser(add_help=False)
stack_args.add_argument("--stack", type=str, help="The stack directory written by `degrade`")
stack_args.add_argument("--gt", type=str, help="Ground-truth HR image for PSNR reporting")
stack_args.add_argument("--kernel", type=str, help="Blur kernel as PFM, overrides the stack's kernel")
stack_args.add_argument("--crop", type=int, help=f"Border excluded from metrics, default {crop}")

solver_args = argparse.ArgumentParser(add_help=False)
solver_args.add_argument("--solver", type=str, choices=solver_names, help="Solver preset, default admm")
solver_args.add_argument("-N", "--iterations", type=int, help="Outer iterations (ADMM or GD)")
solver_args.add_argument("-K", "--cg-iter", dest="cg_iter", type=int, help="Max CG steps per x-step")
solver_args.add_argument("--cg-tol", dest="cg_tol", type=float, help="CG stop threshold on <r, r>, default 1e-8 p")
solver_args.add_argument("--lambda1", type=float, help="Weight of the L1 data term, default 1")
solver_args.add_argument("--lambda2", type=float, help="Weight of the L2 data term, default 10")
solver_args.add_argument("--theta", type=float, help="ADMM penalty, default 1")
solver_args.add_argument(
    "--adjoint-mode", dest="adjoint_mode", choices=["exact", "reverse", "paper"], help="Warp adjoint, default exact"
)
solver_args.add_argument("--window-radius", dest="window_radius", type=int, help="Regularization window radius")
solver_args.add_argument("--max-cu", dest="max_cu", type=int, help="Stop once this many CU are spent")
solver_args.add_argument("--step", type=float, help="Fixed GD step, default 1/L")
solver_args.add_argument("--sigma-s", dest="sigma_s", type=float, help="Spatial weight falloff (inf disables)")
solver_args.add_argument("--sigma-e", dest="sigma_e", type=float, help="Edge weight falloff (inf disables)")
solver_args.add_argument("--sigma-o1", dest="sigma_o1", type=float, help="Occlusion-boundary falloff")
solver_args.add_argument("--sigma-o2", dest="sigma_o2", type=float, help="Projection-error falloff")

parser = argparse.ArgumentParser(
    prog="lfsr-cli",
    description="Light-field super-resolution: degrade, solve, evaluate and benchmark.",
    epilog="Flags override keys of the config file, which override solver presets and defaults.",
)
subparsers = parser.add_subparsers(dest="command", required=True)

p_scene = subparsers.add_parser("gen-scene", parents=[common], help="Write a synthetic HR scene and disparity")
p_scene.add_argument("--size", type=int, help=f"HR side length, default {scene_size}")

p_degrade = subparsers.add_parser("degrade", parents=[common], help="Synthesize an LR stack from an HR scene")
p_degrade.add_argument("--input", type=str, help="HR ground truth (PPM or PGM)")
p_degrade.add_argument("--disparity", type=str, help="HR disparity map (PFM)")
p_degrade.add_argument("--grid", type=grid_arg, help=f"Angular grid, e.g. 3x3, default {grid}")
p_degrade.add_argument(
    "--pattern", type=str, choices=["full", "star", "cross", "row"], help=f"View pattern, default {pattern}"
)
p_degrade.add_argument("--arm", type=int, help="Arm length of star/cross/row patterns, default grid radius")
p_degrade.add_argument("--scale", type=int, choices=[1, 2, 3, 4], help=f"Scale factor, default {scale}")
p_degrade.add_argument("--sigma", type=float, help="Gaussian noise std on the 0-255 scale")
p_degrade.add_argument("--nu", type=float, help="Impulse noise fraction in percent")
p_degrade.add_argument("--kernel", type=str, help="Blur kernel as PFM, default Gaussian PSF")
p_degrade.add_argument("--motion", dest="motion_length", type=float, help="Use a linear motion kernel of this length")
p_degrade.add_argument("--motion-angle", dest="motion_angle", type=float, help="Motion direction in degrees")
p_degrade.add_argument(
    "--no-prepare",
    dest="prepare",
    action="store_const",
    const=False,
    help="Store ground-truth disparity instead of the down/up-scaled one",
)
p_degrade.add_argument("--workers", type=int, help="Threads for per-view degradation")

p_sr = subparsers.add_parser("sr", parents=[common, stack_args, solver_args], help="Super-resolve a stack")
p_sr.add_argument("--color", choices=["auto", "gray"], help="auto: colour output from bicubic chroma")

p_bench = subparsers.add_parser("bench", parents=[common, stack_args, solver_args], help="Compare solvers by CU")
p_bench.add_argument("--budget", type=int, help=f"CU budget per solver, default {bench_budget_cu}")

p_eval = subparsers.add_parser("eval", parents=[common], help="PSNR and SSIM of image pairs")
p_eval.add_argument("pairs", nargs="+", help="A1 B1 [A2 B2 ...]")
p_eval.add_argument("--crop", type=int, help=f"Border excluded from metrics, default {crop}")

p_weights = subparsers.add_parser("weights", parents=[common, stack_args, solver_args], help="Dump weight maps")
p_weights.add_argument("--input", type=str, help="HR estimate to weight, default bicubic of the reference view")

commands = {
    "gen-scene": run_gen_scene,
    "degrade": run_degrade,
    "sr": run_sr,
    "bench": run_bench_cmd,
    "eval": run_eval,
    "weights": run_weights,
}


def main(argv=None):
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    config_path = args.pop("config")
    logging.basicConfig(level=logging.INFO)

    try:
        cfg = resolve_run_config(args, config_path)
        commands[command](cfg)
    except SolverDivergedError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValidationError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
