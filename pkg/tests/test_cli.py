import json
import shutil

import numpy as np
import pytest
from conftest import read_trace

from lfsr.data.io import read_image, read_pfm, read_stack
from lfsr.infer.infer_cli import EXIT_DIVERGED, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main
from lfsr.model.solver import initial_estimate


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    assert main(["gen-scene", "--out", str(root / "scene"), "--size", "32"]) == EXIT_OK
    code = main(
        [
            "degrade",
            "--input", str(root / "scene" / "hr.ppm"),
            "--disparity", str(root / "scene" / "disp.pfm"),
            "--out", str(root / "stack"),
            "--no-progress",
        ]
    )
    assert code == EXIT_OK
    return root


def _sr(workspace, out, *extra):
    args = ["sr", "--stack", str(workspace / "stack"), "--out", str(out), "--no-progress", *extra]
    return main(args)


def test_gen_scene_writes_scene_and_record(workspace):
    hr = read_image(workspace / "scene" / "hr.ppm")
    assert hr.shape == (32, 32)
    assert read_pfm(workspace / "scene" / "disp.pfm").shape == (32, 32)
    record = json.loads((workspace / "scene" / "run.json").read_text())
    assert record["command"] == "gen-scene"
    assert record["seed"] == 42


def test_degrade_uses_the_config_file_defaults(workspace):
    record = read_stack(workspace / "stack")
    assert record.grid == 3 and record.pattern == "star"
    assert len(record.stack) == 9
    assert record.stack.scale == 2
    assert record.reference_color is not None


def test_zero_iterations_write_the_bicubic_start(workspace, tmp_path):
    assert _sr(workspace, tmp_path, "-N", "0", "--color", "gray") == EXIT_OK
    x0 = initial_estimate(read_stack(workspace / "stack").stack)
    expected = np.round(np.clip(x0, 0, 1) * 255) / 255
    np.testing.assert_allclose(read_image(tmp_path / "out.pgm"), expected, atol=1e-12)
    assert len(read_trace(tmp_path / "trace.csv")) == 1


def test_sr_is_deterministic(workspace, tmp_path, capsys):
    gt = str(workspace / "stack" / "gt.ppm")
    assert _sr(workspace, tmp_path / "a", "-N", "2", "--theta", "50", "--gt", gt) == EXIT_OK
    assert "psnr:" in capsys.readouterr().out
    assert _sr(workspace, tmp_path / "b", "-N", "2", "--theta", "50", "--gt", gt) == EXIT_OK
    assert (tmp_path / "a" / "out.ppm").read_bytes() == (tmp_path / "b" / "out.ppm").read_bytes()

    def strip_ms(path):
        return [line.rsplit(",", 1)[0] for line in path.read_text().splitlines()]

    assert strip_ms(tmp_path / "a" / "trace.csv") == strip_ms(tmp_path / "b" / "trace.csv")
    solver = json.loads((tmp_path / "a" / "run.json").read_text())["solver"]
    assert solver["n_iter"] == 2 and solver["theta"] == 50.0


def test_eval_prints_psnr_and_ssim(workspace, capsys):
    gt = str(workspace / "stack" / "gt.ppm")
    assert main(["eval", gt, gt]) == EXIT_OK
    assert capsys.readouterr().out.strip().splitlines()[-1] == "inf,1.0"


def test_weights_without_any_falloff_are_uniform(workspace, tmp_path):
    flags = ["--sigma-s", "inf", "--sigma-e", "inf", "--sigma-o1", "inf", "--sigma-o2", "inf"]
    code = main(["weights", "--stack", str(workspace / "stack"), "--out", str(tmp_path), *flags])
    assert code == EXIT_OK
    maps = sorted(tmp_path.glob("weight_*.pfm"))
    assert len(maps) == 12
    for path in maps:
        np.testing.assert_array_equal(read_pfm(path), 1.0)


def test_bench_writes_one_trace_per_solver(workspace, tmp_path):
    args = ["bench", "--stack", str(workspace / "stack"), "--out", str(tmp_path), "--budget", "24", "--no-progress"]
    code = main(args)
    assert code == EXIT_OK
    for name in ("gd", "gd-ls", "admm-5", "admm-10"):
        rows = read_trace(tmp_path / f"trace_{name}.csv")
        assert rows[0]["cu"] == "0"
        assert int(rows[-1]["cu"]) <= 24 + 22
    assert (tmp_path / "convergence.png").exists()
    header = (tmp_path / "convergence.csv").read_text().splitlines()[0]
    assert header == "solver,cu,cost,psnr"


def test_missing_input_is_a_validation_error(tmp_path):
    assert main(["degrade", "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_unknown_config_key_is_a_validation_error(tmp_path):
    config = tmp_path / "bad.toml"
    config.write_text("bogus = 1\n")
    assert main(["gen-scene", "-c", str(config), "--out", str(tmp_path)]) == EXIT_VALIDATION


def test_broken_stack_is_an_io_error(tmp_path):
    assert main(["sr", "--stack", str(tmp_path / "nowhere"), "--out", str(tmp_path / "out")]) == EXIT_IO


def test_corrupt_disparity_header_is_an_io_error(workspace, tmp_path):
    stack = tmp_path / "stack"
    shutil.copytree(workspace / "stack", stack)
    disp = sorted(stack.glob("disp_*.pfm"))[0]
    disp.write_bytes(b"Pf\n16 16\nnot-a-scale\n" + disp.read_bytes().split(b"\n", 3)[3])
    assert main(["sr", "--stack", str(stack), "--out", str(tmp_path / "out"), "--no-progress"]) == EXIT_IO


def test_adjoint_mode_accepts_alternate_spelling(workspace, tmp_path):
    assert _sr(workspace, tmp_path, "-N", "1", "--adjoint-mode", "paper") == EXIT_OK
    solver = json.loads((tmp_path / "run.json").read_text())["solver"]
    assert solver["adjoint_mode"] == "reverse"


def test_divergence_has_its_own_exit_code(workspace, tmp_path):
    assert _sr(workspace, tmp_path, "--solver", "gd", "--step", "1e308", "-N", "5") == EXIT_DIVERGED
