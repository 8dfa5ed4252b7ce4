import numpy as np
import pytest

from lfsr.api import LFSR
from lfsr.data.io import read_image
from lfsr.infer.utils_infer import RunConfig, load_solver, parse_grid, resolve_run_config
from lfsr.model import AdmmSolver, GradientDescentSolver
from lfsr.model.lightfield import ColorImage
from lfsr.model.utils import ConfigError


def test_facade_degrades_solves_and_exports(scene, tmp_path):
    hr, disparity = scene
    lfsr = LFSR(theta=50.0, n_iter=2)
    degraded = lfsr.degrade(hr, disparity, grid=3, pattern="row", sigma=5.0, nu=1.0, seed=7, out_dir=tmp_path / "stack")
    x, trace = lfsr.infer(degraded, progress=False)
    assert x.shape == (64, 64)
    assert len(trace) == 3 and trace.rows[-1].psnr is not None
    assert lfsr.evaluate(x, degraded.ground_truth).psnr > 15.0

    lfsr.export_image(x, tmp_path / "out.ppm", reference_color=degraded.color_views[degraded.stack.reference])
    assert isinstance(read_image(tmp_path / "out.ppm"), ColorImage)
    lfsr.export_trace(trace, tmp_path / "trace.csv")

    record = LFSR(theta=50.0, n_iter=1).load(tmp_path / "stack")
    assert len(record.stack) == 3
    x2, _ = lfsr.infer(record, progress=False)
    assert np.all(np.isfinite(x2))


def test_presets_pick_backend_and_name():
    admm = load_solver("admm")
    assert isinstance(admm, AdmmSolver) and admm.name == "admm" and admm.cfg.cg_iter == 5
    assert load_solver("admm-10").cfg.cg_iter == 10
    gd = load_solver("gd")
    assert isinstance(gd, GradientDescentSolver) and gd.name == "gd" and not gd.cfg.line_search
    assert load_solver("gd-ls").cfg.line_search
    with pytest.raises(ConfigError):
        load_solver("newton")


def test_overrides_beat_presets_and_merge_weights():
    solver = load_solver("admm", {"cg_iter": 7, "weights": {"sigma_s": 2.0}})
    assert solver.cfg.cg_iter == 7
    assert solver.cfg.n_iter == 10
    assert solver.cfg.weights.sigma_s == 2.0
    assert solver.cfg.weights.sigma_e == 0.01


def test_flags_override_config_file(tmp_path):
    config = tmp_path / "run.toml"
    config.write_text('grid = "5x5"\nsolver = "gd"\nsigma = 3.0\nlambda2 = 4.0\n')
    cfg = resolve_run_config({"sigma": 9.0, "nu": None, "iterations": 3}, config)
    assert cfg.grid == 5 and cfg.solver == "gd"
    assert cfg.sigma == 9.0 and cfg.nu == 0.0
    assert cfg.solver_overrides() == {"n_iter": 3, "lambda2": 4.0}


def test_run_config_validation():
    with pytest.raises(ValueError):
        RunConfig(scale=5)
    with pytest.raises(ValueError):
        RunConfig(colour="gray")
    with pytest.raises(ValueError):
        parse_grid("4x4")
    with pytest.raises(ValueError):
        parse_grid("3x5")
    assert parse_grid("7") == 7
    with pytest.raises(ConfigError, match="--stack"):
        RunConfig().require("stack")
    overrides = RunConfig(sigma_e=0.5, step=0.1).solver_overrides()
    assert overrides == {"gd_step": 0.1, "weights": {"sigma_e": 0.5}}
