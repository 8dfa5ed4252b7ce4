"""End-to-end trend checks on the 64x64 synthetic scene (``pytest -m slow``)."""

import numpy as np
import pytest

from lfsr.data.degrade import NoiseParams, degrade_lightfield
from lfsr.eval.metrics import psnr
from lfsr.model.baselines import GradientDescentSolver
from lfsr.model.solver import AdmmSolver, SolverConfig, initial_estimate


pytestmark = pytest.mark.slow

THETA = 50.0


def _degrade(scene, pattern="star", grid=3, arm=None, sigma=5.0, nu=1.0):
    hr, disparity = scene
    noise = NoiseParams(sigma_g=sigma, nu=nu, seed=42)
    return degrade_lightfield(hr, disparity, grid=grid, pattern=pattern, arm=arm, zeta=2, noise=noise)


@pytest.fixture(scope="module")
def bench(scene):
    return _degrade(scene)


def _admm_psnr(degraded, **params):
    cfg = SolverConfig(theta=THETA, n_iter=10, **params)
    x, _ = AdmmSolver(cfg).solve(degraded.stack, progress=False)
    return psnr(x, degraded.ground_truth)


def test_admm_beats_bicubic_by_a_clear_margin(bench):
    bicubic = psnr(initial_estimate(bench.stack), bench.ground_truth)
    assert _admm_psnr(bench) >= bicubic + 1.5


def test_more_views_do_not_hurt(scene):
    three = _admm_psnr(_degrade(scene, pattern="row"))
    five = _admm_psnr(_degrade(scene, pattern="cross", arm=1))
    nine = _admm_psnr(_degrade(scene, pattern="star"))
    assert five >= three - 0.1
    assert nine >= five - 0.1


def test_admm_converges_faster_than_fixed_step_descent(bench):
    budget = 100
    _, admm = AdmmSolver(theta=THETA, n_iter=budget, max_cu=budget).solve(bench.stack, progress=False)
    _, gd = GradientDescentSolver(n_iter=budget, max_cu=budget).solve(bench.stack, progress=False)
    assert admm.cost_at_cu(budget) < gd.cost_at_cu(budget)


def test_cg_depth_barely_matters_at_equal_compute(bench):
    budget = 132
    runs = {}
    for k in (5, 10):
        cfg = SolverConfig(theta=THETA, n_iter=budget, cg_iter=k, cg_tol=1e-300, max_cu=budget)
        _, runs[k] = AdmmSolver(cfg).solve(bench.stack, progress=False)
    assert runs[5].final_cu == runs[10].final_cu == budget
    assert abs(runs[5].final_cost - runs[10].final_cost) <= 0.01 * runs[10].final_cost


def test_joint_data_term_handles_mixed_noise(scene):
    degraded = _degrade(scene, sigma=10.0, nu=1.0)
    grid = (0.3, 1.0, 3.0)
    l1_only = max(_admm_psnr(degraded, lambda1=lam, lambda2=0.0) for lam in grid)
    l2_only = max(_admm_psnr(degraded, lambda1=0.0, lambda2=10 * lam) for lam in grid)
    joint = max(_admm_psnr(degraded, lambda1=lam1, lambda2=10 * lam2) for lam1 in grid for lam2 in grid)
    assert joint >= max(l1_only, l2_only) - 0.1


def test_weights_sharpen_at_edges(bench):
    gy, gx = np.gradient(bench.ground_truth)
    magnitude = np.hypot(gx, gy)
    edges = magnitude >= np.quantile(magnitude, 0.9)
    means = {}

    def record(n, x, weights):
        if n in (1, 10):
            means[n] = float(weights.shared[edges].mean())

    AdmmSolver(theta=THETA, n_iter=10).solve(bench.stack, on_iteration=record, progress=False)
    assert means[10] < means[1]


def test_admm_closes_the_splitting_gap(bench):
    _, trace = AdmmSolver(theta=THETA, n_iter=20).solve(bench.stack, progress=False)
    residuals = trace.primal_residuals
    assert len(residuals) == 20
    assert residuals[-1] <= 0.1 * residuals[0]
