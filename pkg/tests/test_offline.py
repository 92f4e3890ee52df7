import numpy as np
import pytest
from scipy.linalg import lu_factor, lu_solve

from rkhs_streamci.bootstrap import BootstrapEnsemble, child_seed, make_rng
from rkhs_streamci.inference import InsufficientEnsembleError
from rkhs_streamci.mercer import ConfigurationError, MercerBasis
from rkhs_streamci.offline import (
    BenchConfig, cost_report_csv, krr_eval, krr_fit, residual_bootstrap_intervals, ridge_objective,
    timing_bench,
)
from rkhs_streamci.schedules import effective_regularization, steps
from rkhs_streamci.simulate import ExperimentConfig, gen_stream, harness_basis, truth_eval


class TestKrrFit:
    def test_single_point(self, periodic):
        fit = krr_fit([0.3], [2.0], 0.5, periodic)
        k = periodic.kernel(0.3, 0.3)
        assert fit.dual_coeffs[0] == pytest.approx(2.0 / (k + 0.5), rel=1e-9)
        val = krr_eval(fit, 0.3)
        assert val == pytest.approx(2.0 * k / (k + 0.5), rel=1e-9) and val < 2.0

    def test_zero_coefficients(self, periodic):
        fit = krr_fit([0.2, 0.7], [0.0, 0.0], 0.1, periodic)
        np.testing.assert_array_equal(krr_eval(fit, np.linspace(0, 1, 5)), 0)

    def test_large_lambda_shrinks(self, periodic, rng):
        x, y = rng.random(30), rng.normal(size=30)
        fit = krr_fit(x, y, 1e9, periodic)
        assert np.max(np.abs(fit.fitted)) < 1e-7

    def test_two_solvers(self):
        cfg = ExperimentConfig(n=200, checkpoints=[200])
        x, y = gen_stream(cfg, 0)
        b = cfg.basis
        fit = krr_fit(x, y, 0.01, b)
        g = b.gram(x)
        c = lu_solve(lu_factor(g + (200 * 0.01 + 1e-10) * np.eye(200)), y)
        np.testing.assert_allclose(fit.fitted, g @ c, atol=1e-8)
        a = g + (200 * 0.01 + 1e-10) * np.eye(200)
        assert np.linalg.norm(a @ fit.dual_coeffs - y) <= 1e-8 * np.linalg.norm(y)

    def test_spectral_filter(self):
        # on an equispaced grid the design is orthogonal, so the fit is a spectral filter
        b = MercerBasis(2.0, 10)
        t, lam = 64, 0.05
        x = np.arange(t) / t
        y = np.cos(2 * np.pi * x) + 0.3 * np.sin(6 * np.pi * x) + 0.1 * np.random.default_rng(0).normal(size=t)
        fit = krr_fit(x, y, lam, b)
        phi = b.features(x)
        yhat = phi.T @ y / t
        theta = b.weights / (b.weights + lam) * yhat
        grid = np.linspace(0, 1, 17)
        np.testing.assert_allclose(krr_eval(fit, grid), b.features(grid) @ theta, atol=1e-8)

    def test_residual_sd(self, periodic, rng):
        x, y = rng.random(40), rng.normal(size=40)
        fit = krr_fit(x, y, 0.01, periodic)
        assert fit.residual_sd == pytest.approx(np.sqrt(np.mean((y - fit.fitted) ** 2)))

    def test_ridge_optimality(self, periodic, rng):
        x, y = rng.random(60), np.sin(3 * rng.random(60)) + 0.2 * rng.normal(size=60)
        fit = krr_fit(x, y, 0.02, periodic)
        base = ridge_objective(fit, y)
        for j in range(60):
            for d in (1e-4, -1e-4):
                c = fit.dual_coeffs.copy()
                c[j] += d
                assert ridge_objective(fit, y, c) >= base - 1e-12

    @pytest.mark.parametrize("lam", [0.0, -1.0])
    def test_bad_lambda(self, periodic, lam):
        with pytest.raises(ConfigurationError):
            krr_fit([0.5], [1.0], lam, periodic)

    def test_empty(self, periodic):
        with pytest.raises(ConfigurationError):
            krr_fit([], [], 0.1, periodic)


class TestResidualBootstrap:
    def test_zero_residuals(self, periodic):
        fit = krr_fit([0.2, 0.6], [1.0, -0.5], 0.1, periodic)
        fit.residual_sd = 0.0
        bp = residual_bootstrap_intervals(fit, 20, 0.95, 0.4, "BP", rng=1)
        assert bp.length == 0.0 and bp.method == "offline_BP"
        # BN spreads around the fit value, so the identical refits still leave
        # their common shift in the variance estimate
        bn = residual_bootstrap_intervals(fit, 20, 0.95, 0.4, "BN", rng=1)
        refit = krr_fit(fit.design_points, fit.fitted, 0.1, periodic)
        shift = krr_eval(refit, 0.4) - krr_eval(fit, 0.4)
        half = 1.959963984540054 * abs(shift) * np.sqrt(20 / 19)
        assert bn.length == pytest.approx(2 * half, rel=1e-8)

    def test_refit_count_and_reuse(self, periodic, rng):
        x, y = rng.random(50), rng.normal(size=50)
        fit = krr_fit(x, y, 0.05, periodic)
        a = residual_bootstrap_intervals(fit, 30, 0.9, 0.5, "BN", rng=4, refactor=True)
        b = residual_bootstrap_intervals(fit, 30, 0.9, 0.5, "BN", rng=4, refactor=False)
        assert a.lower == pytest.approx(b.lower, abs=1e-10) and a.upper == pytest.approx(b.upper, abs=1e-10)

    def test_needs_two(self, periodic):
        fit = krr_fit([0.2], [1.0], 0.1, periodic)
        with pytest.raises(InsufficientEnsembleError):
            residual_bootstrap_intervals(fit, 1, 0.95, 0.4)

    def test_unknown_method(self, periodic):
        fit = krr_fit([0.2], [1.0], 0.1, periodic)
        with pytest.raises(ConfigurationError):
            residual_bootstrap_intervals(fit, 5, 0.95, 0.4, "BA")

    def test_coverage_case1(self):
        cfg = ExperimentConfig(n=500, checkpoints=[500])
        lam = effective_regularization(cfg.schedule, 500)
        hits = {"BN": 0, "BP": 0}
        for r in range(100):
            x, y = gen_stream(cfg, r)
            fit = krr_fit(x, y, lam, cfg.basis)
            for m in hits:
                ci = residual_bootstrap_intervals(fit, 200, 0.95, 0.5, m,
                                                  rng=make_rng(child_seed(5, r)), refactor=False)
                hits[m] += ci.covers(truth_eval(1, 0.5))
        for m, h in hits.items():
            assert 0.88 <= h / 100 <= 0.99, (m, h)


class TestEffectiveRegularization:
    def test_krr_vs_sgd(self):
        cfg = ExperimentConfig(n=1000, checkpoints=[1000])
        x, y = gen_stream(cfg, 0)
        lam = effective_regularization(cfg.schedule, 1000)
        fit = krr_fit(x, y, lam, cfg.basis)
        ens = BootstrapEnsemble(cfg.basis, 1, "degenerate", seed=0, with_reference=False)
        ens.ingest_many(x, y, steps(cfg.schedule, 1000, horizon=1000))
        grid = np.linspace(0, 1, 101)
        diff = np.max(np.abs(krr_eval(fit, grid) - ens.eval_averaged(grid)[0]))
        assert diff <= 0.5 * np.max(np.abs(truth_eval(1, grid)))


class TestTimingBench:
    def test_small_run(self):
        rep = timing_bench(BenchConfig(checkpoints=[20, 40, 80], J=5, refit_repeats=1, refit_sizes=5))
        online = [r for r in rep["rows"] if r["method"] == "online"]
        for r in online:
            t = r["t"]
            assert r["op_count"] == 5 * t * (t - 1) // 2 + t * (t - 1) // 2
        assert rep["offline_op_slope"] > 3.5
        lines = cost_report_csv(rep).splitlines()
        assert lines[0] == "t,method,cumulative_seconds,op_count" and len(lines) == 7
        assert "kernel ridge" in rep["config"]["offline_model"]
