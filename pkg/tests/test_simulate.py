import json

import mpmath
import numpy as np
import pytest
from scipy.integrate import quad

from rkhs_streamci.mercer import ConfigurationError, DomainError
from rkhs_streamci.sgd import StateError
from rkhs_streamci.simulate import (
    ExperimentConfig, band_experiment, beta_density, bootstrap_distribution, consistency_check,
    coverage_experiment, gen_stream, harness_basis, kolmogorov_distance, sampling_distribution,
    stable_scale, truth_eval,
)


def mp_beta(p, q, x):
    x = mpmath.mpf(x)
    return x ** (p - 1) * (1 - x) ** (q - 1) / mpmath.beta(p, q)


def tiny(**kw):
    base = dict(n=120, checkpoints=[60, 120], replicates=4, J=20, grid_size=15, workers=1)
    base.update(kw)
    return ExperimentConfig(**base)


class TestBetaDensity:
    def test_uniform(self):
        np.testing.assert_allclose(beta_density(1, 1, np.linspace(0, 1, 5)), 1.0, rtol=1e-14)

    def test_symmetric(self):
        assert beta_density(2, 2, 0.5) == pytest.approx(1.5, rel=1e-14)

    def test_normalised(self):
        total, _ = quad(lambda t: beta_density(10, 5, t), 0, 1, epsabs=1e-13)
        assert total == pytest.approx(1.0, abs=1e-10)
        assert beta_density(10, 5, 0.6) == pytest.approx(float(mp_beta(10, 5, 0.6)), rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            beta_density(2, 2, 1.2)


class TestTruth:
    def test_case1(self):
        assert truth_eval(1, 0.5) == pytest.approx(np.sqrt(2) / 2, rel=1e-15)
        assert truth_eval(1, 0.0) == 0.0

    def test_case2_high_precision(self):
        mpmath.mp.dps = 40
        ref = (mp_beta(10, 5, 0.5) + mp_beta(7, 7, 0.5) + mp_beta(5, 10, 0.5)) / 3
        assert truth_eval(2, 0.5) == pytest.approx(float(ref), rel=1e-13)

    def test_case3_high_precision(self):
        mpmath.mp.dps = 40
        x = 0.37
        ref = mpmath.mpf(6) / 19 * mp_beta(30, 17, x) + mpmath.mpf(4) / 10 * mp_beta(3, 11, x)
        assert truth_eval(3, x) == pytest.approx(float(ref), rel=1e-12)

    def test_unknown_case(self):
        with pytest.raises(ConfigurationError):
            truth_eval(4, 0.5)


class TestGenStream:
    def test_noiseless(self):
        cfg = tiny(sigma2=0.0)
        x, y = gen_stream(cfg, 3)
        np.testing.assert_array_equal(y, truth_eval(1, x))

    def test_noise_moments(self):
        cfg = ExperimentConfig(n=100_000, checkpoints=[100_000], sigma2=0.2)
        x, y = gen_stream(cfg, 0)
        r = y - truth_eval(1, x)
        assert abs(r.mean()) <= 4 * np.sqrt(0.2 / 1e5)
        assert abs(r.var(ddof=1) - 0.2) <= 0.01
        assert 0 <= x.min() and x.max() < 1

    def test_deterministic(self):
        a, b = gen_stream(tiny(), 2), gen_stream(tiny(), 2)
        np.testing.assert_array_equal(a[0], b[0])
        assert not np.array_equal(gen_stream(tiny(), 3)[0], a[0])
        assert not np.array_equal(gen_stream(tiny(master_seed=1), 2)[0], a[0])


class TestConfig:
    @pytest.mark.parametrize("kw", [
        dict(checkpoints=[200]), dict(checkpoints=[100, 50]), dict(replicates=0),
        dict(level=1.0), dict(case_id=7), dict(sigma2=-0.1), dict(eval_points=[1.5]),
    ])
    def test_rejects(self, kw):
        with pytest.raises(ConfigurationError):
            tiny(**kw)

    def test_round_trip(self):
        cfg = tiny(eval_points=[0.2, 0.8], law="twopoint")
        again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
        assert again.to_dict() == cfg.to_dict()

    def test_harness_defaults(self):
        b = harness_basis()
        assert b.pairing == "cosine" and b.include_constant and b.truncation == 200
        assert stable_scale(b) == pytest.approx(1 / b.sup_diag())


class TestCoverageExperiment:
    def test_single_replicate(self):
        rep = coverage_experiment(tiny(replicates=1))
        assert rep.coverage("normal") in (0.0, 1.0)
        assert rep.coverage("percentile", 60) in (0.0, 1.0)

    def test_degenerate_zero_width(self):
        rep = coverage_experiment(tiny(sigma2=0.0, law="degenerate", eval_points=[0.3, 0.7]))
        lengths = [r["length"] for r in rep.records]
        np.testing.assert_array_equal(lengths, 0.0)
        assert rep.coverage("normal") == 0.0

    def test_reproducible_and_thread_independent(self):
        a = coverage_experiment(tiny())
        b = coverage_experiment(tiny(workers=3))
        strip = lambda recs: [{k: v for k, v in r.items() if k != "seconds"} for r in recs]
        assert strip(a.records) == strip(b.records)

    def test_summary_shape(self):
        rep = coverage_experiment(tiny())
        s = rep.summary()
        assert {(r["checkpoint"], r["method"]) for r in s} == {
            (60, "normal"), (60, "percentile"), (120, "normal"), (120, "percentile")}
        for row in s:
            assert 0 <= row["coverage"] <= 1 and row["mean_length"] >= 0
        assert rep.to_csv().splitlines()[0] == "replicate,checkpoint,method,covered,length,seconds"
        assert json.loads(rep.to_json())["schema"] == "coverage-report/1"

    def test_errors_recorded(self, monkeypatch):
        import rkhs_streamci.simulate as sim
        orig = sim._run_replicate

        def flaky(config, r, band):
            if r == 1:
                raise FloatingPointError("overflow")
            return orig(config, r, band)

        monkeypatch.setattr(sim, "_run_replicate", flaky)
        rep = coverage_experiment(tiny())
        assert rep.aborted == 1 and rep.errors[0]["replicate"] == 1
        assert {r["replicate"] for r in rep.records} == {0, 2, 3}


class TestBandExperiment:
    def test_degenerate_bias_only(self):
        rep = band_experiment(tiny(sigma2=0.0, law="degenerate"))
        assert rep.coverage("band_symmetric") == 0.0
        np.testing.assert_array_equal([r["length"] for r in rep.records], 0.0)

    def test_band_wider_than_percentile(self):
        # holds with high probability once J and the grid are moderately large
        rep = band_experiment(tiny(J=200, grid_size=40, checkpoints=[120]))
        assert rep.meta["band_ge_percentile_fraction"] == 1.0


class TestKolmogorov:
    def test_identical(self):
        assert kolmogorov_distance([1, 2, 3], [3, 2, 1]) == 0

    def test_disjoint(self):
        assert kolmogorov_distance([0, 1], [5, 6]) == 1

    def test_half(self):
        assert kolmogorov_distance([0, 1], [1, 2]) == pytest.approx(0.5)

    def test_empty(self):
        with pytest.raises(StateError):
            kolmogorov_distance([], [1.0])

    def test_same_law_small(self):
        rng = np.random.default_rng(0)
        assert kolmogorov_distance(rng.normal(size=4000), rng.normal(size=4000)) < 0.05


class TestDistributions:
    def test_sampling_distribution_reproducible(self):
        cfg = tiny()
        np.testing.assert_array_equal(sampling_distribution(cfg, 0.4, 3), sampling_distribution(cfg, 0.4, 3))

    def test_bootstrap_center_matches_sampling(self):
        cfg = tiny()
        center, draws = bootstrap_distribution(cfg, 0.4, replicate_index=2)
        assert center == pytest.approx(sampling_distribution(cfg, 0.4, 3)[2], abs=1e-13)
        assert draws.shape == (20,)

    def test_consistency_keys(self):
        out = consistency_check(tiny(), 0.5, mc_replicates=10)
        assert set(out) == {"n", "z0", "J", "mc_replicates", "kolmogorov", "mc_sd", "bootstrap_sd"}
        assert 0 <= out["kolmogorov"] <= 1
