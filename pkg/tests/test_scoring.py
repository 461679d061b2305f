"""Tests for MSE, CRPS, and the paired model comparison."""

import math

import numpy as np
import pytest

from fosem.errors import DataValidationError
from fosem.scoring import (
    ModelScores,
    RunScores,
    boxplot_summary,
    compare_models,
    crps_empirical,
    crps_gaussian,
    mse,
)


def crps_naive(samples, x):
    """Quadratic-time double-sum estimator (independent oracle)."""
    samples = np.asarray(samples, dtype=float)
    m = samples.size
    t1 = np.abs(samples - x).mean()
    t2 = np.abs(samples[:, None] - samples[None, :]).sum() / (2.0 * m * m)
    return t1 - t2


class TestMse:
    def test_perfect_prediction(self):
        per_time, mean = mse(np.arange(5.0), np.arange(5.0))
        np.testing.assert_array_equal(per_time, 0.0)
        assert mean == 0.0

    def test_constant_offset(self):
        obs = np.linspace(1.0, 2.0, 7)
        per_time, mean = mse(obs + 0.3, obs)
        np.testing.assert_allclose(per_time, 0.09, rtol=1e-12)
        assert mean == pytest.approx(0.09)

    def test_matches_naive_recomputation(self):
        rng = np.random.default_rng(5)
        pred = rng.normal(size=40)
        obs = rng.normal(size=40)
        per_time, mean = mse(pred, obs)
        naive = np.array([(p - o) ** 2 for p, o in zip(pred, obs)])
        np.testing.assert_allclose(per_time, naive, atol=1e-14)
        assert mean == pytest.approx(naive.mean(), abs=1e-14)

    def test_misaligned_grids_rejected(self):
        with pytest.raises(DataValidationError):
            mse(np.zeros(4), np.zeros(5))


class TestCrpsEmpirical:
    def test_point_mass_forecast(self):
        assert crps_empirical(np.full(10, 2.5), 1.0) == pytest.approx(1.5)

    def test_two_samples_hand_evaluated(self):
        # (1 + 1)/2 - (1/8)(0 + 2 + 2 + 0) = 0.5
        assert crps_empirical([0.0, 2.0], 1.0) == pytest.approx(0.5)

    def test_sorted_form_matches_double_sum(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            samples = rng.normal(rng.normal(), rng.uniform(0.5, 2.0), size=2000)
            x = rng.normal()
            assert crps_empirical(samples, x) == pytest.approx(
                crps_naive(samples, x), abs=1e-10)

    def test_converges_to_gaussian_closed_form(self):
        rng = np.random.default_rng(13)
        samples = rng.standard_normal(100000)
        est = crps_empirical(samples, 0.0)
        assert est == pytest.approx(crps_gaussian(0.0, 1.0, 0.0), rel=0.01)

    def test_convergence_rate(self):
        # error shrinks roughly like 1/sqrt(M) across three decades
        rng = np.random.default_rng(17)
        target = crps_gaussian(0.0, 1.0, 0.3)
        errs = []
        for m in (10**3, 10**4, 10**5):
            reps = [abs(crps_empirical(rng.standard_normal(m), 0.3) - target)
                    for _ in range(5)]
            errs.append(np.mean(reps))
        assert errs[2] < errs[0]
        assert errs[2] < 0.01 * target + 1e-3

    def test_nonnegative(self):
        rng = np.random.default_rng(19)
        for _ in range(200):
            samples = rng.normal(size=rng.integers(2, 50))
            assert crps_empirical(samples, rng.normal()) >= 0.0

    def test_empty_rejected(self):
        with pytest.raises(DataValidationError):
            crps_empirical([], 0.0)


class TestCrpsGaussian:
    def test_centre_value(self):
        # sigma * (2 phi(0) - 1/sqrt(pi)) ~ 0.23370 sigma
        assert crps_gaussian(0.0, 1.0, 0.0) == pytest.approx(0.233695, abs=1e-5)
        assert crps_gaussian(3.0, 2.0, 3.0) == pytest.approx(2 * 0.233695, abs=2e-5)

    def test_far_observation_limit(self):
        # for |x - mu| >> sigma the score approaches |x - mu| minus a
        # constant (sigma/sqrt(pi)), so the ratio tends to one
        val = crps_gaussian(0.0, 1.0, 50.0)
        assert val == pytest.approx(50.0 - 1.0 / math.sqrt(math.pi), abs=1e-9)
        assert val / 50.0 == pytest.approx(1.0, rel=0.02)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            mu, sigma, x = rng.normal(), rng.uniform(0.2, 3.0), rng.normal()
            a = rng.uniform(0.1, 10.0)
            assert crps_gaussian(a * mu, a * sigma, a * x) == pytest.approx(
                a * crps_gaussian(mu, sigma, x), rel=1e-12)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(DataValidationError):
            crps_gaussian(0.0, 0.0, 1.0)


def _model_scores(name, rng, run_ids, shift=0.0):
    ms = ModelScores(name)
    for rid in run_ids:
        years = np.arange(1.0, 11.0)
        ms.add(RunScores(rid, years, rng.random(10) + shift, rng.random(10) + shift))
    return ms


class TestCompareModels:
    def test_identical_models_give_zero_differences(self):
        rng = np.random.default_rng(29)
        a = _model_scores("quadratic", rng, [1, 2, 3])
        b = ModelScores("bspline", dict(a.runs))
        table = compare_models(a, b)
        for rid in table.run_ids:
            np.testing.assert_array_equal(table.mse_diff[rid], 0.0)
            np.testing.assert_array_equal(table.crps_diff[rid], 0.0)
            assert table.boxplots[rid]["crps"]["median"] == 0.0

    def test_antisymmetric_under_swap(self):
        rng = np.random.default_rng(31)
        a = _model_scores("quadratic", rng, [1, 2])
        b = _model_scores("bspline", rng, [1, 2])
        t1 = compare_models(a, b)
        t2 = compare_models(b, a)
        for rid in t1.run_ids:
            np.testing.assert_allclose(t1.crps_diff[rid], -t2.crps_diff[rid])
            np.testing.assert_allclose(t1.mse_diff[rid], -t2.mse_diff[rid])

    def test_run_mismatch_rejected(self):
        rng = np.random.default_rng(37)
        a = _model_scores("quadratic", rng, [1, 2])
        b = _model_scores("bspline", rng, [1, 3])
        with pytest.raises(DataValidationError):
            compare_models(a, b)

    def test_grid_mismatch_rejected(self):
        rng = np.random.default_rng(41)
        a = _model_scores("quadratic", rng, [1])
        b = _model_scores("bspline", rng, [1])
        b.runs[1].years = b.runs[1].years + 1.0
        with pytest.raises(DataValidationError):
            compare_models(a, b)


class TestBoxplotSummary:
    def test_quartiles_and_whiskers(self):
        values = np.array([1.0, 2.0, 3.0, 4.0, 5.0, 100.0])
        box = boxplot_summary(values)
        assert box["q1"] == pytest.approx(np.percentile(values, 25))
        assert box["q3"] == pytest.approx(np.percentile(values, 75))
        assert box["whisker_hi"] == 5.0  # 100 is an outlier
        assert box["n_outliers"] == 1
