"""Tests for the Latin hypercube design and the synthetic data generator."""

import numpy as np
import pytest

from fosem.curves import eval_bspline
from fosem.data import TrainingData
from fosem.emulator import DEFAULT_IC_RANGES, IC_NAMES
from fosem.errors import DataValidationError, InvalidParameterError
from fosem.experiment import Design, TruthGenerator, lhs_design, synth_generate


def unit_coords(design: Design):
    lo = np.array([design.ranges[n][0] for n in IC_NAMES])
    hi = np.array([design.ranges[n][1] for n in IC_NAMES])
    return (design.ics - lo) / (hi - lo)


class TestLhsDesign:
    @pytest.mark.parametrize("n", [1, 10, 75])
    def test_within_ranges(self, n):
        d = lhs_design(n, seed=1)
        for k, name in enumerate(IC_NAMES):
            lo, hi = DEFAULT_IC_RANGES[name]
            assert np.all(d.ics[:, k] >= lo)
            assert np.all(d.ics[:, k] <= hi)

    @pytest.mark.parametrize("n", [2, 10, 75])
    def test_stratification(self, n):
        # exactly one point per equal-width bin in every dimension
        d = lhs_design(n, seed=3)
        unit = unit_coords(d)
        for k in range(5):
            bins = np.floor(unit[:, k] * n).astype(int)
            assert sorted(bins) == list(range(n))

    def test_single_point(self):
        d = lhs_design(1, seed=5)
        assert d.ics.shape == (1, 5)

    def test_deterministic_given_seed(self):
        a = lhs_design(20, seed=7)
        b = lhs_design(20, seed=7)
        np.testing.assert_array_equal(a.ics, b.ics)
        c = lhs_design(20, seed=8)
        assert np.any(c.ics != a.ics)

    def test_maximin_beats_single_candidate(self):
        def min_dist(d):
            u = unit_coords(d)
            diff = u[:, None, :] - u[None, :, :]
            dist = np.sum(diff * diff, axis=-1)
            dist[np.diag_indices(u.shape[0])] = np.inf
            return dist.min()

        best = lhs_design(30, seed=9, candidates=50)
        single = lhs_design(30, seed=9, candidates=1)
        assert min_dist(best) >= min_dist(single)

    def test_degenerate_ranges_rejected(self):
        bad = dict(DEFAULT_IC_RANGES)
        bad["height"] = (5.0, 5.0)
        with pytest.raises(InvalidParameterError):
            lhs_design(10, ranges=bad)

    def test_run_ids_one_based(self):
        d = lhs_design(4, seed=11)
        np.testing.assert_array_equal(d.run_ids, [1, 2, 3, 4])


class TestSynthGenerate:
    def test_noise_free_series_ends_at_failure(self):
        design = lhs_design(6, seed=13)
        gen = TruthGenerator(jitter_sd=0.0)
        gen.coef[-1, :] = [-80.0, 0, 0, 0, 0, 0]  # sigma ~ 0
        gen.coef[3, :] = [np.log(50.0), 0, 0, 0, 0, 0]  # omega = 50 for all runs
        series, truth = synth_generate(design, gen, seed=13)
        for s in series:
            p = truth.params[s.run_id]
            assert p.omega == pytest.approx(50.0)
            # exactly the yearly points where the curve is positive
            assert s.years[-1] == 49.0
            assert np.all(eval_bspline(p, s.years) > 0)
            assert truth.rho_true[s.run_id] == 50.0
            assert not s.censored

    def test_long_lived_runs_censored_at_horizon(self):
        design = lhs_design(5, seed=17)
        gen = TruthGenerator(jitter_sd=0.0)
        gen.coef[3, :] = [np.log(300.0), 0, 0, 0, 0, 0]
        gen.coef[-1, :] = [np.log(0.01), 0, 0, 0, 0, 0]
        series, truth = synth_generate(design, gen, horizon=184, seed=17)
        for s in series:
            assert s.censored
            assert s.years[-1] == 184.0
            assert truth.rho_true[s.run_id] is None

    def test_deterministic_given_seed(self):
        design = lhs_design(8, seed=19)
        s1, _ = synth_generate(design, seed=23)
        s2, _ = synth_generate(design, seed=23)
        assert len(s1) == len(s2)
        for a, b in zip(s1, s2):
            np.testing.assert_array_equal(a.fos, b.fos)
            np.testing.assert_array_equal(a.years, b.years)

    def test_truth_respects_constraints(self):
        design = lhs_design(40, seed=29)
        _, truth = synth_generate(design, seed=29)
        for p in truth.params.values():
            assert p.gamma0 > 0 and p.gamma1 > 0 and p.gamma2 > 0
            assert p.A2 <= p.A1

    def test_short_runs_dropped_and_recorded(self):
        design = lhs_design(6, seed=31)
        gen = TruthGenerator(jitter_sd=0.0)
        gen.coef[3, :] = [np.log(3.0), 0, 0, 0, 0, 0]  # fail by year 3
        gen.coef[-1, :] = [-80.0, 0, 0, 0, 0, 0]
        series, truth = synth_generate(design, gen, seed=31)
        assert series == []
        assert sorted(truth.dropped_run_ids) == list(range(1, 7))

    def test_feeds_training_data(self):
        design = lhs_design(10, seed=37)
        series, _ = synth_generate(design, seed=37)
        train = TrainingData.from_series(series, design.row_map())
        assert train.n_runs == len(series)
        assert train.n_obs == sum(len(s) for s in series)
        assert train.z.shape == (train.n_runs, 5)


class TestTrainingDataValidation:
    def test_short_series_rejected_with_all_ids(self):
        design = lhs_design(3, seed=41)
        series, _ = synth_generate(design, seed=41)
        series[0].years = series[0].years[:3]
        series[0].fos = series[0].fos[:3]
        series[1].years = series[1].years[:2]
        series[1].fos = series[1].fos[:2]
        with pytest.raises(DataValidationError) as exc:
            TrainingData.from_series(series, design.row_map())
        msg = str(exc.value)
        assert f"run {series[0].run_id}" in msg
        assert f"run {series[1].run_id}" in msg

    def test_missing_design_row_rejected(self):
        design = lhs_design(3, seed=43)
        series, _ = synth_generate(design, seed=43)
        rows = design.row_map()
        del rows[series[0].run_id]
        with pytest.raises(DataValidationError):
            TrainingData.from_series(series, rows)

    def test_empty_dataset_allowed(self):
        train = TrainingData.empty()
        assert train.n_runs == 0
        assert train.n_obs == 0
