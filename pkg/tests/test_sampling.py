"""Sampling-protocol tests: determinism, pool semantics, independence."""

import numpy as np
import pytest

from gaplab.models import GaussianMean
from gaplab.sampling import (DATA_SPLITTING, IID_FRESH, RANDOM_SAMPLING, SamplingMode,
                             resample_datasets, sample_dataset)

MODEL = GaussianMean(0.0, 1.0)


class TestIIDFresh:
    def test_sizes(self):
        pair = sample_dataset(MODEL, SamplingMode(IID_FRESH), 100, 50, seed=1)
        assert pair.n_train == 100 and pair.n_test == 50
        assert len(np.unique(np.concatenate([pair.train, pair.test]))) == 150

    def test_deterministic(self):
        a = sample_dataset(MODEL, SamplingMode(IID_FRESH), 20, 10, seed=9)
        b = sample_dataset(MODEL, SamplingMode(IID_FRESH), 20, 10, seed=9)
        np.testing.assert_array_equal(a.train, b.train)
        np.testing.assert_array_equal(a.test, b.test)

    def test_train_test_statistics_uncorrelated(self):
        # empirical correlation of (train mean, test mean) over replications
        pairs = resample_datasets(MODEL, SamplingMode(IID_FRESH), 25, 25, 1000, 500)
        trains = np.array([p.train.mean() for p in pairs])
        tests = np.array([p.test.mean() for p in pairs])
        corr = np.corrcoef(trains, tests)[0, 1]
        assert abs(corr) < 3.0 / np.sqrt(1000)


class TestDataSplitting:
    MODE = SamplingMode(DATA_SPLITTING, pool_size=60, pool_seed=4)

    def test_disjoint_cover_of_pool(self):
        pair = sample_dataset(MODEL, self.MODE, 50, 10, seed=2)
        merged = np.sort(np.concatenate([pair.train, pair.test]))
        again = sample_dataset(MODEL, self.MODE, 50, 10, seed=77)
        merged2 = np.sort(np.concatenate([again.train, again.test]))
        np.testing.assert_array_equal(merged, merged2)  # same pool, reshuffled
        assert len(np.intersect1d(pair.train, pair.test)) == 0

    def test_partition_must_exhaust_pool(self):
        with pytest.raises(ValueError):
            sample_dataset(MODEL, self.MODE, 40, 10, seed=0)

    def test_pool_fixed_across_seeds(self):
        a = sample_dataset(MODEL, self.MODE, 50, 10, seed=1)
        b = sample_dataset(MODEL, self.MODE, 50, 10, seed=2)
        assert set(np.concatenate([a.train, a.test])) == set(np.concatenate([b.train, b.test]))


class TestRandomSampling:
    def test_overlap_matches_hypergeometric_expectation(self):
        # E|train ∩ test| for without-replacement draws of 50 and 10 from 60
        mode = SamplingMode(RANDOM_SAMPLING, pool_size=60, pool_seed=6)
        n_rep = 10_000
        overlaps = np.empty(n_rep)
        for j in range(n_rep):
            pair = sample_dataset(MODEL, mode, 50, 10, seed=j)
            overlaps[j] = len(np.intersect1d(pair.train, pair.test))
        expected = 10 * 50 / 60
        var = 10 * (50 / 60) * (10 / 60) * (50 / 59)
        assert abs(overlaps.mean() - expected) < 3 * np.sqrt(var / n_rep)

    def test_size_constraint(self):
        mode = SamplingMode(RANDOM_SAMPLING, pool_size=30)
        with pytest.raises(ValueError):
            sample_dataset(MODEL, mode, 25, 10, seed=0)


class TestResample:
    def test_single_replication_matches_sample_dataset(self):
        mode = SamplingMode(IID_FRESH)
        only = resample_datasets(MODEL, mode, 12, 6, 1, base_seed=42)[0]
        direct = sample_dataset(MODEL, mode, 12, 6, seed=42)
        np.testing.assert_array_equal(only.train, direct.train)
        np.testing.assert_array_equal(only.test, direct.test)

    def test_bitwise_repeatable(self):
        mode = SamplingMode(IID_FRESH)
        a = resample_datasets(MODEL, mode, 8, 4, 5, base_seed=3)
        b = resample_datasets(MODEL, mode, 8, 4, 5, base_seed=3)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.train, pb.train)
            np.testing.assert_array_equal(pa.test, pb.test)

    def test_pooled_mean_obeys_clt(self):
        model = GaussianMean(0.25, 1.0)
        pairs = resample_datasets(model, SamplingMode(IID_FRESH), 50, 10, 1000, 17)
        pooled = np.concatenate([p.train for p in pairs])
        se = 1.0 / np.sqrt(pooled.size)
        assert abs(pooled.mean() - 0.25) < 4 * se

    def test_invalid_m(self):
        with pytest.raises(ValueError):
            resample_datasets(MODEL, SamplingMode(IID_FRESH), 5, 5, 0, 0)


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        SamplingMode("bootstrap")
    with pytest.raises(ValueError):
        SamplingMode(DATA_SPLITTING)  # pool modes need a pool size
