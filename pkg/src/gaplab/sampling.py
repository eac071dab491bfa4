"""Data-set generation under three sampling protocols.

IIDFresh draws train and test independently from the population and is the
default for every identity check (those need exact train/test independence).
The two pool modes mimic fixed-corpus experiments: a pool of i.i.d. samples is
materialized once from ``pool_seed`` and every replication either re-splits it
(DataSplitting, disjoint) or re-draws from it without replacement
(RandomSampling, overlap allowed).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .models import LossModel

IID_FRESH = "iid_fresh"
DATA_SPLITTING = "data_splitting"
RANDOM_SAMPLING = "random_sampling"
_MODES = (IID_FRESH, DATA_SPLITTING, RANDOM_SAMPLING)


def rng_from_seed(seed: int, *extra) -> np.random.Generator:
    """Deterministic generator keyed by a 64-bit seed plus optional stream tags."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, extra)]))


@dataclass(frozen=True)
class SamplingMode:
    mode: str = IID_FRESH
    pool_size: Optional[int] = None
    pool_seed: int = 0  # the pool is fixed across replications, like a frozen corpus

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"unknown sampling mode {self.mode!r}; choices: {_MODES}")
        if self.mode != IID_FRESH and (self.pool_size is None or self.pool_size < 1):
            raise ValueError(f"{self.mode} requires a positive pool_size")


@dataclass(frozen=True)
class DataSetPair:
    train: np.ndarray
    test: np.ndarray
    mode: SamplingMode
    seed: int

    @property
    def n_train(self) -> int:
        return self.train.shape[0]

    @property
    def n_test(self) -> int:
        return self.test.shape[0]


def sample_dataset(model: LossModel, mode: SamplingMode, n_train: int, n_test: int,
                   seed: int) -> DataSetPair:
    """Draw one train/test pair; deterministic given (mode, sizes, seed)."""
    if n_train < 1 or n_test < 1:
        raise ValueError("n_train and n_test must be positive")
    if mode.mode == IID_FRESH:
        train = model.sample(n_train, rng_from_seed(seed, 0))
        test = model.sample(n_test, rng_from_seed(seed, 1))
        return DataSetPair(train, test, mode, seed)

    if n_train + n_test > mode.pool_size:
        raise ValueError(f"n_train + n_test = {n_train + n_test} exceeds pool size {mode.pool_size}")
    pool = model.sample(mode.pool_size, rng_from_seed(mode.pool_seed, 2))
    rng = rng_from_seed(seed, 3)
    if mode.mode == DATA_SPLITTING:
        if n_train + n_test != mode.pool_size:
            raise ValueError("data splitting must partition the pool exactly")
        perm = rng.permutation(mode.pool_size)
        return DataSetPair(pool[perm[:n_train]], pool[perm[n_train:]], mode, seed)
    # random sampling: two independent without-replacement draws from the pool
    train_idx = rng.choice(mode.pool_size, size=n_train, replace=False)
    test_idx = rng.choice(mode.pool_size, size=n_test, replace=False)
    return DataSetPair(pool[train_idx], pool[test_idx], mode, seed)


def resample_datasets(model: LossModel, mode: SamplingMode, n_train: int, n_test: int,
                      m: int, base_seed: int) -> list[DataSetPair]:
    """m replications with seeds base_seed .. base_seed + m - 1."""
    if m < 1:
        raise ValueError("m must be >= 1")
    return [sample_dataset(model, mode, n_train, n_test, base_seed + j) for j in range(m)]
