import math

import numpy as np
import pytest

from threadlik import (
    GenConfig,
    ModelSpec,
    ThreadDataset,
    generate_dataset,
    lognormal_size_histogram,
)

# Slashdot-like reference point used across the suite: alpha 0.31, tau 0.98,
# log beta 2.39.
SLASHDOT_ALPHA = 0.31
SLASHDOT_TAU = 0.98
SLASHDOT_LOG_BETA = 2.39


@pytest.fixture(scope="session")
def slashdot_spec() -> ModelSpec:
    return ModelSpec.full(SLASHDOT_ALPHA, SLASHDOT_TAU, math.exp(SLASHDOT_LOG_BETA))


@pytest.fixture(scope="session")
def size_surrogate() -> dict[int, float]:
    return lognormal_size_histogram(25.0, 1.0)


@pytest.fixture(scope="session")
def small_corpus(slashdot_spec, size_surrogate) -> ThreadDataset:
    """300 threads, a few thousand nodes; enough signal to fit reliably."""
    return generate_dataset(
        slashdot_spec, GenConfig(count=300, rng_seed=101, size_histogram=size_surrogate)
    )


@pytest.fixture(scope="session")
def hand_threads() -> list[list[int]]:
    """Small explicit parent vectors covering the structural corner cases."""
    return [
        [],             # root only
        [1],            # one reply
        [1, 1],         # star of 3
        [1, 2],         # chain of 3
        [1, 1, 2],      # mixed
        [1, 2, 3, 4],   # chain of 5
        [1, 1, 1, 1],   # star of 5
        [1, 2, 1, 3, 3],
    ]


@pytest.fixture(scope="session")
def hand_dataset(hand_threads) -> ThreadDataset:
    return ThreadDataset(hand_threads, source_label="hand")


@pytest.fixture()
def rng() -> np.random.Generator:
    return np.random.default_rng(2024)
