"""Synthetic thread sampling from any model variant.

Sizes are imposed exogenously (explicit list or draws from an empirical
size histogram); the growth process itself only decides who replies to
whom.  Each attachment step consumes exactly one uniform and inverts the
attachment distribution in closed form per attractiveness component, so a
step costs O(1) regardless of thread size.

Reproducibility rule: a dataset is generated in fixed blocks of
``BLOCK_THREADS`` threads.  Sizes are drawn from
``SeedSequence(rng_seed, spawn_key=(0,))`` and block i consumes uniforms
from ``SeedSequence(rng_seed, spawn_key=(1, i))``, so output is
byte-identical for a given seed regardless of worker count.
"""

from __future__ import annotations

import math
from collections.abc import Mapping, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

from . import _kernels as kernels
from .attractiveness import ModelSpec, StepContext, step_probabilities
from .thread_core import ParentVector, ThreadDataset

__all__ = [
    "BLOCK_THREADS",
    "GenConfig",
    "generate_thread",
    "generate_dataset",
    "exact_shape_distribution",
    "lognormal_size_histogram",
]

# threads per RNG block; part of the reproducibility contract
BLOCK_THREADS = 1024


@dataclass(frozen=True)
class GenConfig:
    """How many threads to draw and where their sizes come from.

    Exactly one of ``sizes`` (explicit per-thread node counts, length must
    equal ``count``) or ``size_histogram`` (size -> weight to sample from)
    must be given.
    """

    count: int
    rng_seed: int
    sizes: Sequence[int] | None = None
    size_histogram: Mapping[int, float] | None = None

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")
        if (self.sizes is None) == (self.size_histogram is None):
            raise ValueError("give exactly one of sizes or size_histogram")
        if self.sizes is not None:
            arr = np.asarray(self.sizes, dtype=np.int64)
            if len(arr) != self.count:
                raise ValueError(f"{len(arr)} sizes given for count={self.count}")
            if len(arr) == 0 or arr.min() < 1:
                raise ValueError("sizes must be >= 1")
        else:
            hist = self.size_histogram
            if not hist:
                raise ValueError("size histogram is empty")
            if any(int(s) != s or s < 1 for s in hist):
                raise ValueError("histogram sizes must be integers >= 1")
            if any(w < 0 for w in hist.values()) or sum(hist.values()) <= 0:
                raise ValueError("histogram weights must be nonnegative with positive sum")


def generate_thread(spec: ModelSpec, size: int, rng: np.random.Generator) -> ParentVector:
    """Sample one thread of the given node count from ``rng``.

    The first comment always replies to the root; a root-only thread
    (size 1) consumes no randomness.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    u = rng.random(max(size - 2, 0))
    out = kernels.sample_block(np.asarray([size], dtype=np.int64), spec.alpha, spec.tau, spec.beta, u)
    return ParentVector(out)


def _draw_sizes(config: GenConfig) -> np.ndarray:
    if config.sizes is not None:
        return np.asarray(config.sizes, dtype=np.int64)
    hist = config.size_histogram
    values = np.asarray(sorted(int(s) for s in hist), dtype=np.int64)
    weights = np.asarray([float(hist[int(v)]) for v in values], dtype=np.float64)
    weights = weights / weights.sum()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.rng_seed, spawn_key=(0,))))
    return rng.choice(values, size=config.count, p=weights)


def _sample_one_block(args) -> np.ndarray:
    alpha, tau, beta, sizes, rng_seed, block_index = args
    ss = np.random.SeedSequence(rng_seed, spawn_key=(1, block_index))
    rng = np.random.Generator(np.random.PCG64(ss))
    n_draws = int(np.maximum(sizes - 2, 0).sum())
    u = rng.random(n_draws)
    return kernels.sample_block(sizes, alpha, tau, beta, u)


def generate_dataset(spec: ModelSpec, config: GenConfig, jobs: int = 1) -> ThreadDataset:
    """Sample ``config.count`` independent threads under ``spec``."""
    sizes = _draw_sizes(config)
    n_blocks = (len(sizes) + BLOCK_THREADS - 1) // BLOCK_THREADS
    tasks = [
        (
            spec.alpha,
            spec.tau,
            spec.beta,
            sizes[i * BLOCK_THREADS : (i + 1) * BLOCK_THREADS],
            config.rng_seed,
            i,
        )
        for i in range(n_blocks)
    ]
    if jobs > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_sample_one_block, tasks, chunksize=4))
    else:
        chunks = [_sample_one_block(t) for t in tasks]
    concat = np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int32)
    return ThreadDataset.from_arrays(
        concat,
        sizes - 1,
        source_label=f"synthetic:{spec.variant.value}",
        validate=False,
    )


def exact_shape_distribution(spec: ModelSpec, size: int) -> dict[tuple[int, ...], float]:
    """Probability of every parent vector of the given thread size.

    Brute-force product of the step probabilities over all
    ``prod(t for t in 2..size-1)`` vectors; intended as the enumeration
    oracle for sampler tests, so sizes are capped at 9.
    """
    if size < 1:
        raise ValueError("size must be >= 1")
    if size > 9:
        raise ValueError("enumeration is exponential; size capped at 9")
    if size == 1:
        return {(): 1.0}
    shapes: dict[tuple[int, ...], float] = {(1,): 1.0}
    for t in range(2, size):
        nxt: dict[tuple[int, ...], float] = {}
        for prefix, prob in shapes.items():
            p = step_probabilities(spec, StepContext.from_history(prefix))
            for k in range(1, t + 1):
                nxt[prefix + (k,)] = prob * float(p[k - 1])
        shapes = nxt
    return shapes


def lognormal_size_histogram(
    mean_size: float, sigma: float = 1.0, max_size: int | None = None
) -> dict[int, float]:
    """Discretized log-normal surrogate for an empirical size distribution.

    Comment counts c >= 1 follow a log-normal with the location chosen so
    the mean node count (1 + E[c]) is approximately ``mean_size``; sizes
    are 1 + c.  The support is truncated at ``max_size`` (default: six
    sigmas above the median) and renormalized.
    """
    if mean_size <= 2.0:
        raise ValueError("mean_size must exceed 2 (at least one comment on average)")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    mu = math.log(mean_size - 1.0) - 0.5 * sigma * sigma
    if max_size is None:
        max_size = int(math.ceil(math.exp(mu + 6.0 * sigma))) + 1
    cmax = max(max_size - 1, 1)
    edges = np.arange(cmax + 1, dtype=np.float64) + 0.5  # bin c covers [c-.5, c+.5)
    cdf = ndtr((np.log(edges) - mu) / sigma)
    probs = np.diff(cdf)  # mass of c = 1..cmax; the sliver below 0.5 is dropped
    probs /= probs.sum()
    return {c + 1: float(p) for c, p in enumerate(probs, start=1) if p > 0.0}
