"""Expected-degree growth: bound recursions, simulation, tail slope.

The expected degree of node k admits lower and upper envelopes built by
recursion from E[d_{k,k}] = 1:

    lower(t+1) = lower(t) * (2at + b - a + r) / (2at + b - 2a + r)
    upper(t+1) = upper(t) * (2at + b - a) / (2at + b - 2a)
                          * exp(tau^(t-k+1) / (2at + b - 2a))

with a = alpha, b = beta, r = tau / (1 - tau).  Both grow like
(t / k)^(1/2); the upper envelope carries an extra constant
C = exp(sum of the correction exponents), capped by exp(tau / (1 - tau)).
The upper sequence is accumulated in log space because its factors sit
within rounding of 1 for large t.

The Monte-Carlo side simulates threads and tracks node k's degree on a
geometric time grid, and ``tail_exponent`` fits the log-log slope of a
degree CCDF above a cutoff.  The slope is a diagnostic, not an estimator;
the envelopes are too loose to invert for tau.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .attractiveness import ModelSpec
from .generator import GenConfig, generate_dataset

__all__ = [
    "DegreeBounds",
    "DegreeCurve",
    "TailEstimate",
    "degree_bound_sequences",
    "monte_carlo_degree_mean",
    "tail_exponent",
    "correction_cap",
    "write_comparison_csv",
]


def correction_cap(tau: float) -> float:
    """Upper limit exp(tau / (1 - tau)) of the envelope constant C."""
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly inside (0, 1)")
    return math.exp(tau / (1.0 - tau))


@dataclass(frozen=True)
class DegreeBounds:
    """Lower and upper expected-degree envelopes for one node index.

    ``t`` runs from k to t_max inclusive; ``correction`` is the iterated
    constant C at t_max.
    """

    alpha: float
    tau: float
    beta: float
    k: int
    t: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    correction: float

    @property
    def t_max(self) -> int:
        return int(self.t[-1])

    @property
    def scaled_lower(self) -> np.ndarray:
        """lower(t) * (k / t)^(1/2); stabilizes to a constant as t grows."""
        return self.lower * np.sqrt(self.k / self.t)

    def value_at(self, times) -> tuple[np.ndarray, np.ndarray]:
        """(lower, upper) at the requested times (each in [k, t_max])."""
        times = np.asarray(times, dtype=np.int64)
        if times.min() < self.k or times.max() > self.t_max:
            raise ValueError("requested times fall outside [k, t_max]")
        idx = times - self.k
        return self.lower[idx], self.upper[idx]


def degree_bound_sequences(
    alpha: float, tau: float, beta: float, k: int, t_max: int
) -> DegreeBounds:
    """Iterate both envelope recursions from 1 at t = k."""
    if alpha <= 0.0:
        raise ValueError("envelopes are undefined at alpha = 0")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie strictly inside (0, 1)")
    if beta < 0.0:
        raise ValueError("beta must be nonnegative")
    if k < 2:
        raise ValueError("k must be >= 2 (the root's degree is not tracked)")
    if t_max < k:
        raise ValueError("t_max must be >= k")

    s = np.arange(k, t_max, dtype=np.float64)
    shift = tau / (1.0 - tau)
    den = 2.0 * alpha * s + beta - 2.0 * alpha
    num = den + alpha

    lower = np.empty(t_max - k + 1, dtype=np.float64)
    lower[0] = 1.0
    np.cumprod((num + shift) / (den + shift), out=lower[1:])

    with np.errstate(under="ignore"):
        tau_pow = np.power(tau, np.arange(1, t_max - k + 1, dtype=np.float64))
    corrections = tau_pow / den
    log_upper = np.empty(t_max - k + 1, dtype=np.float64)
    log_upper[0] = 0.0
    np.cumsum(np.log(num / den) + corrections, out=log_upper[1:])

    return DegreeBounds(
        alpha=alpha,
        tau=tau,
        beta=beta,
        k=k,
        t=np.arange(k, t_max + 1, dtype=np.int64),
        lower=lower,
        upper=np.exp(log_upper),
        correction=float(np.exp(corrections.sum())),
    )


@dataclass(frozen=True)
class DegreeCurve:
    """Simulated mean degree of node k on a geometric time grid."""

    k: int
    replicates: int
    t: np.ndarray
    mean: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray


def _default_grid(k: int, t_max: int, points: int = 48) -> np.ndarray:
    return np.unique(np.geomspace(k, t_max, points).astype(np.int64))


def monte_carlo_degree_mean(
    spec: ModelSpec,
    k: int,
    t_max: int,
    replicates: int,
    *,
    rng_seed: int = 0,
    t_grid=None,
    jobs: int = 1,
) -> DegreeCurve:
    """Simulate threads of t_max nodes and track node k's mean degree.

    The degree at time t counts the birth edge plus attachments decided
    strictly before time t, matching the envelope recursions' d_{k,t}.
    The confidence band is the normal-approximation 95% interval of the
    mean over replicates.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if t_max < k:
        raise ValueError("t_max must be >= k")
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    grid = _default_grid(k, t_max) if t_grid is None else np.asarray(t_grid, dtype=np.int64)
    if grid.min() < k or grid.max() > t_max:
        raise ValueError("t_grid must lie within [k, t_max]")

    data = generate_dataset(
        spec,
        GenConfig(count=replicates, rng_seed=rng_seed, sizes=[t_max] * replicates),
        jobs=jobs,
    )
    concat = data.parents_concat
    offsets = data.offsets
    total = np.zeros(len(grid), dtype=np.float64)
    total_sq = np.zeros(len(grid), dtype=np.float64)
    for i in range(replicates):
        parents = concat[offsets[i]:offsets[i + 1]]
        # attachment times of node k: steps s with parent k happen at s >= k
        occ = np.flatnonzero(parents == k) + 1
        curve = 1.0 + np.searchsorted(occ, grid - 1, side="right")
        total += curve
        total_sq += curve * curve
    mean = total / replicates
    if replicates > 1:
        var = (total_sq - replicates * mean * mean) / (replicates - 1)
        half = 1.96 * np.sqrt(np.maximum(var, 0.0) / replicates)
    else:
        half = np.zeros_like(mean)
    return DegreeCurve(
        k=k,
        replicates=replicates,
        t=grid,
        mean=mean,
        ci_low=mean - half,
        ci_high=mean + half,
    )


@dataclass(frozen=True)
class TailEstimate:
    """Least-squares log-log slope of a CCDF tail."""

    slope: float
    intercept: float
    n_points: int
    x_min: float


def tail_exponent(ccdf_table, x_min: float) -> TailEstimate:
    """Fit log P(X >= x) = slope * log x + intercept over x >= x_min.

    Accepts a mapping value -> ccdf or an iterable of (value, ccdf) pairs
    with at least 10 positive-mass support points in the tail.
    """
    items = ccdf_table.items() if hasattr(ccdf_table, "items") else ccdf_table
    xs, ys = [], []
    for x, c in items:
        if x >= x_min and c > 0.0:
            xs.append(float(x))
            ys.append(float(c))
    if len(xs) < 10:
        raise ValueError(
            f"tail has {len(xs)} support points at x >= {x_min}; need at least 10"
        )
    slope, intercept = np.polyfit(np.log(xs), np.log(ys), 1)
    return TailEstimate(
        slope=float(slope), intercept=float(intercept), n_points=len(xs), x_min=x_min
    )


def write_comparison_csv(path, bounds: DegreeBounds, curve: DegreeCurve) -> None:
    """Join envelopes and simulation on the curve's time grid."""
    if curve.k != bounds.k:
        raise ValueError("bounds and curve track different node indices")
    lower, upper = bounds.value_at(curve.t)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "lower", "upper", "empirical_mean", "ci_low", "ci_high"])
        for i in range(len(curve.t)):
            w.writerow(
                [
                    int(curve.t[i]),
                    lower[i],
                    upper[i],
                    curve.mean[i],
                    curve.ci_low[i],
                    curve.ci_high[i],
                ]
            )
