"""Full-history negative log-likelihood of a thread dataset and its gradient.

Every thread contributes one factor phi(pi_t) / Z_t per attachment step
t = 2..size-1 (the first step is forced), so

    neg_log_lik = sum over steps of [log Z_t - log phi(pi_t)].

The sums only need, per step, the chosen parent's degree, its novelty age
t - pi_t + 1, the root indicator, and the step time t.  These are pulled
out once per dataset into flat arrays (:class:`FlatSteps`), after which an
evaluation is a few vector passes plus an O(max thread size) sweep over
the distinct step times.  Bootstrap resampling reuses per-thread slices of
the same arrays.

The optimizer works in unconstrained coordinates a = log(alpha),
c = logit(tau), b = log(beta); the chain rule to those coordinates lives
here next to the natural-parameter gradient.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kernels
from .attractiveness import ModelSpec, Variant
from .thread_core import ThreadDataset

__all__ = [
    "FlatSteps",
    "LikelihoodValue",
    "GradientResult",
    "neg_log_likelihood",
    "gradient",
    "params_to_coords",
    "coords_to_params",
    "grad_to_coords",
    "COORD_BOUND",
]

# Box for the unconstrained coordinates.  exp(+-12) spans ~6e-6..1.6e5,
# beyond which parameters are indistinguishable from their limits at
# likelihood precision.  The box must stay this tight: at a far-out corner
# every coordinate derivative is exp-suppressed, and a quasi-Newton step
# that lands there would satisfy the gradient test and fake convergence.
COORD_BOUND = 12.0


@dataclass(frozen=True)
class FlatSteps:
    """Per-step arrays of every sampled attachment event in a dataset.

    ``cnt[j]`` is the number of earlier steps in the same thread choosing
    the same parent (degree at step j is ``1 + cnt[j]``), ``age[j]`` the
    novelty exponent, ``tt[j]`` the step time, ``t_counts[t]`` the number
    of steps at time t across the dataset, and ``step_offsets`` per-thread
    [start, end) ranges.
    """

    cnt: np.ndarray = field(repr=False)
    age: np.ndarray = field(repr=False)
    isroot: np.ndarray = field(repr=False)
    tt: np.ndarray = field(repr=False)
    t_counts: np.ndarray = field(repr=False)
    step_offsets: np.ndarray = field(repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.cnt)

    @property
    def n_threads(self) -> int:
        return len(self.step_offsets) - 1

    @classmethod
    def from_dataset(cls, data: ThreadDataset, cache: bool = True) -> "FlatSteps":
        cached = getattr(data, "_flat_steps", None)
        if cached is not None:
            return cached
        flat = cls(*kernels.flatten_steps(data.parents_concat, data.lengths))
        if cache:
            data._flat_steps = flat
        return flat

    def subset(self, thread_indices: Sequence[int]) -> "FlatSteps":
        """Steps of the given threads (repeats allowed), reindexed."""
        idx = np.asarray(thread_indices, dtype=np.int64)
        starts = self.step_offsets[idx]
        counts = self.step_offsets[idx + 1] - starts
        out_off = np.zeros(len(idx) + 1, dtype=np.int64)
        np.cumsum(counts, out=out_off[1:])
        total = int(out_off[-1])
        gather = (
            np.arange(total, dtype=np.int64)
            - np.repeat(out_off[:-1], counts)
            + np.repeat(starts, counts)
        )
        tt = self.tt[gather]
        t_counts = np.bincount(tt, minlength=len(self.t_counts)).astype(np.int64)
        return FlatSteps(
            cnt=self.cnt[gather],
            age=self.age[gather],
            isroot=self.isroot[gather],
            tt=tt,
            t_counts=t_counts,
            step_offsets=out_off,
        )


@dataclass(frozen=True)
class LikelihoodValue:
    """Negative log-likelihood of a dataset under one parameter point.

    ``node_count`` is the number of likelihood terms (attachment events at
    t >= 2; threads of size <= 2 contribute none).  ``clamped_terms``
    counts steps whose attractiveness underflowed the floor; a nonzero
    count means the parameters are wildly inconsistent with the data and
    the (finite, enormous) value acts as the infinity sentinel.
    """

    neg_log_lik: float
    node_count: int
    clamped_terms: int = 0
    per_thread: np.ndarray | None = field(default=None, repr=False)

    @property
    def per_node(self) -> float:
        """Average contribution per attachment event (nan if none)."""
        if self.node_count == 0:
            return math.nan
        return self.neg_log_lik / self.node_count


def _as_flat(data: ThreadDataset | FlatSteps) -> FlatSteps:
    if isinstance(data, FlatSteps):
        return data
    return FlatSteps.from_dataset(data)


def neg_log_likelihood(
    data: ThreadDataset | FlatSteps, spec: ModelSpec, *, per_thread: bool = False
) -> LikelihoodValue:
    """Exact negative log of the product of step probabilities.

    Args:
        data: dataset or its pre-flattened steps.
        spec: parameter point to evaluate.
        per_thread: also materialize the per-thread breakdown (their sum
            equals the total up to summation roundoff).
    """
    flat = _as_flat(data)
    nll, _, _, _, n_clamped = kernels.nll_grad(
        flat.cnt, flat.age, flat.isroot, flat.t_counts,
        spec.alpha, spec.tau, spec.beta, False,
    )
    breakdown = None
    if per_thread:
        breakdown, _ = kernels.nll_per_thread(
            flat.cnt, flat.age, flat.isroot, flat.tt, flat.step_offsets,
            spec.alpha, spec.tau, spec.beta,
        )
    return LikelihoodValue(
        neg_log_lik=float(nll),
        node_count=flat.n_steps,
        clamped_terms=int(n_clamped),
        per_thread=breakdown,
    )


@dataclass(frozen=True)
class GradientResult:
    """Objective value with its gradient in optimizer coordinates."""

    neg_log_lik: float
    grad: np.ndarray
    clamped_terms: int

    @property
    def flagged(self) -> bool:
        """True when some step hit the attractiveness floor (gradient there
        is taken as 0: the floor makes the objective locally flat)."""
        return self.clamped_terms > 0


def gradient(data: ThreadDataset | FlatSteps, spec: ModelSpec) -> GradientResult:
    """Analytic gradient of the objective at ``spec``.

    Components follow ``spec.variant.free_params`` order and differentiate
    with respect to a = log(alpha), c = logit(tau), b = log(beta).
    """
    flat = _as_flat(data)
    nll, ga, gt, gb, n_clamped = kernels.nll_grad(
        flat.cnt, flat.age, flat.isroot, flat.t_counts,
        spec.alpha, spec.tau, spec.beta, True,
    )
    grad = grad_to_coords(spec, ga, gt, gb)
    return GradientResult(neg_log_lik=float(nll), grad=grad, clamped_terms=int(n_clamped))


def params_to_coords(variant: Variant, alpha: float, tau: float, beta: float) -> np.ndarray:
    """Map natural parameters to the variant's unconstrained coordinates."""
    mapping = {
        "alpha": lambda: math.log(alpha),
        "tau": lambda: math.log(tau / (1.0 - tau)),
        "beta": lambda: math.log(beta),
    }
    out = []
    for name in Variant(variant).free_params:
        value = {"alpha": alpha, "tau": tau, "beta": beta}[name]
        if name in ("alpha", "beta") and value <= 0.0:
            raise ValueError(f"{name} must be positive to take its log coordinate")
        if name == "tau" and not 0.0 < value < 1.0:
            raise ValueError("tau must lie strictly inside (0, 1) for the logit coordinate")
        out.append(mapping[name]())
    return np.asarray(out, dtype=np.float64)


def coords_to_params(variant: Variant, x: Sequence[float]) -> ModelSpec:
    """Inverse of :func:`params_to_coords`; pinned parameters stay fixed."""
    variant = Variant(variant)
    values = []
    for name, xi in zip(variant.free_params, x, strict=True):
        if name == "tau":
            values.append(1.0 / (1.0 + math.exp(-float(xi))))
        else:
            values.append(math.exp(float(xi)))
    return ModelSpec.from_free_values(variant, values)


def grad_to_coords(spec: ModelSpec, d_alpha: float, d_tau: float, d_beta: float) -> np.ndarray:
    """Chain rule from natural-parameter partials to coordinate partials."""
    chain = {
        "alpha": spec.alpha * d_alpha,
        "tau": spec.tau * (1.0 - spec.tau) * d_tau,
        "beta": spec.beta * d_beta,
    }
    return np.asarray([chain[name] for name in spec.variant.free_params], dtype=np.float64)
