"""Attractiveness functions, their closed-form normalizer, and step probabilities.

When a thread holding t nodes receives its next comment, the probability
that node k is chosen as the parent is phi(k) / Z_t, where

    phi(k) = alpha * d_{k,t} + tau**(t - k + 1) + beta * [k == 1]

combines a popularity term linear in the node's current degree d_{k,t}, a
novelty term decaying exponentially with the node's age, and a constant
bias reserved for the root.  Z_t is the sum of phi over the t nodes and has
the closed form ``2*alpha*(t-1) + beta + tau*(tau**t - 1)/(tau - 1)``.

Three reduced variants pin one parameter each: NO_ALPHA (alpha = 0),
NO_TAU (tau = 1, every novelty term equal to 1), NO_BIAS (beta = 0).  The
variant names follow the constraint they impose; the functional forms are
reconstructed from those constraints (see README).
"""

from __future__ import annotations

import enum
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .thread_core import ParentVector

__all__ = [
    "PHI_FLOOR",
    "Variant",
    "ModelSpec",
    "StepContext",
    "phi",
    "phi_vector",
    "normalizer",
    "step_probabilities",
]

# Smallest attractiveness value; phi is clamped here so the attachment
# distribution stays proper even when old-node novelty underflows and the
# other terms vanish (possible under NO_ALPHA with tiny tau).
PHI_FLOOR = 1e-300

# Below |tau - 1| = 1e-9 the geometric term of the normalizer switches to
# its tau -> 1 limit, which is exact for NO_TAU and accurate to ~5e-8
# relative within the sliver.
_TAU_ONE_TOL = 1e-9


class Variant(str, enum.Enum):
    """The full model and its three single-constraint reductions."""

    FM = "fm"
    NO_ALPHA = "no-alpha"
    NO_TAU = "no-tau"
    NO_BIAS = "no-bias"

    @property
    def free_params(self) -> tuple[str, ...]:
        """Names of the variant's free parameters, in optimizer order."""
        return _FREE_PARAMS[self]

    @property
    def pinned_param(self) -> str | None:
        """The parameter the variant constrains, None for the full model."""
        return _PINNED[self]

    @classmethod
    def parse(cls, name: str) -> "Variant":
        try:
            return cls(name.strip().lower().replace("_", "-"))
        except ValueError:
            names = ", ".join(v.value for v in cls)
            raise ValueError(f"unknown model variant {name!r}; expected one of {names}") from None


_FREE_PARAMS = {
    Variant.FM: ("alpha", "tau", "beta"),
    Variant.NO_ALPHA: ("tau", "beta"),
    Variant.NO_TAU: ("alpha", "beta"),
    Variant.NO_BIAS: ("alpha", "tau"),
}
_PINNED = {
    Variant.FM: None,
    Variant.NO_ALPHA: "alpha",
    Variant.NO_TAU: "tau",
    Variant.NO_BIAS: "beta",
}


@dataclass(frozen=True)
class ModelSpec:
    """A variant together with a concrete parameter point.

    Reduced variants must carry their pinned value exactly (alpha = 0 for
    NO_ALPHA, tau = 1 for NO_TAU, beta = 0 for NO_BIAS).  The fully
    degenerate point alpha = beta = 0, tau = 0 is rejected because it
    makes every attractiveness zero.
    """

    variant: Variant
    alpha: float = 0.0
    tau: float = 1.0
    beta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        for name in ("alpha", "tau", "beta"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if not 0.0 <= self.tau <= 1.0:
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")
        pinned = self.variant.pinned_param
        if pinned == "alpha" and self.alpha != 0.0:
            raise ValueError("NO_ALPHA requires alpha = 0")
        if pinned == "tau" and self.tau != 1.0:
            raise ValueError("NO_TAU requires tau = 1")
        if pinned == "beta" and self.beta != 0.0:
            raise ValueError("NO_BIAS requires beta = 0")
        if self.alpha == 0.0 and self.beta == 0.0 and self.tau == 0.0:
            raise ValueError("degenerate parameters: alpha = beta = 0 with tau = 0")

    @classmethod
    def full(cls, alpha: float, tau: float, beta: float) -> "ModelSpec":
        return cls(Variant.FM, alpha=alpha, tau=tau, beta=beta)

    @classmethod
    def no_alpha(cls, tau: float, beta: float) -> "ModelSpec":
        return cls(Variant.NO_ALPHA, alpha=0.0, tau=tau, beta=beta)

    @classmethod
    def no_tau(cls, alpha: float, beta: float) -> "ModelSpec":
        return cls(Variant.NO_TAU, alpha=alpha, tau=1.0, beta=beta)

    @classmethod
    def no_bias(cls, alpha: float, tau: float) -> "ModelSpec":
        return cls(Variant.NO_BIAS, alpha=alpha, tau=tau, beta=0.0)

    @classmethod
    def from_free_values(cls, variant: Variant, values: Sequence[float]) -> "ModelSpec":
        """Build a spec from the variant's free parameters in optimizer order."""
        variant = Variant(variant)
        names = variant.free_params
        if len(values) != len(names):
            raise ValueError(f"{variant.value} expects {len(names)} values, got {len(values)}")
        kwargs = {"alpha": 0.0, "tau": 1.0, "beta": 0.0}
        kwargs.update(dict(zip(names, map(float, values))))
        return cls(variant, **kwargs)

    @property
    def params(self) -> dict[str, float]:
        return {"alpha": self.alpha, "tau": self.tau, "beta": self.beta}

    @property
    def free_values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in self.variant.free_params)

    @property
    def log_beta(self) -> float:
        """Natural log of the root bias (-inf when beta = 0)."""
        return math.log(self.beta) if self.beta > 0 else -math.inf


@dataclass(frozen=True)
class StepContext:
    """Snapshot consumed by one attachment step.

    ``t`` is the number of nodes present; ``degrees`` holds d_{k,t} for
    k = 1..t.  The novelty of node k at this step is tau**(t - k + 1).
    """

    t: int
    degrees: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.t < 2:
            raise ValueError("attachment steps start at t = 2")
        deg = np.ascontiguousarray(self.degrees, dtype=np.int64)
        if deg.shape != (self.t,):
            raise ValueError(f"expected {self.t} degrees, got shape {deg.shape}")
        object.__setattr__(self, "degrees", deg)

    @classmethod
    def from_history(
        cls, history: ParentVector | Sequence[int]
    ) -> "StepContext":
        """Context for the step right after the given parent history.

        ``history`` is pi_1..pi_{t-1}; the snapshot then holds t nodes.
        """
        arr = history.parents if isinstance(history, ParentVector) else np.asarray(
            history, dtype=np.int64
        )
        t = len(arr) + 1
        if t < 2:
            raise ValueError("need at least pi_1 to form an attachment step")
        deg = np.ones(t, dtype=np.int64)
        if t > 2:
            deg += np.bincount(arr[1:].astype(np.int64), minlength=t + 1)[1 : t + 1]
        return cls(t=t, degrees=deg)


def phi(spec: ModelSpec, ctx: StepContext, k: int) -> float:
    """Attractiveness of node k at the given step, clamped at PHI_FLOOR."""
    if not 1 <= k <= ctx.t:
        raise ValueError(f"node id {k} outside [1, {ctx.t}]")
    value = (
        spec.alpha * float(ctx.degrees[k - 1])
        + spec.tau ** (ctx.t - k + 1)
        + (spec.beta if k == 1 else 0.0)
    )
    return max(value, PHI_FLOOR)


def phi_vector(spec: ModelSpec, ctx: StepContext) -> np.ndarray:
    """Attractiveness of every node 1..t, clamped at PHI_FLOOR."""
    t = ctx.t
    ages = np.arange(t, 0, -1, dtype=np.float64)  # t - k + 1 for k = 1..t
    out = spec.alpha * ctx.degrees.astype(np.float64) + spec.tau**ages
    out[0] += spec.beta
    np.maximum(out, PHI_FLOOR, out=out)
    return out


def normalizer(spec: ModelSpec, t: int) -> float:
    """Closed-form sum of attractiveness over the t nodes present.

    Equals ``2*alpha*(t-1) + beta + tau*(tau**t - 1)/(tau - 1)``; the
    geometric term is replaced by its limit t when tau is within 1e-9 of 1.
    Valid for t >= 2 (the first step is forced and never normalized).
    """
    if t < 2:
        raise ValueError("normalizer is defined for t >= 2")
    tau = spec.tau
    if abs(tau - 1.0) < _TAU_ONE_TOL:
        geometric = float(t)
    else:
        # tau * (1 - tau**t) / (1 - tau), written to stay accurate near 1
        geometric = tau * (-math.expm1(t * math.log(tau))) / (1.0 - tau) if tau > 0 else 0.0
    return 2.0 * spec.alpha * (t - 1.0) + spec.beta + geometric


def step_probabilities(spec: ModelSpec, ctx: StepContext) -> np.ndarray:
    """Attachment distribution over nodes 1..t: phi(k) normalized to sum 1."""
    values = phi_vector(spec, ctx)
    return values / values.sum()
