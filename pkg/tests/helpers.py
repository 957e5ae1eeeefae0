"""Reference implementations used as test oracles.

Everything here is written naively from the model definitions with plain
Python loops, independent of the package's vectorized or compiled code
paths.  Slow on purpose; only feed it small inputs.
"""

from __future__ import annotations

import math

import numpy as np


def degree_ref(history, k: int) -> int:
    """Degree of node k once all of ``history`` is in place.

    ``history`` holds (pi_1, ..., pi_{t-1}) for a t-node snapshot.  A node
    starts at degree 1; replies recorded in pi_2 onward add to the parent.
    """
    return 1 + sum(1 for p in history[1:] if p == k)


def phi_ref(alpha: float, tau: float, beta: float, history, k: int) -> float:
    t = len(history) + 1
    val = alpha * degree_ref(history, k) + tau ** (t - k + 1)
    if k == 1:
        val += beta
    return max(val, 1e-300)


def normalizer_ref(alpha: float, tau: float, beta: float, history) -> float:
    t = len(history) + 1
    return sum(phi_ref(alpha, tau, beta, history, k) for k in range(1, t + 1))


def step_prob_ref(alpha: float, tau: float, beta: float, history, k: int) -> float:
    return phi_ref(alpha, tau, beta, history, k) / normalizer_ref(alpha, tau, beta, history)


def thread_nll_ref(alpha: float, tau: float, beta: float, parents) -> float:
    """Negative log of the product of step probabilities of one thread."""
    total = 0.0
    for i in range(1, len(parents)):
        history = tuple(parents[:i])
        total -= math.log(step_prob_ref(alpha, tau, beta, history, parents[i]))
    return total


def dataset_nll_ref(alpha: float, tau: float, beta: float, threads) -> float:
    return sum(thread_nll_ref(alpha, tau, beta, list(pv)) for pv in threads)


def depths_ref(parents) -> list[int]:
    out = [0]
    for p in parents:
        out.append(out[p - 1] + 1)
    return out


def width_ref(parents) -> int:
    """Largest number of nodes sharing one depth level."""
    levels: dict[int, int] = {}
    for d in depths_ref(parents):
        levels[d] = levels.get(d, 0) + 1
    return max(levels.values())


def mean_depth_ref(parents) -> float:
    d = depths_ref(parents)
    return sum(d) / len(d)


def subtree_sizes_ref(parents) -> list[int]:
    """Strict descendant counts via exhaustive ancestor walks (quadratic)."""
    n = len(parents) + 1
    out = [0] * n
    for node in range(2, n + 1):
        p = node
        while p != 1:
            p = parents[p - 2]
            out[p - 1] += 1
    return out


def final_degrees_ref(parents) -> list[int]:
    n = len(parents) + 1
    hist = list(parents)
    return [degree_ref(hist, k) for k in range(1, n + 1)]


def enumerate_shapes_ref(alpha: float, tau: float, beta: float, size: int) -> dict:
    """Probability of every parent vector of ``size`` nodes, by recursion."""
    if size == 1:
        return {(): 1.0}
    shapes = {(1,): 1.0}
    for t in range(2, size):
        nxt = {}
        for prefix, prob in shapes.items():
            for k in range(1, t + 1):
                nxt[prefix + (k,)] = prob * step_prob_ref(alpha, tau, beta, prefix, k)
        shapes = nxt
    return shapes


def tv_ref(p: dict, q: dict) -> float:
    support = set(p) | set(q)
    return 0.5 * sum(abs(p.get(v, 0.0) - q.get(v, 0.0)) for v in support)


def random_history(rng: np.random.Generator, t: int) -> tuple[int, ...]:
    """Random valid parent vector for a t-node snapshot (length t - 1)."""
    if t < 2:
        return ()
    return (1,) + tuple(int(rng.integers(1, s + 1)) for s in range(2, t))
