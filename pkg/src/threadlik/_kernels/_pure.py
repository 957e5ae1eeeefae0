"""Pure numpy/Python kernels; fallback when the compiled extension is absent.

The compiled lane in ``_speedups.pyx`` mirrors this module function for
function.  Integer outputs (sampled parents, step counts) must be
bit-identical across lanes, so the sampler consumes its uniforms in exactly
the same arithmetic order here as in the compiled loop.  Floating outputs
agree to roundoff (summation order may differ).
"""

from __future__ import annotations

import math

import numpy as np

PHI_FLOOR = 1e-300
# novelty powers below this are flushed to exact zero (denormal cutoff)
_POW_FLUSH = 1e-310

IMPL = "pure"


def _pow_table(tau: float, max_t: int) -> np.ndarray:
    """tau**i for i = 0..max_t with tiny values flushed to zero."""
    out = np.empty(max_t + 1, dtype=np.float64)
    out[0] = 1.0
    if max_t:
        np.cumprod(np.full(max_t, tau, dtype=np.float64), out=out[1:])
        out[1:][out[1:] < _POW_FLUSH] = 0.0
    return out


def _geom_tables(tau: float, max_t: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Power table plus running sums S_t = sum tau^j and T_t = sum j tau^(j-1)."""
    pow_ = _pow_table(tau, max_t)
    s = np.zeros(max_t + 1, dtype=np.float64)
    t_ = np.zeros(max_t + 1, dtype=np.float64)
    if max_t:
        np.cumsum(pow_[1:], out=s[1:])
        np.cumsum(np.arange(1, max_t + 1, dtype=np.float64) * pow_[:max_t], out=t_[1:])
    return pow_, s, t_


def _cumcount(codes: np.ndarray) -> np.ndarray:
    """Number of prior occurrences of each element's value, order preserved."""
    n = len(codes)
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.argsort(codes, kind="stable")
    sc = codes[order]
    newgrp = np.empty(n, dtype=bool)
    newgrp[0] = True
    np.not_equal(sc[1:], sc[:-1], out=newgrp[1:])
    starts = np.flatnonzero(newgrp)
    reps = np.diff(np.append(starts, n))
    within = np.arange(n, dtype=np.int64) - np.repeat(starts, reps)
    out = np.empty(n, dtype=np.int64)
    out[order] = within
    return out


def flatten_steps(concat: np.ndarray, lengths: np.ndarray):
    """Per-step arrays of a dataset's sampled attachment events.

    Steps are the entries pi_t with t >= 2 of every thread.  Returns
    ``(cnt, age, isroot, tt, t_counts, step_offsets)`` where ``cnt`` is the
    number of prior same-thread occurrences of the chosen parent (so its
    degree at the step is 1 + cnt), ``age = t - pi_t + 1`` is the novelty
    exponent, ``tt`` the step index t, ``t_counts[t]`` the number of steps
    at time t over the whole dataset, and ``step_offsets`` the per-thread
    [start, end) ranges into the step arrays.
    """
    concat = np.asarray(concat, dtype=np.int32)
    lengths = np.asarray(lengths, dtype=np.int64)
    n = len(lengths)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lengths, out=offsets[1:])
    total = int(offsets[-1])
    pos = np.arange(total, dtype=np.int64) - np.repeat(offsets[:-1], lengths)
    sel = pos >= 1
    vals = concat[sel].astype(np.int64)
    tt = (pos[sel] + 1).astype(np.int32)
    age = (tt - vals + 1).astype(np.int32)
    isroot = (vals == 1).astype(np.uint8)
    max_t = int(tt.max()) if len(tt) else 1
    thread_of = np.repeat(np.arange(n, dtype=np.int64), lengths)[sel]
    cnt = _cumcount(thread_of * (max_t + 2) + vals).astype(np.int32)
    t_counts = np.bincount(tt, minlength=max_t + 1).astype(np.int64)
    step_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.maximum(lengths - 1, 0), out=step_offsets[1:])
    return cnt, age, isroot, tt, t_counts, step_offsets


def nll_grad(
    cnt: np.ndarray,
    age: np.ndarray,
    isroot: np.ndarray,
    t_counts: np.ndarray,
    alpha: float,
    tau: float,
    beta: float,
    want_grad: bool = True,
):
    """Negative log-likelihood and its natural-parameter gradient.

    Returns ``(nll, d_alpha, d_tau, d_beta, n_clamped)``.  Steps whose
    attractiveness underflows PHI_FLOOR contribute the floored log term
    and zero gradient; their count is reported so callers can flag the
    evaluation.
    """
    max_t = len(t_counts) - 1
    pow_, s_tab, t_tab = _geom_tables(tau, max_t)
    ts = np.flatnonzero(t_counts[2:]).astype(np.int64) + 2 if max_t >= 2 else np.zeros(0, np.int64)
    nll = 0.0
    ga = gt = gb = 0.0
    if len(ts):
        nt = t_counts[ts].astype(np.float64)
        z = 2.0 * alpha * (ts - 1.0) + beta + s_tab[ts]
        nll += float(nt @ np.log(z))
        if want_grad:
            inv = nt / z
            ga += float(inv @ (2.0 * (ts - 1.0)))
            gt += float(inv @ t_tab[ts])
            gb += float(inv.sum())
    d = 1.0 + cnt.astype(np.float64)
    nov = pow_[age]
    phi = alpha * d + nov
    phi = phi + beta * isroot
    clamped = phi < PHI_FLOOR
    n_clamped = int(np.count_nonzero(clamped))
    if n_clamped:
        phi = np.maximum(phi, PHI_FLOOR)
    nll -= float(np.log(phi).sum())
    if want_grad:
        inv_phi = 1.0 / phi
        if n_clamped:
            inv_phi[clamped] = 0.0
        ga -= float(inv_phi @ d)
        gt -= float(inv_phi @ (age * pow_[age - 1]))
        gb -= float(inv_phi @ isroot.astype(np.float64))
    return nll, ga, gt, gb, n_clamped


def nll_per_thread(
    cnt: np.ndarray,
    age: np.ndarray,
    isroot: np.ndarray,
    tt: np.ndarray,
    step_offsets: np.ndarray,
    alpha: float,
    tau: float,
    beta: float,
):
    """Per-thread negative log-likelihood contributions.

    Returns ``(per_thread, n_clamped)``; threads without steps get 0.
    """
    max_t = int(tt.max()) if len(tt) else 1
    pow_, s_tab, _ = _geom_tables(tau, max_t)
    t_axis = np.arange(max_t + 1, dtype=np.float64)
    lnz_tab = np.zeros(max_t + 1, dtype=np.float64)
    if max_t >= 2:
        lnz_tab[2:] = np.log(2.0 * alpha * (t_axis[2:] - 1.0) + beta + s_tab[2:])
    phi = alpha * (1.0 + cnt.astype(np.float64)) + pow_[age] + beta * isroot
    clamped = phi < PHI_FLOOR
    n_clamped = int(np.count_nonzero(clamped))
    if n_clamped:
        phi = np.maximum(phi, PHI_FLOOR)
    terms = lnz_tab[tt] - np.log(phi)
    csum = np.zeros(len(terms) + 1, dtype=np.float64)
    np.cumsum(terms, out=csum[1:])
    per_thread = csum[step_offsets[1:]] - csum[step_offsets[:-1]]
    return per_thread, n_clamped


def sample_block(
    sizes: np.ndarray, alpha: float, tau: float, beta: float, u: np.ndarray
) -> np.ndarray:
    """Sample the parent vectors of a block of threads.

    ``u`` supplies exactly ``sum(max(size - 2, 0))`` uniforms in [0, 1),
    consumed one per attachment step in thread order.  Returns the
    concatenated parent entries (``size - 1`` per thread).

    Each step splits the attachment mass by attractiveness component: a
    point mass beta on the root, mass alpha per unit degree resolved via
    one uniform share over all t nodes plus one share over the list of
    prior parent choices (each occurrence is one extra unit of degree),
    and the geometric novelty mass inverted in closed form.  This draws
    from exactly phi(k)/Z_t using a single uniform per step.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    out = np.empty(int(np.maximum(sizes - 1, 0).sum()), dtype=np.int32)
    ltau = math.log(tau) if 0.0 < tau < 1.0 else 0.0
    pos = 0
    upos = 0
    for size in sizes:
        n_entries = int(size) - 1
        if n_entries <= 0:
            continue
        out[pos] = 1
        s = tau
        p = tau
        for t in range(2, n_entries + 1):
            p *= tau
            s += p
            z = beta + alpha * (2.0 * t - 2.0) + s
            r = u[upos] * z
            upos += 1
            if r < beta:
                k = 1
            else:
                r -= beta
                share = alpha * t
                if r < share:
                    k = 1 + int(r / alpha)
                    if k > t:
                        k = t
                else:
                    r -= share
                    share = alpha * (t - 2.0)
                    if r < share:
                        idx = int(r / alpha)
                        if idx > t - 3:
                            idx = t - 3
                        k = int(out[pos + 1 + idx])
                    elif s <= 0.0:
                        k = t
                    else:
                        v = (r - share) / s
                        if tau >= 1.0:
                            j = 1 + int(v * t)
                        else:
                            arg = 1.0 - v * (1.0 - p)
                            if arg <= 0.0:
                                j = t
                            else:
                                j = int(math.ceil(math.log(arg) / ltau))
                        if j < 1:
                            j = 1
                        elif j > t:
                            j = t
                        k = t - j + 1
            out[pos + t - 1] = k
        pos += n_entries
    return out


def evolution_thread(parents: np.ndarray):
    """Width and mean depth of one thread after each node arrival.

    Returns ``(width, mean_depth)`` arrays of length ``len(parents) + 1``;
    entry s - 1 describes the tree holding its first s nodes.
    """
    parents = np.asarray(parents, dtype=np.int32)
    n = len(parents) + 1
    width = np.empty(n, dtype=np.int32)
    mean_depth = np.empty(n, dtype=np.float64)
    depth = np.zeros(n, dtype=np.int32)
    level = np.zeros(n, dtype=np.int32)
    level[0] = 1
    width[0] = 1
    mean_depth[0] = 0.0
    wmax = 1
    dsum = 0
    for i in range(1, n):
        d = depth[parents[i - 1] - 1] + 1
        depth[i] = d
        level[d] += 1
        if level[d] > wmax:
            wmax = level[d]
        dsum += d
        width[i] = wmax
        mean_depth[i] = dsum / (i + 1.0)
    return width, mean_depth


def depths_flat(concat: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Depth of every node, all threads concatenated (size entries each)."""
    concat = np.asarray(concat, dtype=np.int32)
    lengths = np.asarray(lengths, dtype=np.int64)
    out = np.zeros(int(lengths.sum()) + len(lengths), dtype=np.int32)
    node = 0
    entry = 0
    for ln in lengths:
        base = node
        node += 1
        for j in range(int(ln)):
            out[node] = out[base + concat[entry + j] - 1] + 1
            node += 1
        entry += int(ln)
    return out


def subtree_sizes_flat(concat: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Strict descendant count of every node, all threads concatenated."""
    concat = np.asarray(concat, dtype=np.int32)
    lengths = np.asarray(lengths, dtype=np.int64)
    out = np.zeros(int(lengths.sum()) + len(lengths), dtype=np.int64)
    base = 0
    entry = 0
    for ln in lengths:
        ln = int(ln)
        for j in range(ln - 1, -1, -1):
            out[base + concat[entry + j] - 1] += out[base + j + 1] + 1
        base += ln + 1
        entry += ln
    return out


def final_degrees_flat(concat: np.ndarray, lengths: np.ndarray) -> np.ndarray:
    """Final-time degree of every node, all threads concatenated."""
    concat = np.asarray(concat, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=np.int64)
    n = len(lengths)
    n_nodes = int(lengths.sum()) + n
    out = np.ones(n_nodes, dtype=np.int64)
    if len(concat) == 0:
        return out
    entry_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(lengths, out=entry_offsets[1:])
    node_offsets = entry_offsets[:-1] + np.arange(n, dtype=np.int64)
    pos = np.arange(int(entry_offsets[-1]), dtype=np.int64) - np.repeat(
        entry_offsets[:-1], lengths
    )
    sel = pos >= 1  # replies from node 3 on count toward their target's degree
    targets = np.repeat(node_offsets, lengths)[sel] + concat[sel] - 1
    np.add.at(out, targets, 1)
    return out
