# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels; the hot twin of ``_pure.py``.

Every function mirrors the pure lane's arithmetic order exactly, so the
sampler's integer outputs are bit-identical across lanes.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, log

cnp.import_array()

cdef double PHI_FLOOR = 1e-300
cdef double POW_FLUSH = 1e-310

IMPL = "compiled"


def flatten_steps(object concat_in, object lengths_in):
    cdef const cnp.int32_t[::1] concat = np.ascontiguousarray(concat_in, dtype=np.int32)
    cdef const cnp.int64_t[::1] lengths = np.ascontiguousarray(lengths_in, dtype=np.int64)
    cdef Py_ssize_t n = lengths.shape[0]
    cdef Py_ssize_t i, j, ln, t, v, s = 0, entry = 0
    cdef Py_ssize_t max_len = 0, n_steps = 0
    for i in range(n):
        ln = lengths[i]
        if ln > max_len:
            max_len = ln
        if ln > 1:
            n_steps += ln - 1

    cnt_np = np.empty(n_steps, dtype=np.int32)
    age_np = np.empty(n_steps, dtype=np.int32)
    isroot_np = np.empty(n_steps, dtype=np.uint8)
    tt_np = np.empty(n_steps, dtype=np.int32)
    max_t = max_len if max_len >= 1 else 1
    t_counts_np = np.zeros(max_t + 1, dtype=np.int64)
    step_offsets_np = np.zeros(n + 1, dtype=np.int64)
    scratch_np = np.zeros(max_len + 2, dtype=np.int64)
    stamp_np = np.full(max_len + 2, -1, dtype=np.int64)

    cdef cnp.int32_t[::1] cnt = cnt_np
    cdef cnp.int32_t[::1] age = age_np
    cdef cnp.uint8_t[::1] isroot = isroot_np
    cdef cnp.int32_t[::1] tt = tt_np
    cdef cnp.int64_t[::1] t_counts = t_counts_np
    cdef cnp.int64_t[::1] step_offsets = step_offsets_np
    cdef cnp.int64_t[::1] scratch = scratch_np
    cdef cnp.int64_t[::1] stamp = stamp_np
    cdef cnp.int64_t c

    for i in range(n):
        ln = lengths[i]
        for j in range(1, ln):
            t = j + 1
            v = concat[entry + j]
            if stamp[v] == i:
                c = scratch[v]
            else:
                c = 0
            cnt[s] = <cnp.int32_t>c
            age[s] = <cnp.int32_t>(t - v + 1)
            isroot[s] = 1 if v == 1 else 0
            tt[s] = <cnp.int32_t>t
            t_counts[t] += 1
            scratch[v] = c + 1
            stamp[v] = i
            s += 1
        entry += ln
        step_offsets[i + 1] = s
    return cnt_np, age_np, isroot_np, tt_np, t_counts_np, step_offsets_np


cdef void _fill_geom_tables(double tau, Py_ssize_t max_t,
                            double[::1] pow_, double[::1] s_tab, double[::1] t_tab) nogil:
    cdef Py_ssize_t i
    pow_[0] = 1.0
    s_tab[0] = 0.0
    t_tab[0] = 0.0
    for i in range(1, max_t + 1):
        pow_[i] = pow_[i - 1] * tau
        if pow_[i] < POW_FLUSH:
            pow_[i] = 0.0
        s_tab[i] = s_tab[i - 1] + pow_[i]
        t_tab[i] = t_tab[i - 1] + i * pow_[i - 1]


def nll_grad(object cnt_in, object age_in, object isroot_in, object t_counts_in,
             double alpha, double tau, double beta, bint want_grad=True):
    cdef const cnp.int32_t[::1] cnt = np.ascontiguousarray(cnt_in, dtype=np.int32)
    cdef const cnp.int32_t[::1] age = np.ascontiguousarray(age_in, dtype=np.int32)
    cdef const cnp.uint8_t[::1] isroot = np.ascontiguousarray(isroot_in, dtype=np.uint8)
    cdef const cnp.int64_t[::1] t_counts = np.ascontiguousarray(t_counts_in, dtype=np.int64)
    cdef Py_ssize_t max_t = t_counts.shape[0] - 1
    cdef Py_ssize_t n_steps = cnt.shape[0]

    tables = np.empty((3, max_t + 1), dtype=np.float64)
    cdef double[::1] pow_ = tables[0]
    cdef double[::1] s_tab = tables[1]
    cdef double[::1] t_tab = tables[2]
    _fill_geom_tables(tau, max_t, pow_, s_tab, t_tab)

    cdef double nll = 0.0, ga = 0.0, gt = 0.0, gb = 0.0
    cdef double z, inv, d, phi, inv_phi
    cdef Py_ssize_t t, j, a
    cdef cnp.int64_t nt
    cdef Py_ssize_t n_clamped = 0

    with nogil:
        for t in range(2, max_t + 1):
            nt = t_counts[t]
            if nt == 0:
                continue
            z = 2.0 * alpha * (t - 1.0) + beta + s_tab[t]
            nll += nt * log(z)
            if want_grad:
                inv = nt / z
                ga += inv * (2.0 * (t - 1.0))
                gt += inv * t_tab[t]
                gb += inv
        for j in range(n_steps):
            d = 1.0 + cnt[j]
            a = age[j]
            phi = alpha * d + pow_[a]
            if isroot[j]:
                phi += beta
            if phi < PHI_FLOOR:
                phi = PHI_FLOOR
                n_clamped += 1
                nll -= log(phi)
                continue
            nll -= log(phi)
            if want_grad:
                inv_phi = 1.0 / phi
                ga -= inv_phi * d
                gt -= inv_phi * (a * pow_[a - 1])
                if isroot[j]:
                    gb -= inv_phi
    return nll, ga, gt, gb, n_clamped


def nll_per_thread(object cnt_in, object age_in, object isroot_in, object tt_in,
                   object step_offsets_in, double alpha, double tau, double beta):
    cdef const cnp.int32_t[::1] cnt = np.ascontiguousarray(cnt_in, dtype=np.int32)
    cdef const cnp.int32_t[::1] age = np.ascontiguousarray(age_in, dtype=np.int32)
    cdef const cnp.uint8_t[::1] isroot = np.ascontiguousarray(isroot_in, dtype=np.uint8)
    cdef const cnp.int32_t[::1] tt = np.ascontiguousarray(tt_in, dtype=np.int32)
    cdef const cnp.int64_t[::1] offs = np.ascontiguousarray(step_offsets_in, dtype=np.int64)
    cdef Py_ssize_t n_steps = cnt.shape[0]
    cdef Py_ssize_t n_threads = offs.shape[0] - 1
    cdef Py_ssize_t max_t = 1, j, i, a, t

    for j in range(n_steps):
        if tt[j] > max_t:
            max_t = tt[j]
    tables = np.empty((3, max_t + 1), dtype=np.float64)
    cdef double[::1] pow_ = tables[0]
    cdef double[::1] s_tab = tables[1]
    cdef double[::1] t_tab = tables[2]
    _fill_geom_tables(tau, max_t, pow_, s_tab, t_tab)
    lnz_np = np.zeros(max_t + 1, dtype=np.float64)
    cdef double[::1] lnz = lnz_np
    for t in range(2, max_t + 1):
        lnz[t] = log(2.0 * alpha * (t - 1.0) + beta + s_tab[t])

    out_np = np.zeros(n_threads, dtype=np.float64)
    cdef double[::1] out = out_np
    cdef double acc, phi
    cdef Py_ssize_t n_clamped = 0
    with nogil:
        for i in range(n_threads):
            acc = 0.0
            for j in range(offs[i], offs[i + 1]):
                a = age[j]
                phi = alpha * (1.0 + cnt[j]) + pow_[a]
                if isroot[j]:
                    phi += beta
                if phi < PHI_FLOOR:
                    phi = PHI_FLOOR
                    n_clamped += 1
                acc += lnz[tt[j]] - log(phi)
            out[i] = acc
    return out_np, n_clamped


def sample_block(object sizes_in, double alpha, double tau, double beta, object u_in):
    cdef const cnp.int64_t[::1] sizes = np.ascontiguousarray(sizes_in, dtype=np.int64)
    cdef const double[::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef Py_ssize_t total = 0, i, n_entries
    for i in range(sizes.shape[0]):
        if sizes[i] > 1:
            total += sizes[i] - 1
    out_np = np.empty(total, dtype=np.int32)
    cdef cnp.int32_t[::1] out = out_np
    cdef double ltau = log(tau) if 0.0 < tau < 1.0 else 0.0
    cdef Py_ssize_t pos = 0, upos = 0, t, k, idx, jj
    cdef double s, p, z, r, share, v, arg

    with nogil:
        for i in range(sizes.shape[0]):
            n_entries = sizes[i] - 1
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
                        k = 1 + <Py_ssize_t>(r / alpha)
                        if k > t:
                            k = t
                    else:
                        r -= share
                        share = alpha * (t - 2.0)
                        if r < share:
                            idx = <Py_ssize_t>(r / alpha)
                            if idx > t - 3:
                                idx = t - 3
                            k = out[pos + 1 + idx]
                        elif s <= 0.0:
                            k = t
                        else:
                            v = (r - share) / s
                            if tau >= 1.0:
                                jj = 1 + <Py_ssize_t>(v * t)
                            else:
                                arg = 1.0 - v * (1.0 - p)
                                if arg <= 0.0:
                                    jj = t
                                else:
                                    jj = <Py_ssize_t>ceil(log(arg) / ltau)
                            if jj < 1:
                                jj = 1
                            elif jj > t:
                                jj = t
                            k = t - jj + 1
                out[pos + t - 1] = <cnp.int32_t>k
            pos += n_entries
    return out_np


def evolution_thread(object parents_in):
    cdef const cnp.int32_t[::1] parents = np.ascontiguousarray(parents_in, dtype=np.int32)
    cdef Py_ssize_t n = parents.shape[0] + 1
    width_np = np.empty(n, dtype=np.int32)
    mean_depth_np = np.empty(n, dtype=np.float64)
    scratch = np.zeros((2, n), dtype=np.int32)
    cdef cnp.int32_t[::1] width = width_np
    cdef double[::1] mean_depth = mean_depth_np
    cdef cnp.int32_t[::1] depth = scratch[0]
    cdef cnp.int32_t[::1] level = scratch[1]
    cdef Py_ssize_t i
    cdef cnp.int32_t d, wmax = 1
    cdef cnp.int64_t dsum = 0
    level[0] = 1
    width[0] = 1
    mean_depth[0] = 0.0
    with nogil:
        for i in range(1, n):
            d = depth[parents[i - 1] - 1] + 1
            depth[i] = d
            level[d] += 1
            if level[d] > wmax:
                wmax = level[d]
            dsum += d
            width[i] = wmax
            mean_depth[i] = dsum / (i + 1.0)
    return width_np, mean_depth_np


def depths_flat(object concat_in, object lengths_in):
    cdef const cnp.int32_t[::1] concat = np.ascontiguousarray(concat_in, dtype=np.int32)
    cdef const cnp.int64_t[::1] lengths = np.ascontiguousarray(lengths_in, dtype=np.int64)
    cdef Py_ssize_t n_nodes = concat.shape[0] + lengths.shape[0]
    out_np = np.zeros(n_nodes, dtype=np.int32)
    cdef cnp.int32_t[::1] out = out_np
    cdef Py_ssize_t i, j, ln, node = 0, base, entry = 0
    with nogil:
        for i in range(lengths.shape[0]):
            ln = lengths[i]
            base = node
            node += 1
            for j in range(ln):
                out[node] = out[base + concat[entry + j] - 1] + 1
                node += 1
            entry += ln
    return out_np


def subtree_sizes_flat(object concat_in, object lengths_in):
    cdef const cnp.int32_t[::1] concat = np.ascontiguousarray(concat_in, dtype=np.int32)
    cdef const cnp.int64_t[::1] lengths = np.ascontiguousarray(lengths_in, dtype=np.int64)
    cdef Py_ssize_t n_nodes = concat.shape[0] + lengths.shape[0]
    out_np = np.zeros(n_nodes, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_np
    cdef Py_ssize_t i, j, ln, base = 0, entry = 0
    with nogil:
        for i in range(lengths.shape[0]):
            ln = lengths[i]
            for j in range(ln - 1, -1, -1):
                out[base + concat[entry + j] - 1] += out[base + j + 1] + 1
            base += ln + 1
            entry += ln
    return out_np


def final_degrees_flat(object concat_in, object lengths_in):
    cdef const cnp.int32_t[::1] concat = np.ascontiguousarray(concat_in, dtype=np.int32)
    cdef const cnp.int64_t[::1] lengths = np.ascontiguousarray(lengths_in, dtype=np.int64)
    cdef Py_ssize_t n_nodes = concat.shape[0] + lengths.shape[0]
    out_np = np.ones(n_nodes, dtype=np.int64)
    cdef cnp.int64_t[::1] out = out_np
    cdef Py_ssize_t i, j, ln, base = 0, entry = 0
    with nogil:
        for i in range(lengths.shape[0]):
            ln = lengths[i]
            for j in range(1, ln):
                out[base + concat[entry + j] - 1] += 1
            base += ln + 1
            entry += ln
    return out_np
