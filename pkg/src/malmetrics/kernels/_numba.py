"""numba-compiled kernels mirroring ``_numpy`` one-for-one."""

import numpy as np
from numba import njit

_opts = dict(cache=True, nogil=True)


@njit(**_opts)
def vote_counts(labels):
    m, n = labels.shape
    out = np.zeros(m, dtype=np.int64)
    for i in range(m):
        s = 0
        for j in range(n):
            s += labels[i, j]
        out[i] = s
    return out


@njit(**_opts)
def z_counts(labels, votes):
    m, n = labels.shape
    out = np.zeros((n, 4), dtype=np.int64)
    # cell order (01, 00, 10, 11): first digit is the vote, second the label
    for i in range(m):
        if votes[i] == 1:
            hit, miss = 3, 2
        else:
            hit, miss = 0, 1
        for j in range(n):
            if labels[i, j] == 1:
                out[j, hit] += 1
            else:
                out[j, miss] += 1
    return out


@njit(**_opts)
def poisson_binomial_pmf(probs):
    k = probs.shape[0]
    pmf = np.zeros(k + 1)
    pmf[0] = 1.0
    for t in range(k):
        p = probs[t]
        q = 1.0 - p
        for s in range(t + 1, 0, -1):
            pmf[s] = pmf[s] * q + pmf[s - 1] * p
        pmf[0] *= q
    return pmf


@njit(**_opts)
def leave_one_out_pmfs(probs):
    k = probs.shape[0]
    out = np.zeros((k, k))
    others = np.empty(k - 1) if k > 0 else np.empty(0)
    for j in range(k):
        c = 0
        for t in range(k):
            if t != j:
                others[c] = probs[t]
                c += 1
        out[j, :] = poisson_binomial_pmf(others)
    return out


@njit(**_opts)
def count_sums(uniforms, probs):
    rows, k = uniforms.shape
    out = np.zeros(rows, dtype=np.int64)
    for r in range(rows):
        s = 0
        for t in range(k):
            if uniforms[r, t] < probs[t]:
                s += 1
        out[r] = s
    return out


@njit(**_opts)
def bernoulli_from_truth(uniforms, truth, fp, fn):
    m, n = uniforms.shape
    out = np.empty((m, n), dtype=np.uint8)
    for i in range(m):
        mal = truth[i] == 1
        for j in range(n):
            p = 1.0 - fn[j] if mal else fp[j]
            out[i, j] = 1 if uniforms[i, j] < p else 0
    return out


@njit(**_opts)
def perturbed_from_truth(uniforms, jitter, truth, fp, fn, half_width_fp, half_width_fn):
    m, n = uniforms.shape
    out = np.empty((m, n), dtype=np.uint8)
    for i in range(m):
        mal = truth[i] == 1
        for j in range(n):
            shift = 2.0 * jitter[i, j] - 1.0
            if mal:
                p = 1.0 - (fn[j] + half_width_fn[j] * shift)
            else:
                p = fp[j] + half_width_fp[j] * shift
            out[i, j] = 1 if uniforms[i, j] < p else 0
    return out
