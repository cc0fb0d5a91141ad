"""Pure-numpy kernels.

These are the reference implementations; the numba versions in ``_numba``
must agree with them bit-for-bit.
"""

import numpy as np


def vote_counts(labels):
    return labels.sum(axis=1, dtype=np.int64)


def z_counts(labels, votes):
    """Return an ``(n, 4)`` int64 array of cell counts ordered (01, 00, 10, 11)."""
    voted_malicious = votes.astype(bool)
    ones_mal = labels[voted_malicious].sum(axis=0, dtype=np.int64)
    ones_ben = labels[~voted_malicious].sum(axis=0, dtype=np.int64)
    n_mal = np.int64(voted_malicious.sum())
    n_ben = np.int64(labels.shape[0]) - n_mal
    out = np.empty((labels.shape[1], 4), dtype=np.int64)
    out[:, 0] = ones_ben
    out[:, 1] = n_ben - ones_ben
    out[:, 2] = n_mal - ones_mal
    out[:, 3] = ones_mal
    return out


def poisson_binomial_pmf(probs):
    pmf = np.zeros(probs.shape[0] + 1)
    pmf[0] = 1.0
    for k, p in enumerate(probs):
        # k+1 live entries after this step; update from the top down
        pmf[1 : k + 2] = pmf[1 : k + 2] * (1.0 - p) + pmf[0 : k + 1] * p
        pmf[0] *= 1.0 - p
    return pmf


def leave_one_out_pmfs(probs):
    """Row ``j`` holds the pmf of the sum over all detectors except ``j``.

    Shape ``(k, k)``; the support of each row is ``0..k-1``.
    """
    k = probs.shape[0]
    out = np.zeros((k, k))
    for j in range(k):
        out[j] = poisson_binomial_pmf(np.delete(probs, j))
    return out


def count_sums(uniforms, probs):
    """Per-row number of successes, success meaning ``u < p``."""
    return (uniforms < probs).sum(axis=1, dtype=np.int64)


def bernoulli_from_truth(uniforms, truth, fp, fn):
    p_one = np.where(truth[:, None] == 1, 1.0 - fn[None, :], fp[None, :])
    return (uniforms < p_one).astype(np.uint8)


def perturbed_from_truth(uniforms, jitter, truth, fp, fn, half_width_fp, half_width_fn):
    """Labels with per-cell probabilities ``p + h * (2 * jitter - 1)``.

    ``h`` is the (already truncated) half-width per detector. For benign rows
    the perturbed probability is the false-positive rate; for malicious rows
    the perturbed false-negative rate ``q`` gives success probability ``1 - q``.
    """
    mal = truth[:, None] == 1
    shift = 2.0 * jitter - 1.0
    p_fp = fp[None, :] + half_width_fp[None, :] * shift
    p_fn = fn[None, :] + half_width_fn[None, :] * shift
    p_one = np.where(mal, 1.0 - p_fn, p_fp)
    return (uniforms < p_one).astype(np.uint8)
