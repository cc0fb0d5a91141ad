"""Sums of independent, non-identical Bernoulli variables.

Exact evaluation uses the usual convolution dynamic programme; the Monte
Carlo path follows the sampling scheme of counting how many of ``N`` simulated
label vectors satisfy the tail inequality. Thresholds are exact fractions so
that ``s < (n - 2) / 2`` and ``s >= n / 2`` never depend on float rounding.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import comb

from . import kernels
from .errors import PreconditionError

DEFAULT_MC_SAMPLES = 10_000
HIGH_PRECISION_MC_SAMPLES = 5_000_000
_MC_CHUNK = 100_000


def as_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if np.isnan(p).any() or np.any((p < 0) | (p > 1)):
        raise PreconditionError("Bernoulli probabilities must lie in [0, 1]")
    return p


class Direction(str, enum.Enum):
    AT_MOST = "at_most"  # S <= M
    LESS = "less"  # S < M
    AT_LEAST = "at_least"  # S >= M


@dataclass(frozen=True)
class TailQuery:
    threshold: Fraction
    direction: Direction

    def __post_init__(self):
        object.__setattr__(self, "threshold", Fraction(self.threshold))
        object.__setattr__(self, "direction", Direction(self.direction))

    @classmethod
    def half(cls, numerator: int, direction) -> "TailQuery":
        """Query with threshold ``numerator / 2``."""
        return cls(Fraction(numerator, 2), direction)

    def support_mask(self, k: int) -> np.ndarray:
        """Boolean mask over sums ``0..k`` selected by this query."""
        s = np.arange(k + 1)
        t = self.threshold
        if self.direction is Direction.AT_MOST:
            return s <= math.floor(t)
        if self.direction is Direction.LESS:
            return s <= math.ceil(t) - 1
        return s >= math.ceil(t)


@dataclass(frozen=True)
class McConfig:
    """Monte Carlo settings. ``seed`` is the master seed for all sub-streams."""

    n_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise PreconditionError("n_samples must be >= 1")

    def substream(self, *key: int) -> np.random.Generator:
        """Independent generator for the sub-task identified by ``key``.

        The stream depends only on ``(seed, key)``, never on call order or
        worker assignment.
        """
        ss = np.random.SeedSequence(self.seed, spawn_key=tuple(int(k) for k in key))
        return np.random.Generator(np.random.PCG64(ss))


def exact_pmf(probs) -> np.ndarray:
    """``pmf[s] = Pr(sum == s)`` for ``s = 0..k``."""
    return kernels.poisson_binomial_pmf(as_probs(probs))


def exact_tail(probs, query: TailQuery) -> float:
    pmf = exact_pmf(probs)
    return float(min(1.0, pmf[query.support_mask(pmf.shape[0] - 1)].sum()))


def mc_sum_samples(probs, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    """Simulated sums of ``n_samples`` independent Bernoulli vectors."""
    p = as_probs(probs)
    out = np.empty(n_samples, dtype=np.int64)
    for start in range(0, n_samples, _MC_CHUNK):
        stop = min(start + _MC_CHUNK, n_samples)
        u = rng.random((stop - start, p.shape[0]))
        out[start:stop] = kernels.count_sums(u, p)
    return out


def mc_tail_probability(probs, query: TailQuery, cfg: McConfig, key: Sequence[int] = ()) -> float:
    """Fraction of ``cfg.n_samples`` simulated sums that satisfy ``query``."""
    p = as_probs(probs)
    sums = mc_sum_samples(p, cfg.n_samples, cfg.substream(*key))
    mask = query.support_mask(p.shape[0])
    return int(mask[sums].sum()) / cfg.n_samples


def tail(probs, query: TailQuery, mc: McConfig | None = None, key: Sequence[int] = ()) -> float:
    """Exact tail when ``mc`` is None, otherwise the Monte Carlo estimate."""
    if mc is None:
        return exact_tail(probs, query)
    return mc_tail_probability(probs, query, mc, key)


def homogeneous_p11(n: int, p_minus: float) -> float:
    """Probability that n identical detectors with miss rate ``p_minus`` vote malicious."""
    if n < 1:
        raise PreconditionError("n must be >= 1")
    if not 0.0 <= p_minus <= 1.0:
        raise PreconditionError("p_minus must lie in [0, 1]")
    k = np.arange(math.ceil(n / 2), n + 1)
    terms = comb(n, k) * (1.0 - p_minus) ** k * p_minus ** (n - k)
    return float(min(1.0, terms.sum()))


def heterogeneous_p11_bounds(p_minus) -> tuple[float, float]:
    """Bounds on the vote sensitivity from the worst and best miss rates."""
    p = as_probs(p_minus)
    if p.shape[0] < 1:
        raise PreconditionError("need at least one detector")
    n = p.shape[0]
    return homogeneous_p11(n, float(p.max())), homogeneous_p11(n, float(p.min()))


@dataclass(frozen=True)
class VoteProbs:
    """Conditional vote probabilities ``p_ab = Pr(vote = b | truth = a)``."""

    p11: float
    p01: float

    @property
    def p10(self) -> float:
        return 1.0 - self.p11

    @property
    def p00(self) -> float:
        return 1.0 - self.p01

    def as_tuple(self):
        return self.p11, self.p01, self.p00, self.p10


def vote_correct_probs(fp, fn, mc: McConfig | None = None, key: Sequence[int] = ()) -> VoteProbs:
    """Vote sensitivity ``p11`` and false-alarm rate ``p01`` for the given detectors."""
    fp = as_probs(fp)
    fn = as_probs(fn)
    n = fp.shape[0]
    q = TailQuery.half(n, Direction.AT_LEAST)
    p11 = tail(1.0 - fn, q, mc, (*key, 1))
    p01 = tail(fp, q, mc, (*key, 0))
    return VoteProbs(p11, p01)



def leave_one_out_lower_tails(success_probs, mc: McConfig | None = None, key: Sequence[int] = ()) -> np.ndarray:
    """For each detector j, tails of the sum over the other detectors.

    Returns an ``(n, 2)`` array: column 0 is ``Pr(S_-j < (n - 2) / 2)``,
    column 1 is ``Pr(S_-j < n / 2)``. In Monte Carlo mode both columns come
    from the same simulated sums, so column 0 never exceeds column 1.
    """
    p = as_probs(success_probs)
    n = p.shape[0]
    if n < 2:
        raise PreconditionError("leave-one-out tails need at least two detectors")
    lo = TailQuery.half(n - 2, Direction.LESS).support_mask(n - 1)
    hi = TailQuery.half(n, Direction.LESS).support_mask(n - 1)
    out = np.empty((n, 2))
    if mc is None:
        pmfs = kernels.leave_one_out_pmfs(p)
        out[:, 0] = np.minimum(1.0, pmfs[:, lo].sum(axis=1))
        out[:, 1] = np.minimum(1.0, pmfs[:, hi].sum(axis=1))
        return out
    for j in range(n):
        sums = mc_sum_samples(np.delete(p, j), mc.n_samples, mc.substream(*key, j))
        out[j, 0] = int(lo[sums].sum()) / mc.n_samples
        out[j, 1] = int(hi[sums].sum()) / mc.n_samples
    return out
