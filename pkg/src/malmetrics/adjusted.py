"""Bias-adjusted estimators.

The naive estimators are biased because the vote is not the truth. The
adjustment plugs the naive error rates into the vote model, solves the moment
equation for the portion, and then, detector by detector, solves a 2x2 linear
system for the error rates that would reproduce the observed naive rates.
One pass, no iteration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import PreconditionError, ZeroDenominator
from .model import EstimateKind, Flag, LabelMatrix, MetricEstimates, majority_vote
from .naive import naive_estimates
from .probability import McConfig, leave_one_out_lower_tails, vote_correct_probs

ILL_CONDITIONED_TOL = 1e-6
SINGULAR_REL_TOL = 1e-10


def round_half_away(x: float) -> int:
    return int(math.floor(abs(x) + 0.5)) * (1 if x >= 0 else -1)


class Pi1Adjustment(NamedTuple):
    value: float
    ill_conditioned: bool
    clamped: bool


def adjust_pi1(pi1_naive: float, p11_est: float, p01_est: float) -> Pi1Adjustment:
    """Moment-matched portion ``(pi1_naive - p01) / (p11 - p01)``, clamped to [0, 1].

    When ``|p11 - p01| < 1e-6`` the vote carries no information about the
    portion; the naive value is returned with ``ill_conditioned`` set.
    """
    den = p11_est - p01_est
    if abs(den) < ILL_CONDITIONED_TOL:
        return Pi1Adjustment(pi1_naive, True, False)
    raw = (pi1_naive - p01_est) / den
    value = min(1.0, max(0.0, raw))
    return Pi1Adjustment(value, False, value != raw)


@dataclass(frozen=True)
class AdjustedCounts:
    m1_hat: int
    m0_hat: int

    def __post_init__(self):
        if self.m1_hat < 0 or self.m0_hat < 0:
            raise PreconditionError("adjusted counts must be non-negative")

    @classmethod
    def from_pi1(cls, m: int, pi1_hat: float) -> "AdjustedCounts":
        m1 = min(m, max(0, round_half_away(m * pi1_hat)))
        return cls(m1, m - m1)


@dataclass(frozen=True)
class ConditionalVoteProbs:
    """Leave-one-out vote tails for detector ``j``.

    ``alpha1``/``alpha2``: given a malicious file, probability the other
    detectors' flag count is below ``(n - 2) / 2`` / below ``n / 2``.
    ``beta1``/``beta2``: the same for a benign file.
    """

    detector: int
    alpha1: float
    alpha2: float
    beta1: float
    beta2: float


def alpha_beta_all(fp, fn, mc: McConfig | None = None) -> list[ConditionalVoteProbs]:
    """Leave-one-out tails for every detector, using rates ``fp``/``fn``."""
    fp = np.asarray(fp, dtype=float)
    fn = np.asarray(fn, dtype=float)
    if fp.shape[0] < 2:
        raise PreconditionError("adjustment needs n >= 2 detectors")
    mal = leave_one_out_lower_tails(1.0 - fn, mc, (1, 1))
    ben = leave_one_out_lower_tails(fp, mc, (1, 0))
    return [
        ConditionalVoteProbs(j, float(mal[j, 0]), float(mal[j, 1]), float(ben[j, 0]), float(ben[j, 1]))
        for j in range(fp.shape[0])
    ]


def alpha_beta(naive: MetricEstimates, j: int, mc: McConfig | None = None) -> ConditionalVoteProbs:
    return alpha_beta_all(naive.fp, naive.fn, mc)[j]


@dataclass(frozen=True)
class AdjustmentSystem:
    """``a11 * fp - a12 * fn = b1`` and ``a21 * fp - a22 * fn = b2``."""

    a11: float
    a12: float
    a21: float
    a22: float
    b1: float
    b2: float

    @classmethod
    def build(cls, fp_naive: float, fn_naive: float, counts: AdjustedCounts, cond: ConditionalVoteProbs):
        m0, m1 = counts.m0_hat, counts.m1_hat
        a1, a2, b1_, b2_ = cond.alpha1, cond.alpha2, cond.beta1, cond.beta2
        p, q = fp_naive, fn_naive
        return cls(
            a11=m0 * b1_ * (1 - p) + m0 * b2_ * p,
            a12=m1 * a1 * (1 - p) + m1 * a2 * p,
            a21=m0 * (1 - b2_) * (1 - q) + m0 * (1 - b1_) * q,
            a22=m1 * (1 - a2) * (1 - q) + m1 * (1 - a1) * q,
            b1=m0 * b2_ * p - m1 * a1 * (1 - p),
            b2=m0 * (1 - b2_) * (1 - q) - m1 * (1 - a1) * q,
        )

    @property
    def det(self) -> float:
        return self.a12 * self.a21 - self.a11 * self.a22

    def is_singular(self) -> bool:
        scale = max(abs(self.a11), abs(self.a12)) * max(abs(self.a21), abs(self.a22))
        return scale == 0.0 or abs(self.det) < SINGULAR_REL_TOL * scale

    def solve(self) -> tuple[float, float]:
        det = self.det
        fp = (self.a12 * self.b2 - self.a22 * self.b1) / det
        fn = (self.a11 * self.b2 - self.a21 * self.b1) / det
        return fp, fn


class RateAdjustment(NamedTuple):
    fp: float
    fn: float
    singular: bool
    clamped: bool


def adjust_fp_fn(fp_naive: float, fn_naive: float, counts: AdjustedCounts, cond: ConditionalVoteProbs) -> RateAdjustment:
    """Solve the 2x2 system for detector ``cond.detector``; clamp into [0, 1]."""
    system = AdjustmentSystem.build(fp_naive, fn_naive, counts, cond)
    if system.is_singular():
        return RateAdjustment(fp_naive, fn_naive, True, False)
    raw = system.solve()
    fp, fn = (min(1.0, max(0.0, v)) for v in raw)
    return RateAdjustment(fp, fn, False, (fp, fn) != raw)


def adjust_ppv_npv(pi1_hat: float, fp_hat: float, fn_hat: float, detector=None) -> tuple[float, float]:
    """Predictive values implied by the adjusted portion and error rates."""
    pos = pi1_hat * (1 - fn_hat)
    pos_den = pos + (1 - pi1_hat) * fp_hat
    if pos_den == 0:
        raise ZeroDenominator("ppv", detector)
    neg = (1 - pi1_hat) * (1 - fp_hat)
    neg_den = neg + pi1_hat * fn_hat
    if neg_den == 0:
        raise ZeroDenominator("npv", detector)
    return pos / pos_den, neg / neg_den


def adjust_from_naive(naive: MetricEstimates, m: int, mc: McConfig | None = None) -> MetricEstimates:
    """Run the adjustment pipeline on an existing naive estimate set."""
    n = naive.n
    if n < 2:
        raise PreconditionError("adjustment needs n >= 2 detectors")
    for name in ("fp", "fn"):
        bad = np.flatnonzero(~naive.available(name))
        if bad.size:
            raise ZeroDenominator(name, int(bad[0]))

    flags: list[Flag] = []
    vp = vote_correct_probs(naive.fp, naive.fn, mc, key=(0,))
    pi1 = adjust_pi1(naive.pi1, vp.p11, vp.p01)
    if pi1.ill_conditioned:
        flags.append(Flag("ill_conditioned", "pi1"))
    if pi1.clamped:
        flags.append(Flag("clamped", "pi1"))
    counts = AdjustedCounts.from_pi1(m, pi1.value)

    conds = alpha_beta_all(naive.fp, naive.fn, mc)
    fp = np.empty(n)
    fn = np.empty(n)
    ppv = np.empty(n)
    npv = np.empty(n)
    for j in range(n):
        r = adjust_fp_fn(float(naive.fp[j]), float(naive.fn[j]), counts, conds[j])
        if r.singular:
            flags.append(Flag("singular_system", "fp", j))
        if r.clamped:
            flags.append(Flag("clamped", "fp", j))
        fp[j], fn[j] = r.fp, r.fn
        try:
            ppv[j], npv[j] = adjust_ppv_npv(pi1.value, r.fp, r.fn, j)
        except ZeroDenominator:
            # compute whichever of the pair is still defined
            pos_den = pi1.value * (1 - r.fn) + (1 - pi1.value) * r.fp
            neg_den = (1 - pi1.value) * (1 - r.fp) + pi1.value * r.fn
            ppv[j] = pi1.value * (1 - r.fn) / pos_den if pos_den > 0 else np.nan
            npv[j] = (1 - pi1.value) * (1 - r.fp) / neg_den if neg_den > 0 else np.nan
            for name, v in (("ppv", ppv[j]), ("npv", npv[j])):
                if np.isnan(v):
                    flags.append(Flag("unavailable", name, j))
    return MetricEstimates(
        pi1.value,
        fp,
        fn,
        np.clip(ppv, 0.0, 1.0),
        np.clip(npv, 0.0, 1.0),
        EstimateKind.ADJUSTED,
        tuple(flags),
        mode="exact" if mc is None else "mc",
    )


def full_adjust(matrix: LabelMatrix, mc: McConfig | None = None) -> MetricEstimates:
    """Vote, estimate naively, then adjust; exact tails unless ``mc`` is given."""
    if matrix.n < 2:
        raise PreconditionError("adjustment needs n >= 2 detectors")
    votes = majority_vote(matrix)
    naive = naive_estimates(matrix, votes, strict=False)
    return adjust_from_naive(naive, matrix.m, mc)
