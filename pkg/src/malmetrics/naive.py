"""Plug-in estimators that treat the majority vote as if it were the truth."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import PreconditionError, ZeroDenominator
from .model import EstimateKind, Flag, GroundTruth, LabelMatrix, MetricEstimates, VoteResult, count_voted

# column order of ZCounts.cells
CELLS = ("01", "00", "10", "11")


@dataclass(frozen=True, eq=False)
class ZCounts:
    """Per-detector (vote, label) contingency counts.

    ``cells[j]`` holds ``(z01, z00, z10, z11)`` where ``z_ab`` counts files
    voted ``a`` that detector ``j`` labelled ``b``.
    """

    cells: np.ndarray

    @property
    def z01(self):
        return self.cells[:, 0]

    @property
    def z00(self):
        return self.cells[:, 1]

    @property
    def z10(self):
        return self.cells[:, 2]

    @property
    def z11(self):
        return self.cells[:, 3]

    @property
    def n(self) -> int:
        return self.cells.shape[0]


def z_counts(matrix: LabelMatrix, votes: VoteResult) -> ZCounts:
    if votes.m != matrix.m:
        raise PreconditionError("vote result does not match the matrix")
    cells = kernels.z_counts(matrix.labels, votes.votes)
    cells.setflags(write=False)
    return ZCounts(cells)


def _ratio(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.full(num.shape, np.nan)
    ok = den > 0
    out[ok] = num[ok] / den[ok]
    return out


def estimates_from_counts(z: ZCounts, m: int, voted_malicious: int, strict: bool = True) -> MetricEstimates:
    """Naive metric set from contingency counts.

    With ``strict`` a zero denominator raises :class:`ZeroDenominator`;
    otherwise the entry is NaN and flagged ``unavailable``.
    """
    fp = _ratio(z.z01, z.z01 + z.z00)
    fn = _ratio(z.z10, z.z10 + z.z11)
    ppv = _ratio(z.z11, z.z11 + z.z01)
    npv = _ratio(z.z00, z.z00 + z.z10)
    flags = []
    for name, arr in (("fp", fp), ("fn", fn), ("ppv", ppv), ("npv", npv)):
        for j in np.flatnonzero(np.isnan(arr)).tolist():
            if strict:
                raise ZeroDenominator(name, j)
            flags.append(Flag("unavailable", name, j))
    return MetricEstimates(voted_malicious / m, fp, fn, ppv, npv, EstimateKind.NAIVE, tuple(flags))


def naive_estimates(matrix: LabelMatrix, votes: VoteResult, strict: bool = True) -> MetricEstimates:
    """Naive portion, error rates and predictive values for every detector."""
    z = z_counts(matrix, votes)
    _, voted_malicious = count_voted(votes)
    return estimates_from_counts(z, matrix.m, voted_malicious, strict=strict)


def truth_estimates(matrix: LabelMatrix, truth: GroundTruth) -> MetricEstimates:
    """Empirical metrics of each detector measured against known labels.

    Same ratios as the naive estimators with the truth in place of the vote;
    undefined ratios are NaN and flagged ``unavailable``.
    """
    if truth.m != matrix.m:
        raise PreconditionError("truth does not match the matrix")
    z = ZCounts(kernels.z_counts(matrix.labels, truth.truth))
    est = estimates_from_counts(z, matrix.m, truth.m1, strict=False)
    return MetricEstimates(est.pi1, est.fp, est.fn, est.ppv, est.npv, EstimateKind.TRUE, est.flags)
