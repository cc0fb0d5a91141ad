"""Core data types and majority voting."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .errors import PreconditionError


def _frozen(a, dtype):
    # already-frozen arrays of the right type are shared, not copied
    if isinstance(a, np.ndarray) and a.dtype == dtype and not a.flags.writeable:
        return a
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


def _check_binary(values, what):
    arr = np.asarray(values)
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if arr.dtype == np.uint8:
        # cheap path for large matrices: no boolean temporaries
        if arr.size and arr.max() > 1:
            raise PreconditionError(f"{what} must contain only 0/1 values")
        return arr
    if not np.all((arr == 0) | (arr == 1)):
        raise PreconditionError(f"{what} must contain only 0/1 values")
    return arr.astype(np.uint8)


@dataclass(frozen=True, eq=False)
class LabelMatrix:
    """m x n binary matrix of detector labels: rows are files, columns detectors."""

    labels: np.ndarray
    detector_names: tuple[str, ...] = ()
    file_ids: tuple[str, ...] = ()

    def __post_init__(self):
        labels = _check_binary(self.labels, "labels")
        if labels.ndim != 2 or labels.shape[0] < 1 or labels.shape[1] < 1:
            raise PreconditionError(f"labels must be a non-empty 2-D array, got shape {labels.shape}")
        m, n = labels.shape
        names = tuple(self.detector_names) or tuple(f"d{j + 1}" for j in range(n))
        ids = tuple(self.file_ids) or tuple(str(i + 1) for i in range(m))
        if len(names) != n:
            raise PreconditionError(f"{len(names)} detector names for {n} columns")
        if len(ids) != m:
            raise PreconditionError(f"{len(ids)} file ids for {m} rows")
        object.__setattr__(self, "labels", _frozen(labels, np.uint8))
        object.__setattr__(self, "detector_names", names)
        object.__setattr__(self, "file_ids", ids)

    @property
    def m(self) -> int:
        return self.labels.shape[0]

    @property
    def n(self) -> int:
        return self.labels.shape[1]

    def columns(self, idx: Sequence[int]) -> "LabelMatrix":
        idx = list(idx)
        return LabelMatrix(
            self.labels[:, idx],
            tuple(self.detector_names[j] for j in idx),
            self.file_ids,
        )


@dataclass(frozen=True, eq=False)
class GroundTruth:
    truth: np.ndarray

    def __post_init__(self):
        t = _check_binary(self.truth, "truth")
        if t.ndim != 1 or t.shape[0] < 1:
            raise PreconditionError("truth must be a non-empty 1-D array")
        object.__setattr__(self, "truth", _frozen(t, np.uint8))

    @property
    def m(self) -> int:
        return self.truth.shape[0]

    @property
    def m1(self) -> int:
        return int(self.truth.sum())

    @property
    def m0(self) -> int:
        return self.m - self.m1

    @property
    def pi1(self) -> float:
        return self.m1 / self.m

    @property
    def malicious_index(self) -> np.ndarray:
        return np.flatnonzero(self.truth == 1)

    @property
    def benign_index(self) -> np.ndarray:
        return np.flatnonzero(self.truth == 0)


@dataclass(frozen=True, eq=False)
class VoteResult:
    votes: np.ndarray
    vote_counts: np.ndarray
    n: int

    @property
    def m(self) -> int:
        return self.votes.shape[0]


def majority_vote(matrix: LabelMatrix) -> VoteResult:
    """Label a file malicious when at least half the detectors flag it.

    A tie (exactly n/2 flags, even n) resolves to malicious.
    """
    counts = kernels.vote_counts(matrix.labels)
    # 2*s >= n keeps the comparison in integers
    votes = (2 * counts >= matrix.n).astype(np.uint8)
    return VoteResult(_frozen(votes, np.uint8), _frozen(counts, np.int64), matrix.n)


def count_voted(result: VoteResult) -> tuple[int, int]:
    """Return ``(voted_benign, voted_malicious)``."""
    mal = int(result.votes.sum())
    return result.m - mal, mal


class EstimateKind(str, enum.Enum):
    NAIVE = "naive"
    ADJUSTED = "adjusted"
    TRUE = "true"


METRICS = ("fp", "fn", "ppv", "npv")


@dataclass(frozen=True)
class Flag:
    """A non-fatal event attached to an estimate.

    ``code`` is one of ``unavailable``, ``ill_conditioned``, ``singular_system``
    or ``clamped``. ``detector`` is ``None`` for the portion ``pi1``.
    """

    code: str
    metric: str
    detector: int | None = None

    def as_dict(self):
        return {"code": self.code, "metric": self.metric, "detector": self.detector}


@dataclass(frozen=True, eq=False)
class MetricEstimates:
    """A full metric set: portion ``pi1`` and four per-detector vectors.

    Undefined entries are NaN and always carry an ``unavailable`` flag.
    """

    pi1: float
    fp: np.ndarray
    fn: np.ndarray
    ppv: np.ndarray
    npv: np.ndarray
    kind: EstimateKind
    flags: tuple[Flag, ...] = ()
    mode: str = "exact"

    def __post_init__(self):
        n = None
        for name in METRICS:
            arr = _frozen(getattr(self, name), np.float64)
            if arr.ndim != 1:
                raise PreconditionError(f"{name} must be 1-D")
            if n is None:
                n = arr.shape[0]
            elif arr.shape[0] != n:
                raise PreconditionError("metric vectors differ in length")
            object.__setattr__(self, name, arr)
        unavailable = {(f.metric, f.detector) for f in self.flags if f.code == "unavailable"}
        values = [("pi1", None, self.pi1)] + [
            (name, j, float(v)) for name in METRICS for j, v in enumerate(getattr(self, name))
        ]
        for name, j, v in values:
            if math.isnan(v):
                if (name, j) not in unavailable:
                    raise PreconditionError(f"{name}[{j}] is NaN without an 'unavailable' flag")
            elif not 0.0 <= v <= 1.0:
                raise PreconditionError(f"{name}[{j}] = {v} outside [0, 1]")

    @property
    def n(self) -> int:
        return self.fp.shape[0]

    def available(self, metric: str) -> np.ndarray | bool:
        if metric == "pi1":
            return not math.isnan(self.pi1)
        return ~np.isnan(getattr(self, metric))

    def flagged(self, code: str) -> list[Flag]:
        return [f for f in self.flags if f.code == code]

    def as_dict(self):
        def vec(a):
            return [None if math.isnan(x) else float(x) for x in a]

        return {
            "kind": self.kind.value,
            "mode": self.mode,
            "pi1": None if math.isnan(self.pi1) else float(self.pi1),
            **{name: vec(getattr(self, name)) for name in METRICS},
            "flags": [f.as_dict() for f in self.flags],
        }


def ppv_from_rates(pi1, fp, fn):
    """Positive predictive value from portion and error rates (NaN when 0/0)."""
    num = pi1 * (1.0 - np.asarray(fn, dtype=float))
    den = num + (1.0 - pi1) * np.asarray(fp, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


def npv_from_rates(pi1, fp, fn):
    """Negative predictive value from portion and error rates (NaN when 0/0)."""
    num = (1.0 - pi1) * (1.0 - np.asarray(fp, dtype=float))
    den = num + pi1 * np.asarray(fn, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.nan)


@dataclass(frozen=True)
class DetectorProfile:
    fp: float
    fn: float

    def __post_init__(self):
        for name in ("fp", "fn"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise PreconditionError(f"{name}={v} outside [0, 1]")

    def ppv(self, pi1: float) -> float:
        return float(ppv_from_rates(pi1, self.fp, self.fn))

    def npv(self, pi1: float) -> float:
        return float(npv_from_rates(pi1, self.fp, self.fn))


@dataclass(frozen=True, eq=False)
class ProfileSet:
    """Error rates of n detectors, stored as two parallel vectors."""

    fp: np.ndarray
    fn: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        fp = _frozen(self.fp, np.float64)
        fn = _frozen(self.fn, np.float64)
        if fp.ndim != 1 or fp.shape != fn.shape or fp.shape[0] < 1:
            raise PreconditionError("fp and fn must be equal-length, non-empty 1-D arrays")
        if np.any((fp < 0) | (fp > 1) | (fn < 0) | (fn > 1)) or np.isnan(fp).any() or np.isnan(fn).any():
            raise PreconditionError("error rates must lie in [0, 1]")
        names = tuple(self.names) or tuple(f"d{j + 1}" for j in range(fp.shape[0]))
        if len(names) != fp.shape[0]:
            raise PreconditionError("names length mismatch")
        object.__setattr__(self, "fp", fp)
        object.__setattr__(self, "fn", fn)
        object.__setattr__(self, "names", names)

    @classmethod
    def from_profiles(cls, profiles: Sequence[DetectorProfile], names=()) -> "ProfileSet":
        return cls([p.fp for p in profiles], [p.fn for p in profiles], tuple(names))

    def __len__(self):
        return self.fp.shape[0]

    def __getitem__(self, j) -> DetectorProfile:
        return DetectorProfile(float(self.fp[j]), float(self.fn[j]))

    def subset(self, idx: Sequence[int]) -> "ProfileSet":
        idx = list(idx)
        return ProfileSet(self.fp[idx], self.fn[idx], tuple(self.names[j] for j in idx))

    def ppv(self, pi1: float) -> np.ndarray:
        return ppv_from_rates(pi1, self.fp, self.fn)

    def npv(self, pi1: float) -> np.ndarray:
        return npv_from_rates(pi1, self.fp, self.fn)

    def as_estimates(self, pi1: float) -> MetricEstimates:
        """True parameters packaged as a metric set (kind ``TRUE``)."""
        ppv, npv = self.ppv(pi1), self.npv(pi1)
        flags = tuple(
            Flag("unavailable", name, j)
            for name, arr in (("ppv", ppv), ("npv", npv))
            for j in np.flatnonzero(np.isnan(arr)).tolist()
        )
        return MetricEstimates(pi1, self.fp, self.fn, ppv, npv, EstimateKind.TRUE, flags)
