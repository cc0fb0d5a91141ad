"""Replicated simulation runs, bias/RAB reports and detector-subset sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import __version__
from .adjusted import adjust_from_naive, full_adjust
from .errors import EstimationError, PreconditionError
from .model import LabelMatrix, MetricEstimates, ProfileSet, majority_vote
from .naive import naive_estimates
from .probability import McConfig, vote_correct_probs
from .synthetic import SimConfig, draw_profiles, generate

TARGETS = ("pi1", "fp", "fn", "ppv", "npv")
KINDS = ("naive", "adjusted")


def relative_absolute_bias(bias: float, true_value: float) -> float | None:
    """``|bias| / true_value`` in percent; ``None`` when the true value is 0."""
    if true_value == 0:
        return None
    return abs(bias) / abs(true_value) * 100.0


def _flatten(est: MetricEstimates) -> np.ndarray:
    return np.concatenate([[est.pi1], est.fp, est.fn, est.ppv, est.npv])


def _unflatten(vec: np.ndarray, n: int) -> dict:
    out = {"pi1": vec[..., 0]}
    for k, name in enumerate(TARGETS[1:]):
        out[name] = vec[..., 1 + k * n : 1 + (k + 1) * n]
    return out


@dataclass(frozen=True)
class TargetStats:
    true_value: float
    mean: float | None
    bias: float | None
    abs_bias: float | None
    rab: float | None
    sd: float | None
    n_available: int

    def as_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _stats(values: np.ndarray, true_value: float) -> TargetStats:
    ok = values[~np.isnan(values)]
    if ok.size == 0:
        return TargetStats(true_value, None, None, None, None, None, 0)
    mean = float(ok.mean())
    bias = mean - true_value
    sd = float(ok.std(ddof=1)) if ok.size > 1 else 0.0
    return TargetStats(true_value, mean, bias, abs(bias), relative_absolute_bias(bias, true_value), sd, int(ok.size))


@dataclass(eq=False)
class ExperimentReport:
    """Bias summary over replicates for each estimator kind and target.

    ``stats[kind]["pi1"]`` is a single :class:`TargetStats`; the per-detector
    targets hold a list with one entry per detector. ``values[kind]`` keeps
    the raw per-replicate estimates (NaN where unavailable).
    """

    config: dict
    mode: str
    kinds: tuple[str, ...]
    truth: MetricEstimates
    stats: dict
    failures: dict
    values: dict = field(repr=False, default_factory=dict)

    @property
    def n(self) -> int:
        return self.truth.n

    def get(self, kind: str, target: str, j: int | None = None) -> TargetStats:
        s = self.stats[kind][target]
        return s if target == "pi1" else s[j]

    def bias(self, kind, target, j=None):
        return self.get(kind, target, j).bias

    def abs_bias(self, kind, target, j=None):
        return self.get(kind, target, j).abs_bias

    def rab(self, kind, target, j=None):
        return self.get(kind, target, j).rab

    def mean_abs_bias(self, kind: str, target: str) -> float:
        """Average over detectors of the per-detector ``|bias|``."""
        if target == "pi1":
            return self.abs_bias(kind, "pi1")
        vals = [s.abs_bias for s in self.stats[kind][target] if s.abs_bias is not None]
        return float(np.mean(vals)) if vals else math.nan

    def replicate_values(self, kind: str, target: str) -> np.ndarray:
        return _unflatten(self.values[kind], self.n)[target]

    def as_dict(self) -> dict:
        out = {
            "artifact_version": __version__,
            "config": self.config,
            "mode": self.mode,
            "truth": self.truth.as_dict(),
            "failures": self.failures,
            "estimators": {},
        }
        for kind in self.kinds:
            out["estimators"][kind] = {
                t: self.stats[kind][t].as_dict()
                if t == "pi1"
                else [s.as_dict() for s in self.stats[kind][t]]
                for t in TARGETS
            }
        return out

    def series_rows(self, label: str = "") -> list[dict]:
        """Long-form rows ``(config, kind, metric, detector, statistic, value)``."""
        rows = []
        for kind in self.kinds:
            for t in TARGETS:
                entries = [(None, self.stats[kind][t])] if t == "pi1" else list(enumerate(self.stats[kind][t]))
                for j, s in entries:
                    for stat in ("mean", "bias", "abs_bias", "rab"):
                        rows.append(
                            {
                                "config": label,
                                "kind": kind,
                                "metric": t,
                                "detector": "" if j is None else j + 1,
                                "statistic": stat,
                                "value": getattr(s, stat),
                            }
                        )
        return rows


def _one_replicate(cfg, profiles, r, kinds, mc):
    ds = generate(cfg, profiles, r)
    votes = majority_vote(ds.matrix)
    naive = naive_estimates(ds.matrix, votes, strict=False)
    width = 1 + 4 * cfg.n
    out = {}
    if "naive" in kinds:
        out["naive"] = _flatten(naive)
    if "adjusted" in kinds:
        try:
            out["adjusted"] = _flatten(adjust_from_naive(naive, cfg.m, mc))
        except (EstimationError, PreconditionError):
            out["adjusted"] = np.full(width, np.nan)
    return out


def run_replicated(
    cfg: SimConfig,
    kinds: Sequence[str] = KINDS,
    mc: McConfig | None = None,
    workers: int = 1,
) -> ExperimentReport:
    """Generate ``cfg.n_replicates`` datasets, estimate, and summarise the bias.

    Results are stored by replicate index and reduced in index order, so the
    report does not depend on ``workers``.
    """
    kinds = tuple(k for k in KINDS if k in kinds)
    if not kinds:
        raise PreconditionError("no estimator kinds requested")
    profiles = draw_profiles(cfg)
    truth = profiles.as_estimates(cfg.m1 / cfg.m)
    reps = range(cfg.n_replicates)

    def job(r):
        return _one_replicate(cfg, profiles, r, kinds, mc)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, reps))
    else:
        results = [job(r) for r in reps]

    values = {k: np.stack([res[k] for res in results]) for k in kinds}
    true_vec = _flatten(truth)
    stats = {}
    failures = {}
    for k in kinds:
        cols = [_stats(values[k][:, c], float(true_vec[c])) for c in range(true_vec.shape[0])]
        stats[k] = {"pi1": cols[0]}
        for t_i, t in enumerate(TARGETS[1:]):
            stats[k][t] = cols[1 + t_i * cfg.n : 1 + (t_i + 1) * cfg.n]
        failures[k] = int(np.isnan(values[k]).all(axis=1).sum())
    return ExperimentReport(
        config=cfg.describe(),
        mode="exact" if mc is None else f"mc(N={mc.n_samples},seed={mc.seed})",
        kinds=kinds,
        truth=truth,
        stats=stats,
        failures=failures,
        values=values,
    )


def agreement_probability(pi1_hat: float, fp_hat, fn_hat, mc: McConfig | None = None) -> float:
    """Probability that a file's vote equals its true label under the given rates."""
    vp = vote_correct_probs(fp_hat, fn_hat, mc, key=(2,))
    return pi1_hat * vp.p11 + (1.0 - pi1_hat) * vp.p00


@dataclass(frozen=True)
class SubsetPlan:
    """Nested, strictly growing detector subsets (0-based column indices)."""

    sets: tuple[tuple[int, ...], ...]
    seed: int = 0

    def __post_init__(self):
        sets = tuple(tuple(int(i) for i in s) for s in self.sets)
        if not sets:
            raise PreconditionError("a subset plan needs at least one set")
        for prev, cur in zip(sets, sets[1:]):
            if not set(prev) < set(cur):
                raise PreconditionError("subsets must be nested and strictly growing")
        for s in sets:
            if len(set(s)) != len(s):
                raise PreconditionError("duplicate detector in subset")
        object.__setattr__(self, "sets", sets)

    @classmethod
    def build(cls, n: int, initial: Iterable[int], sizes: Iterable[int], seed: int = 0) -> "SubsetPlan":
        """Start from ``initial`` and grow by random picks to each size in ``sizes``.

        A size equal to ``n`` (or larger) means all detectors.
        """
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
        current = list(initial)
        if any(not 0 <= i < n for i in current):
            raise PreconditionError("initial indices out of range")
        sets = [tuple(current)] if current else []
        for size in sizes:
            size = min(int(size), n)
            if size <= len(current):
                raise PreconditionError(f"subset size {size} does not grow the plan")
            remaining = [i for i in range(n) if i not in set(current)]
            picks = rng.choice(len(remaining), size=size - len(current), replace=False)
            current = current + [remaining[i] for i in sorted(picks.tolist())]
            sets.append(tuple(current))
        return cls(tuple(sets), seed)

    @classmethod
    def single(cls, n: int) -> "SubsetPlan":
        return cls((tuple(range(n)),))

    def check(self, n: int):
        for s in self.sets:
            if any(not 0 <= i < n for i in s):
                raise PreconditionError(f"subset index out of range for n={n}")


@dataclass(eq=False)
class SweepPoint:
    indices: tuple[int, ...]
    names: tuple[str, ...]
    naive: MetricEstimates
    adjusted: MetricEstimates | None
    error: str | None
    p11: float | None = None
    p00: float | None = None
    agreement: float | None = None

    def as_dict(self) -> dict:
        return {
            "n": len(self.indices),
            "detectors": list(self.names),
            "naive": self.naive.as_dict(),
            "adjusted": None if self.adjusted is None else self.adjusted.as_dict(),
            "adjusted_error": self.error,
            "p11_hat": self.p11,
            "p00_hat": self.p00,
            "agreement": self.agreement,
        }


def estimate_matrix(matrix: LabelMatrix, mc: McConfig | None = None) -> SweepPoint:
    """Naive and adjusted estimates plus vote-accuracy summaries for one matrix."""
    votes = majority_vote(matrix)
    naive = naive_estimates(matrix, votes, strict=False)
    idx = tuple(range(matrix.n))
    try:
        adjusted = full_adjust(matrix, mc)
    except (EstimationError, PreconditionError) as exc:
        return SweepPoint(idx, matrix.detector_names, naive, None, str(exc))
    vp = vote_correct_probs(adjusted.fp, adjusted.fn, mc, key=(2,))
    agree = adjusted.pi1 * vp.p11 + (1.0 - adjusted.pi1) * vp.p00
    return SweepPoint(idx, matrix.detector_names, naive, adjusted, None, vp.p11, vp.p00, agree)


def subset_sweep(matrix: LabelMatrix, plan: SubsetPlan, mc: McConfig | None = None) -> list[SweepPoint]:
    """Re-vote and re-estimate on each column subset of ``matrix`` (no truth needed)."""
    plan.check(matrix.n)
    points = []
    for s in plan.sets:
        point = estimate_matrix(matrix.columns(s), mc)
        point.indices = s
        points.append(point)
    return points


def sweep_rows(points: Sequence[SweepPoint]) -> list[dict]:
    """Per-series rows ``(n, kind, metric, detector, value)`` for plotting."""
    rows = []
    for pt in points:
        for kind, est in (("naive", pt.naive), ("adjusted", pt.adjusted)):
            if est is None:
                continue
            rows.append({"n": len(pt.indices), "kind": kind, "metric": "pi1", "detector": "", "value": _num(est.pi1)})
            for t in ("fp", "fn", "ppv", "npv"):
                for name, v in zip(pt.names, getattr(est, t)):
                    rows.append({"n": len(pt.indices), "kind": kind, "metric": t, "detector": name, "value": _num(v)})
    return rows


def _num(v):
    v = float(v)
    return None if math.isnan(v) else v

