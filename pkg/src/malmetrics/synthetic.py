"""Synthetic label matrices with known ground truth.

Random streams are derived from ``SeedSequence(master_seed, spawn_key=...)``
with keys

* ``(0,)``                 detector profiles (drawn once per configuration)
* ``(1, r, 0)``            malicious-file positions of replicate ``r``
* ``(1, r, 1, b)``         label uniforms for row block ``b`` of replicate ``r``
* ``(1, r, 2, b)``         per-cell perturbation uniforms for the same block

so any replicate, and any row block inside it, can be produced independently
and in any order with identical results. Perturbed and unperturbed datasets
share the truth and label streams, which makes them comparable file by file.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import kernels
from .adjusted import round_half_away
from .errors import PreconditionError
from .model import GroundTruth, LabelMatrix, ProfileSet, VoteResult, majority_vote

ROW_BLOCK = 16_384

FIXTURE_SEED = 47_058_579
FIXTURE_PI1 = 0.58579
FIXTURE_M = 100_000
FIXTURE_KAPPAS = (5, 15, 25, 35, 47)
# 1-based position -> (fp, fn) for the five detectors whose rates are published
FIXTURE_ANCHORS = {
    3: (0.000617, 0.828),
    13: (0.00938, 0.339),
    23: (0.0952, 0.126),
    33: (0.19, 0.044),
    43: (0.227, 0.0173),
}
FIXTURE_POOR_FN = (0.998, 0.921, 0.828, 0.732, 0.718, 0.648, 0.606, 0.515)
FIXTURE_FP_RANGE = (0.000617, 0.256)
FIXTURE_FN_RANGE = (0.00238, 0.998)


@dataclass(frozen=True)
class UniformRange:
    """Every fp and fn drawn independently from ``Uniform(epsilon, epsilon + width)``."""

    epsilon: float
    width: float = 0.1

    def __post_init__(self):
        if self.epsilon < 0 or self.width < 0 or self.epsilon + self.width > 1 + 1e-12:
            raise PreconditionError("need 0 <= epsilon and epsilon + width <= 1")


@dataclass(frozen=True)
class SimConfig:
    m: int
    pi1: float
    n: int
    profile_source: UniformRange | ProfileSet
    n_replicates: int = 1000
    master_seed: int = 0
    perturbation_delta: float = 0.0

    def __post_init__(self):
        if self.m < 1 or self.n < 1 or self.n_replicates < 1:
            raise PreconditionError("m, n and n_replicates must be >= 1")
        if not 0.0 <= self.pi1 <= 1.0:
            raise PreconditionError("pi1 must lie in [0, 1]")
        if self.perturbation_delta < 0:
            raise PreconditionError("perturbation_delta must be >= 0")
        if isinstance(self.profile_source, ProfileSet) and len(self.profile_source) != self.n:
            raise PreconditionError(f"{len(self.profile_source)} explicit profiles for n={self.n}")

    @property
    def m1(self) -> int:
        return round_half_away(self.m * self.pi1)

    @property
    def m0(self) -> int:
        return self.m - self.m1

    def with_kappa(self, kappa: int) -> "SimConfig":
        """Restrict explicit profiles to the first ``kappa`` detectors."""
        if not isinstance(self.profile_source, ProfileSet):
            raise PreconditionError("kappa selection needs explicit profiles")
        if not 1 <= kappa <= self.n:
            raise PreconditionError(f"kappa must lie in [1, {self.n}]")
        return replace(self, n=kappa, profile_source=self.profile_source.subset(range(kappa)))

    def describe(self) -> dict:
        src = self.profile_source
        if isinstance(src, UniformRange):
            source = {"type": "uniform", "epsilon": src.epsilon, "width": src.width}
        else:
            source = {"type": "explicit", "fp": src.fp.tolist(), "fn": src.fn.tolist()}
        return {
            "m": self.m,
            "pi1": self.pi1,
            "n": self.n,
            "profile_source": source,
            "n_replicates": self.n_replicates,
            "master_seed": self.master_seed,
            "perturbation_delta": self.perturbation_delta,
        }


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    matrix: LabelMatrix
    truth: GroundTruth
    profiles: ProfileSet
    replicate_index: int

    @property
    def votes(self) -> VoteResult:
        return majority_vote(self.matrix)


def draw_profiles(cfg: SimConfig) -> ProfileSet:
    """Detector error rates for the whole configuration (shared by all replicates)."""
    src = cfg.profile_source
    if isinstance(src, ProfileSet):
        return src
    rng = _stream(cfg.master_seed, 0)
    draws = rng.uniform(src.epsilon, src.epsilon + src.width, size=(cfg.n, 2))
    return ProfileSet(np.clip(draws[:, 0], 0.0, 1.0), np.clip(draws[:, 1], 0.0, 1.0))


def draw_truth(cfg: SimConfig, replicate_index: int) -> np.ndarray:
    """Exactly ``cfg.m1`` malicious files at uniformly random positions."""
    truth = np.zeros(cfg.m, dtype=np.uint8)
    idx = _stream(cfg.master_seed, 1, replicate_index, 0).choice(cfg.m, size=cfg.m1, replace=False)
    truth[idx] = 1
    return truth


def truncated_half_widths(p: np.ndarray, delta: float) -> np.ndarray:
    """Largest half-width <= delta keeping ``[p - h, p + h]`` inside [0, 1]."""
    return np.minimum(delta, np.minimum(p, 1.0 - p))


def _labels(cfg, profiles, truth, replicate_index, delta):
    m, n = cfg.m, len(profiles)
    out = np.empty((m, n), dtype=np.uint8)
    if delta > 0:
        h_fp = truncated_half_widths(profiles.fp, delta)
        h_fn = truncated_half_widths(profiles.fn, delta)
    for b, start in enumerate(range(0, m, ROW_BLOCK)):
        stop = min(start + ROW_BLOCK, m)
        u = _stream(cfg.master_seed, 1, replicate_index, 1, b).random((stop - start, n))
        t = truth[start:stop]
        if delta > 0:
            jitter = _stream(cfg.master_seed, 1, replicate_index, 2, b).random((stop - start, n))
            out[start:stop] = kernels.perturbed_from_truth(u, jitter, t, profiles.fp, profiles.fn, h_fp, h_fn)
        else:
            out[start:stop] = kernels.bernoulli_from_truth(u, t, profiles.fp, profiles.fn)
    return out


def _dataset(cfg, profiles, replicate_index, delta):
    if len(profiles) != cfg.n:
        raise PreconditionError("profile count does not match cfg.n")
    truth = draw_truth(cfg, replicate_index)
    labels = _labels(cfg, profiles, truth, replicate_index, delta)
    return SyntheticDataset(
        LabelMatrix(labels, profiles.names),
        GroundTruth(truth),
        profiles,
        replicate_index,
    )


def generate_replicate(cfg: SimConfig, profiles: ProfileSet, replicate_index: int) -> SyntheticDataset:
    """One dataset under constant per-detector error rates."""
    return _dataset(cfg, profiles, replicate_index, 0.0)


def generate_perturbed(cfg: SimConfig, profiles: ProfileSet, replicate_index: int) -> SyntheticDataset:
    """One dataset whose error rates vary per file.

    Each (file, detector) cell draws its rate uniformly from
    ``[p - h, p + h]`` with ``h = min(delta, p, 1 - p)``, i.e. the interval is
    shrunk symmetrically about ``p`` until it fits in [0, 1].
    """
    return _dataset(cfg, profiles, replicate_index, cfg.perturbation_delta)


def generate(cfg: SimConfig, profiles: ProfileSet, replicate_index: int) -> SyntheticDataset:
    if cfg.perturbation_delta > 0:
        return generate_perturbed(cfg, profiles, replicate_index)
    return generate_replicate(cfg, profiles, replicate_index)


def _fixture_profiles() -> ProfileSet:
    rng = _stream(FIXTURE_SEED, 0)
    n = 47
    fn = np.full(n + 1, np.nan)  # 1-based
    fp = np.full(n + 1, np.nan)
    fn[1:9] = FIXTURE_POOR_FN
    for pos, (a_fp, a_fn) in FIXTURE_ANCHORS.items():
        fp[pos], fn[pos] = a_fp, a_fn
    fn[n] = FIXTURE_FN_RANGE[0]
    # fill the gaps between consecutive fixed fn values, keeping the order decreasing
    fixed = [pos for pos in range(1, n + 1) if not np.isnan(fn[pos])]
    for lo_pos, hi_pos in zip(fixed, fixed[1:]):
        gap = hi_pos - lo_pos - 1
        if gap:
            upper = min(fn[lo_pos], 0.5)
            fn[lo_pos + 1 : hi_pos] = np.sort(rng.uniform(fn[hi_pos], upper, size=gap))[::-1]
    free = [pos for pos in range(1, n + 1) if np.isnan(fp[pos])]
    fp[free] = rng.uniform(*FIXTURE_FP_RANGE, size=len(free))
    fp[46] = FIXTURE_FP_RANGE[1]
    return ProfileSet(fp[1:], fn[1:], tuple(f"sim{j:02d}" for j in range(1, n + 1)))


def truly_heterogeneous_fixture(n_replicates: int = 1000, m: int = FIXTURE_M, master_seed: int = 0) -> SimConfig:
    """The 47-detector, wide-range configuration, detectors ordered by decreasing fn.

    Positions 1-8 are the poor detectors (fn >= 0.5); positions 3, 13, 23, 33
    and 43 carry fixed published rates; other rates are drawn once from the
    stated ranges with ``FIXTURE_SEED``.
    """
    return SimConfig(
        m=m,
        pi1=FIXTURE_PI1,
        n=47,
        profile_source=_fixture_profiles(),
        n_replicates=n_replicates,
        master_seed=master_seed,
    )
