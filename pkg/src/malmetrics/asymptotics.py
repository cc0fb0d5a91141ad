"""Large-sample means and variances of the naive estimators.

Conditioned on the true class ``c``, the four (vote, label) cell counts of a
detector are multinomial with probabilities ``p_c,ab``; the naive estimators
are ratios of cell totals, so their moments follow from the multinomial
moments by the delta method.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateDenominator, PreconditionError
from .model import ProfileSet
from .probability import McConfig, leave_one_out_lower_tails

# Cell order used throughout: (01, 00, 10, 11), first digit vote, second label.
C01, C00, C10, C11 = range(4)


@dataclass(frozen=True)
class ConditionalCellProbs:
    """Cell probabilities for one detector given true class ``truth``."""

    detector: int
    truth: int
    p01: float
    p00: float
    p10: float
    p11: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p01, self.p00, self.p10, self.p11])


def cell_prob_table(profiles: ProfileSet, mc: McConfig | None = None, key: Sequence[int] = ()) -> np.ndarray:
    """All cell probabilities at once, shape ``(2, n, 4)`` indexed ``[c, j, cell]``."""
    n = len(profiles)
    if n < 2:
        raise PreconditionError("cell probabilities need n >= 2 detectors")
    out = np.empty((2, n, 4))
    for c, label_one in ((1, 1.0 - profiles.fn), (0, profiles.fp)):
        tails = leave_one_out_lower_tails(label_one, mc, (*key, c))
        below_lo, below_hi = tails[:, 0], tails[:, 1]
        out[c, :, C01] = label_one * below_lo
        out[c, :, C00] = (1.0 - label_one) * below_hi
        out[c, :, C10] = (1.0 - label_one) * (1.0 - below_hi)
        out[c, :, C11] = label_one * (1.0 - below_lo)
    return out


def cell_probs(profiles: ProfileSet, j: int, c: int, mc: McConfig | None = None) -> ConditionalCellProbs:
    table = cell_prob_table(profiles, mc)
    return ConditionalCellProbs(j, c, *(float(v) for v in table[c, j]))


def portion_moments(pi1: float, m: int, p11: float, p01: float) -> tuple[float, float]:
    """Mean and variance of the naive portion estimator."""
    if m < 1:
        raise PreconditionError("m must be >= 1")
    mu1 = pi1 * p11 + (1.0 - pi1) * p01
    var1 = (pi1 * p11 * (1.0 - p11) + (1.0 - pi1) * p01 * (1.0 - p01)) / m
    return mu1, var1


@dataclass(frozen=True, eq=False)
class AsymptoticMoments:
    """Multinomial and delta-method moments for one detector.

    ``mu``, ``sigma2`` are ``(2, 4)`` arrays indexed ``[c, cell]``; ``cov`` is
    ``(2, 4, 4)`` with ``sigma2`` on the diagonal and the covariances ``rho``
    off it. ``estimators`` maps ``fp``/``fn``/``ppv``/``npv`` to
    ``(mean, variance)``, or to ``None`` when the mean's denominator is zero.
    """

    detector: int
    m0: int
    m1: int
    cells: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    cov: np.ndarray
    d: tuple[float, float, float, float] | None
    e: tuple[float, float, float, float] | None
    estimators: dict
    ppv_var_swapped: float | None

    def rho(self, c: int, a: int, b: int) -> float:
        return float(self.cov[c, a, b])

    def mean(self, name: str) -> float:
        return self._get(name)[0]

    def var(self, name: str) -> float:
        return self._get(name)[1]

    def _get(self, name):
        v = self.estimators[name]
        if v is None:
            raise DegenerateDenominator(name, self.detector)
        return v

    @property
    def unavailable(self) -> tuple[str, ...]:
        return tuple(k for k, v in self.estimators.items() if v is None)


def _ratio_moments(mu, cov, num, other):
    """Mean and delta-method variance of ``(x_num) / (x_num + x_other)``.

    ``x_a`` is the sum over both classes of cell ``a``. Returns the mean, the
    variance, and the partial derivatives with respect to the numerator cell
    and the other cell.
    """
    t_num = mu[:, num].sum()
    t_other = mu[:, other].sum()
    den = t_num + t_other
    if den <= 0:
        return None
    g_num = t_other / den**2
    g_other = -t_num / den**2
    var = 0.0
    for c in (0, 1):
        var += (
            g_num**2 * cov[c, num, num]
            + 2.0 * g_num * g_other * cov[c, num, other]
            + g_other**2 * cov[c, other, other]
        )
    return t_num / den, max(var, 0.0), g_num, g_other


def moments_from_cells(cells_j: np.ndarray, j: int, m0: int, m1: int) -> AsymptoticMoments:
    """Build the moments of detector ``j`` from its ``(2, 4)`` cell probabilities."""
    if m0 < 1 or m1 < 1:
        raise PreconditionError("m0 and m1 must both be >= 1")
    counts = np.array([m0, m1], dtype=np.float64)[:, None]
    mu = counts * cells_j
    sigma2 = counts * cells_j * (1.0 - cells_j)
    cov = -counts[:, :, None] * cells_j[:, :, None] * cells_j[:, None, :]
    for c in (0, 1):
        np.fill_diagonal(cov[c], sigma2[c])

    fp = _ratio_moments(mu, cov, C01, C00)
    fn = _ratio_moments(mu, cov, C10, C11)
    ppv = _ratio_moments(mu, cov, C11, C01)
    npv = _ratio_moments(mu, cov, C00, C10)

    d = None
    if fp is not None and fn is not None:
        d = (fp[2], fp[3], fn[2], fn[3])
    e = None
    swapped = None
    if ppv is not None and npv is not None:
        e1, e2 = ppv[2], ppv[3]
        e = (e1, e2, npv[2], npv[3])
        # alternative form pairing e1 with the 01 cell; the gradient pairs it with 11
        swapped = sum(
            e1**2 * cov[c, C01, C01] + 2 * e1 * e2 * cov[c, C01, C11] + e2**2 * cov[c, C11, C11]
            for c in (0, 1)
        )
    estimators = {
        name: None if r is None else (float(r[0]), float(r[1]))
        for name, r in (("fp", fp), ("fn", fn), ("ppv", ppv), ("npv", npv))
    }
    return AsymptoticMoments(
        detector=j,
        m0=m0,
        m1=m1,
        cells=cells_j.copy(),
        mu=mu,
        sigma2=sigma2,
        cov=cov,
        d=d,
        e=e,
        estimators=estimators,
        ppv_var_swapped=swapped,
    )


def detector_moments(profiles: ProfileSet, j: int, m0: int, m1: int, mc: McConfig | None = None) -> AsymptoticMoments:
    table = cell_prob_table(profiles, mc)
    return moments_from_cells(table[:, j, :], j, m0, m1)


def all_detector_moments(profiles: ProfileSet, m0: int, m1: int, mc: McConfig | None = None) -> list[AsymptoticMoments]:
    table = cell_prob_table(profiles, mc)
    return [moments_from_cells(table[:, j, :], j, m0, m1) for j in range(len(profiles))]
