import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from malmetrics.adjusted import (
    AdjustedCounts,
    AdjustmentSystem,
    ConditionalVoteProbs,
    adjust_fp_fn,
    adjust_pi1,
    adjust_ppv_npv,
    alpha_beta,
    alpha_beta_all,
    full_adjust,
    round_half_away,
)
from malmetrics.asymptotics import cell_prob_table
from malmetrics.errors import PreconditionError, ZeroDenominator
from malmetrics.model import EstimateKind, LabelMatrix, MetricEstimates, ProfileSet, majority_vote
from malmetrics.naive import naive_estimates
from malmetrics.probability import McConfig, vote_correct_probs

from oracles import brute_loo_tails


def test_round_half_away():
    assert [round_half_away(x) for x in (0.5, 1.5, 2.5, 2.4999, -0.5, 58578.5)] == [1, 2, 3, 2, -1, 58579]


def test_adjust_pi1_examples():
    assert adjust_pi1(0.37, 1.0, 0.0).value == 0.37
    assert adjust_pi1(0.05, 0.9, 0.05).value == 0.0
    r = adjust_pi1(0.01, 0.9, 0.05)
    assert r.value == 0.0 and r.clamped
    r = adjust_pi1(0.3, 0.5, 0.5 - 1e-8)
    assert r.ill_conditioned and r.value == 0.3


@settings(max_examples=200)
@given(st.floats(0, 1), st.floats(0.5, 1), st.floats(0, 0.45))
def test_adjust_pi1_inverts_vote_moment(pi1, p11, p01):
    naive = pi1 * p11 + (1 - pi1) * p01
    assert adjust_pi1(naive, p11, p01).value == pytest.approx(pi1, abs=1e-9)


def test_adjusted_counts():
    c = AdjustedCounts.from_pi1(100_000, 0.58579)
    assert (c.m1_hat, c.m0_hat) == (58_579, 41_421)
    assert AdjustedCounts.from_pi1(10, 1.0) == AdjustedCounts(10, 0)


def _naive_with_rates(fp, fn, pi1=0.5):
    n = len(fp)
    return MetricEstimates(pi1, fp, fn, np.full(n, 0.5), np.full(n, 0.5), EstimateKind.NAIVE)


def test_alpha_beta_with_perfect_others():
    for n in (3, 4, 7):
        cond = alpha_beta(_naive_with_rates([0.0] * n, [0.0] * n), 1)
        assert cond.alpha1 == 0.0 and cond.alpha2 == 0.0
        assert cond.beta2 == 1.0 and cond.beta1 == 1.0


def test_beta2_example():
    cond = alpha_beta(_naive_with_rates([0.3, 0.2, 0.4], [0.1, 0.1, 0.1]), 0)
    assert cond.beta2 == pytest.approx(0.92, abs=1e-12)


@settings(max_examples=60)
@given(st.integers(2, 6).flatmap(lambda n: st.tuples(
    st.lists(st.floats(0, 1), min_size=n, max_size=n), st.lists(st.floats(0, 1), min_size=n, max_size=n))))
def test_alpha_beta_match_enumeration(rates):
    fp, fn = rates
    conds = alpha_beta_all(fp, fn)
    for j, cond in enumerate(conds):
        a1, a2 = brute_loo_tails([1 - x for x in fn], j)
        b1, b2 = brute_loo_tails(fp, j)
        assert (cond.alpha1, cond.alpha2) == pytest.approx((a1, a2), abs=1e-12)
        assert (cond.beta1, cond.beta2) == pytest.approx((b1, b2), abs=1e-12)


def _expected_naive_rates(fp, fn, m0, m1):
    """Ratio of expected cell totals (the large-sample naive means)."""
    table = cell_prob_table(ProfileSet(fp, fn))
    totals = m0 * table[0] + m1 * table[1]  # (n, 4) in cell order 01, 00, 10, 11
    return totals[:, 0] / (totals[:, 0] + totals[:, 1]), totals[:, 2] / (totals[:, 2] + totals[:, 3])


@settings(max_examples=100, deadline=None)
@given(
    st.integers(3, 6).flatmap(lambda n: st.tuples(
        st.lists(st.floats(0.0, 0.45), min_size=n, max_size=n),
        st.lists(st.floats(0.0, 0.45), min_size=n, max_size=n))),
    st.integers(100, 100_000),
    st.floats(0.05, 0.95),
)
def test_round_trip_recovers_true_rates(rates, m, pi1):
    fp, fn = rates
    counts = AdjustedCounts.from_pi1(m, pi1)
    fp_bar, fn_bar = _expected_naive_rates(fp, fn, counts.m0_hat, counts.m1_hat)
    conds = alpha_beta_all(fp, fn)
    for j in range(len(fp)):
        r = adjust_fp_fn(fp_bar[j], fn_bar[j], counts, conds[j])
        assert not r.singular
        assert r.fp == pytest.approx(fp[j], abs=1e-6)
        assert r.fn == pytest.approx(fn[j], abs=1e-6)


def test_two_detectors_are_not_identifiable():
    # with a tie counting as malicious, any flag from either detector makes the
    # vote malicious, so the (vote 0, label 1) cell is empty and the first
    # equation degenerates; the pair is reported as singular
    fp, fn = [0.1, 0.2], [0.15, 0.05]
    counts = AdjustedCounts(500, 500)
    fp_bar, fn_bar = _expected_naive_rates(fp, fn, 500, 500)
    assert fp_bar.tolist() == [0.0, 0.0]
    for j, cond in enumerate(alpha_beta_all(fp, fn)):
        r = adjust_fp_fn(fp_bar[j], fn_bar[j], counts, cond)
        assert r.singular and (r.fp, r.fn) == (fp_bar[j], fn_bar[j])


def test_singular_system_falls_back_to_naive():
    cond = ConditionalVoteProbs(0, 0.0, 0.0, 0.0, 0.0)
    r = adjust_fp_fn(0.2, 0.3, AdjustedCounts(0, 100), cond)
    assert r.singular and (r.fp, r.fn) == (0.2, 0.3)


def test_solution_satisfies_system():
    sys_ = AdjustmentSystem(3.0, 1.0, 0.5, 2.0, 0.7, -0.4)
    p, q = sys_.solve()
    assert 3.0 * p - 1.0 * q == pytest.approx(0.7)
    assert 0.5 * p - 2.0 * q == pytest.approx(-0.4)


def test_clamping_is_flagged():
    cond = ConditionalVoteProbs(0, 0.05, 0.1, 0.9, 0.95)
    counts = AdjustedCounts(500, 500)
    r = adjust_fp_fn(0.0, 0.0, counts, cond)
    assert 0.0 <= r.fp <= 1.0 and 0.0 <= r.fn <= 1.0
    raw = AdjustmentSystem.build(0.0, 0.0, counts, cond).solve()
    assert r.clamped == (tuple(raw) != (r.fp, r.fn))


def test_predictive_values_examples():
    ppv, npv = adjust_ppv_npv(0.58579, 0.0952, 0.126)
    assert ppv == pytest.approx(0.92849, abs=1e-4) and npv == pytest.approx(0.83546, abs=1e-4)
    ppv, _ = adjust_ppv_npv(0.58579, 0.227, 0.0173)
    assert ppv == pytest.approx(0.8596, abs=1e-4)
    for pi1 in (0.01, 0.5, 0.99):
        assert adjust_ppv_npv(pi1, 0.0, 0.0) == (1.0, 1.0)
    with pytest.raises(ZeroDenominator):
        adjust_ppv_npv(0.0, 0.0, 0.2)


def test_detectors_equal_to_vote_need_no_adjustment():
    labels = np.repeat(np.array([[1], [0], [1], [0], [0]], dtype=np.uint8), 4, axis=1)
    est = full_adjust(LabelMatrix(labels))
    naive = naive_estimates(LabelMatrix(labels), majority_vote(LabelMatrix(labels)))
    assert est.pi1 == naive.pi1 == 0.4
    assert est.fp.tolist() == [0.0] * 4 and est.fn.tolist() == [0.0] * 4
    assert est.ppv.tolist() == [1.0] * 4 and est.npv.tolist() == [1.0] * 4
    assert est.kind is EstimateKind.ADJUSTED and not est.flags


def test_single_detector_refused():
    with pytest.raises(PreconditionError):
        full_adjust(LabelMatrix(np.array([[1], [0]])))


def test_all_voted_malicious_refused():
    with pytest.raises(ZeroDenominator):
        full_adjust(LabelMatrix(np.ones((6, 3), dtype=np.uint8)))


def test_adjusted_values_stay_in_range_on_random_data():
    rng = np.random.default_rng(8)
    for _ in range(30):
        n = int(rng.integers(2, 9))
        truth = rng.random(300) < rng.uniform(0.1, 0.9)
        fp, fn = rng.uniform(0, 0.6, n), rng.uniform(0, 0.6, n)
        p_one = np.where(truth[:, None], 1 - fn, fp)
        labels = (rng.random((300, n)) < p_one).astype(np.uint8)
        try:
            est = full_adjust(LabelMatrix(labels))
        except ZeroDenominator:
            continue
        for name in ("fp", "fn", "ppv", "npv"):
            v = getattr(est, name)
            ok = ~np.isnan(v)
            assert ((v[ok] >= 0) & (v[ok] <= 1)).all()
        assert 0 <= est.pi1 <= 1


def test_mc_mode_is_seeded_and_close_to_exact():
    rng = np.random.default_rng(1)
    truth = rng.random(4000) < 0.3
    fp, fn = rng.uniform(0.05, 0.3, 7), rng.uniform(0.05, 0.3, 7)
    labels = (rng.random((4000, 7)) < np.where(truth[:, None], 1 - fn, fp)).astype(np.uint8)
    mat = LabelMatrix(labels)
    exact = full_adjust(mat)
    a = full_adjust(mat, McConfig(20_000, 4))
    b = full_adjust(mat, McConfig(20_000, 4))
    assert a.mode == "mc" and exact.mode == "exact"
    assert a.pi1 == b.pi1 and np.array_equal(a.fp, b.fp)
    assert abs(a.pi1 - exact.pi1) < 0.02
    assert np.abs(a.fp - exact.fp).max() < 0.03


def test_vote_probs_use_naive_rates():
    rng = np.random.default_rng(2)
    labels = (rng.random((500, 5)) < 0.3).astype(np.uint8)
    mat = LabelMatrix(labels)
    naive = naive_estimates(mat, majority_vote(mat))
    vp = vote_correct_probs(naive.fp, naive.fn)
    est = full_adjust(mat)
    expected = adjust_pi1(naive.pi1, vp.p11, vp.p01).value
    assert est.pi1 == expected
