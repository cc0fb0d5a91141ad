from dataclasses import replace

import numpy as np
import pytest

from malmetrics.errors import PreconditionError
from malmetrics.model import ProfileSet, majority_vote
from malmetrics.naive import naive_estimates, truth_estimates
from malmetrics.synthetic import (
    FIXTURE_ANCHORS,
    FIXTURE_FN_RANGE,
    FIXTURE_FP_RANGE,
    ROW_BLOCK,
    SimConfig,
    UniformRange,
    draw_profiles,
    draw_truth,
    generate,
    generate_perturbed,
    generate_replicate,
    truly_heterogeneous_fixture,
    truncated_half_widths,
)


def test_profile_draws_respect_range():
    for eps in (0.0, 0.3, 0.7):
        ps = draw_profiles(SimConfig(100, 0.2, 40, UniformRange(eps)))
        for arr in (ps.fp, ps.fn):
            assert ((arr >= eps) & (arr <= eps + 0.1)).all()


def test_explicit_profiles_pass_through():
    ps = ProfileSet([0.1, 0.2], [0.3, 0.4])
    assert draw_profiles(SimConfig(10, 0.5, 2, ps)) is ps
    with pytest.raises(PreconditionError):
        SimConfig(10, 0.5, 3, ps)


def test_profiles_depend_only_on_seed():
    a = draw_profiles(SimConfig(100, 0.2, 5, UniformRange(0.1), master_seed=3))
    b = draw_profiles(SimConfig(999, 0.7, 5, UniformRange(0.1), master_seed=3, n_replicates=2))
    c = draw_profiles(SimConfig(100, 0.2, 5, UniformRange(0.1), master_seed=4))
    assert np.array_equal(a.fp, b.fp) and not np.array_equal(a.fp, c.fp)


def test_exact_malicious_count():
    cfg = SimConfig(50_000, 0.2, 5, UniformRange(0.1))
    assert cfg.m1 == 10_000
    assert int(draw_truth(cfg, 0).sum()) == 10_000
    assert SimConfig(7, 0.5, 1, UniformRange(0.0)).m1 == 4  # 3.5 rounds away from zero


def test_perfect_detectors_copy_the_truth():
    cfg = SimConfig(2000, 0.3, 4, ProfileSet([0.0] * 4, [0.0] * 4))
    ds = generate_replicate(cfg, draw_profiles(cfg), 0)
    assert (ds.matrix.labels == ds.truth.truth[:, None]).all()
    assert np.array_equal(ds.votes.votes, ds.truth.truth)
    est = naive_estimates(ds.matrix, majority_vote(ds.matrix))
    assert est.pi1 == 0.3 and (est.fp == 0).all() and (est.fn == 0).all()


def test_empirical_rates_converge_to_profiles():
    cfg = SimConfig(60_000, 0.3, 6, UniformRange(0.2), master_seed=5)
    prof = draw_profiles(cfg)
    ds = generate_replicate(cfg, prof, 0)
    emp = truth_estimates(ds.matrix, ds.truth)
    assert np.all(np.abs(emp.fp - prof.fp) <= 3 * np.sqrt(prof.fp * (1 - prof.fp) / cfg.m0))
    assert np.all(np.abs(emp.fn - prof.fn) <= 3 * np.sqrt(prof.fn * (1 - prof.fn) / cfg.m1))


def test_replicates_are_independent_of_generation_order():
    cfg = SimConfig(ROW_BLOCK * 2 + 17, 0.4, 3, UniformRange(0.1), master_seed=8)
    prof = draw_profiles(cfg)
    late = generate(cfg, prof, 5).matrix.labels.copy()
    for r in range(5):
        generate(cfg, prof, r)
    assert np.array_equal(generate(cfg, prof, 5).matrix.labels, late)
    assert not np.array_equal(generate(cfg, prof, 4).matrix.labels, late)


def test_zero_delta_perturbation_is_the_plain_path():
    cfg = SimConfig(3000, 0.3, 4, UniformRange(0.2), master_seed=2)
    prof = draw_profiles(cfg)
    a = generate_replicate(cfg, prof, 1)
    b = generate_perturbed(cfg, prof, 1)
    assert np.array_equal(a.matrix.labels, b.matrix.labels)


def test_truncated_half_widths():
    h = truncated_half_widths(np.array([0.05, 0.5, 0.97, 0.0]), 0.2)
    np.testing.assert_allclose(h, [0.05, 0.2, 0.03, 0.0])


def test_perturbation_keeps_marginal_rates_and_truth():
    cfg = SimConfig(80_000, 0.25, 3, ProfileSet([0.05, 0.3, 0.5], [0.1, 0.45, 0.02]), master_seed=6)
    pert = replace(cfg, perturbation_delta=0.2)
    a = generate(cfg, cfg.profile_source, 0)
    b = generate(pert, cfg.profile_source, 0)
    assert np.array_equal(a.truth.truth, b.truth.truth)
    assert not np.array_equal(a.matrix.labels, b.matrix.labels)
    emp = truth_estimates(b.matrix, b.truth)
    prof = cfg.profile_source
    assert np.all(np.abs(emp.fp - prof.fp) <= 4 * np.sqrt(prof.fp * (1 - prof.fp) / cfg.m0) + 1e-12)
    assert np.all(np.abs(emp.fn - prof.fn) <= 4 * np.sqrt(prof.fn * (1 - prof.fn) / cfg.m1) + 1e-12)


def test_perturbed_cell_probabilities_stay_in_interval():
    from malmetrics.kernels import numpy_impl

    truth = np.array([0, 0, 1, 1], dtype=np.uint8)
    fp, fn = np.array([0.05]), np.array([0.9])
    hf, hn = truncated_half_widths(fp, 0.2), truncated_half_widths(fn, 0.2)
    # uniforms just below / above the interval ends decide the label
    jitter = np.array([[1.0], [0.0], [1.0], [0.0]])
    u = np.array([[0.0999], [0.0001], [0.9999], [0.2001]])
    labels = numpy_impl.perturbed_from_truth(u, jitter, truth, fp, fn, hf, hn)
    assert labels[:, 0].tolist() == [1, 0, 0, 0]


def test_fixture_layout():
    cfg = truly_heterogeneous_fixture()
    ps = cfg.profile_source
    assert (cfg.m, cfg.pi1, cfg.m1, cfg.n) == (100_000, 0.58579, 58_579, 47)
    for pos, (fp, fn) in FIXTURE_ANCHORS.items():
        assert (ps.fp[pos - 1], ps.fn[pos - 1]) == (fp, fn)
    assert (ps.fn[:8] >= 0.5).all() and (ps.fn[8:] < 0.5).all()
    assert (np.diff(ps.fn) <= 0).all()
    assert ps.fn.max() == FIXTURE_FN_RANGE[1] and ps.fn.min() == FIXTURE_FN_RANGE[0]
    assert ps.fp.min() == FIXTURE_FP_RANGE[0] and ps.fp.max() == FIXTURE_FP_RANGE[1]
    assert np.array_equal(truly_heterogeneous_fixture().profile_source.fp, ps.fp)


def test_kappa_prefix():
    cfg = truly_heterogeneous_fixture()
    sub = cfg.with_kappa(15)
    assert sub.n == 15
    assert np.array_equal(sub.profile_source.fn, cfg.profile_source.fn[:15])
    with pytest.raises(PreconditionError):
        cfg.with_kappa(48)
    with pytest.raises(PreconditionError):
        SimConfig(10, 0.5, 3, UniformRange(0.1)).with_kappa(2)


def test_config_validation():
    with pytest.raises(PreconditionError):
        SimConfig(0, 0.5, 3, UniformRange(0.1))
    with pytest.raises(PreconditionError):
        SimConfig(10, 1.5, 3, UniformRange(0.1))
    with pytest.raises(PreconditionError):
        UniformRange(0.95)
