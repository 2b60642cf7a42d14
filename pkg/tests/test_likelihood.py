import math
import warnings

import numpy as np
import oracles
import pytest
from conftest import random_dataset, random_params
from hypothesis import given
from hypothesis import strategies as st

from bebms.likelihood import (
    compute_posteriors,
    event_weights,
    log_density_gaussian,
    loglik_healthy,
    loglik_participant,
    loglik_stage,
    total_loglik,
)
from bebms.types import Dataset, DomainError, EmissionParams, MixturePriors, PosteriorState

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


# --- log_density_gaussian -------------------------------------------------


def test_standard_normal_at_zero():
    assert log_density_gaussian(0, 0, 1) == pytest.approx(-0.9189385, abs=1e-7)


@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3))
def test_density_peak(mean, std):
    assert log_density_gaussian(mean, mean, std) == pytest.approx(-math.log(std) - HALF_LOG_2PI, rel=1e-12)


def test_density_at_mmse_post_event_mean():
    assert log_density_gaussian(25.31, 25.31, 2.38) == pytest.approx(-math.log(2.38) - HALF_LOG_2PI, rel=1e-14)


@pytest.mark.parametrize("args", [(0, 0, 0), (0, 0, -1), (math.nan, 0, 1), (0, math.inf, 1)])
def test_density_domain_errors(args):
    with pytest.raises(DomainError):
        log_density_gaussian(*args)


# --- loglik_healthy / loglik_stage ------------------------------------------


def test_healthy_at_pre_event_means(rng):
    p = random_params(rng, 4)
    expected = sum(-math.log(s) - HALF_LOG_2PI for s in p.phi_std)
    assert loglik_healthy(p.phi_mean, p) == pytest.approx(expected, rel=1e-12)


def test_healthy_skips_missing_entry(rng):
    p = random_params(rng, 3)
    row = rng.normal(size=3)
    row_missing = row.copy()
    row_missing[1] = np.nan
    drop = oracles.gauss_logpdf(row[1], p.phi_mean[1], p.phi_std[1])
    assert loglik_healthy(row_missing, p) == pytest.approx(loglik_healthy(row, p) - drop, abs=1e-12)
    assert loglik_healthy(row, p, mask=[False, True, False]) == pytest.approx(loglik_healthy(row_missing, p))


def test_healthy_all_missing_warns_and_returns_zero(rng):
    p = random_params(rng, 2)
    with pytest.warns(RuntimeWarning):
        assert loglik_healthy([np.nan, np.nan], p) == 0.0


@given(st.integers(0, 2**31))
def test_healthy_matches_scalar_oracle(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, 3)
    row = rng.normal(size=3) * 3
    assert loglik_healthy(row, p) == pytest.approx(oracles.healthy_loglik(row, p), rel=1e-12)


def test_stage_last_is_all_post_event(rng):
    p = random_params(rng, 4)
    row = rng.normal(size=4)
    ranks = rng.permutation(4)
    expected = sum(oracles.gauss_logpdf(row[n], p.theta_mean[n], p.theta_std[n]) for n in range(4))
    assert loglik_stage(row, ranks, 3, p) == pytest.approx(expected, rel=1e-12)


def test_stage_zero_marks_only_first_event(rng):
    p = random_params(rng, 4)
    row = rng.normal(size=4)
    ranks = np.array([2, 0, 3, 1])
    expected = sum(
        oracles.gauss_logpdf(row[n], p.theta_mean[n], p.theta_std[n])
        if n == 1
        else oracles.gauss_logpdf(row[n], p.phi_mean[n], p.phi_std[n])
        for n in range(4)
    )
    assert loglik_stage(row, ranks, 0, p) == pytest.approx(expected, rel=1e-12)


@given(st.integers(0, 2**31), st.integers(0, 2))
def test_stage_matches_partition_oracle(seed, k):
    rng = np.random.default_rng(seed)
    p = random_params(rng, 3)
    row = rng.normal(size=3) * 2
    ranks = rng.permutation(3)
    assert loglik_stage(row, ranks, k, p) == pytest.approx(oracles.stage_loglik(row, ranks, k, p), rel=1e-12)


@pytest.mark.parametrize("k", [-1, 3])
def test_stage_out_of_range(rng, k):
    p = random_params(rng, 3)
    with pytest.raises(DomainError):
        loglik_stage(np.zeros(3), [0, 1, 2], k, p)


@given(st.integers(0, 2**31))
def test_missing_entry_removes_exactly_one_term(seed):
    rng = np.random.default_rng(seed)
    N = 5
    p = random_params(rng, N)
    row = rng.normal(size=N)
    ranks = rng.permutation(N)
    k = int(rng.integers(N))
    n = int(rng.integers(N))
    mask = np.zeros(N, bool)
    mask[n] = True
    dist = (p.theta_mean, p.theta_std) if ranks[n] <= k else (p.phi_mean, p.phi_std)
    term = oracles.gauss_logpdf(row[n], dist[0][n], dist[1][n])
    assert loglik_stage(row, ranks, k, p, mask=mask) == pytest.approx(loglik_stage(row, ranks, k, p) - term, abs=1e-9)


# --- loglik_participant -----------------------------------------------------


def test_point_mass_stage_prior_reduces_to_stage(rng):
    p = random_params(rng, 4)
    row = rng.normal(size=4)
    ranks = rng.permutation(4)
    stage = np.zeros(4)
    stage[2] = 1.0
    priors = MixturePriors([1.0], [stage])
    assert loglik_participant(row, 1, ranks, priors, p) == pytest.approx(loglik_stage(row, ranks, 2, p), rel=1e-12)


def test_identical_subtypes_equal_single_subtype(rng):
    p = random_params(rng, 4)
    row = rng.normal(size=4)
    ranks = rng.permutation(4)
    stage = rng.dirichlet(np.ones(4))
    one = loglik_participant(row, 1, ranks, MixturePriors([1.0], [stage]), p)
    two = loglik_participant(row, 1, np.array([ranks, ranks]), MixturePriors([0.5, 0.5], [stage, stage]), p)
    assert two == pytest.approx(one, rel=1e-12)


def test_healthy_label_scores_as_healthy(rng):
    p = random_params(rng, 3)
    row = rng.normal(size=3)
    priors = MixturePriors([1.0], [np.full(3, 1 / 3)])
    assert loglik_participant(row, 0, [0, 1, 2], priors, p) == loglik_healthy(row, p)


@given(st.integers(0, 2**31))
def test_participant_matches_decimal_mixture_oracle(seed):
    rng = np.random.default_rng(seed)
    p = random_params(rng, 3)
    row = rng.normal(size=3) * 2
    ranks = np.array([rng.permutation(3) for _ in range(2)])
    priors = MixturePriors(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(3), size=2))
    expected = oracles.participant_loglik(row, 1, ranks, priors.subtype, priors.stage, p)
    assert loglik_participant(row, 1, ranks, priors, p) == pytest.approx(expected, rel=1e-9)


def test_extreme_values_do_not_underflow():
    N = 1000
    p = EmissionParams(np.full(N, 10.0), np.ones(N), np.zeros(N), np.ones(N))
    row = np.full(N, 40.0)  # every term around -450 nats
    ranks = np.arange(N)
    priors = MixturePriors([1.0], [np.full(N, 1.0 / N)])
    ll = loglik_participant(row, 1, ranks, priors, p)
    expected = loglik_stage(row, ranks, N - 1, p) + math.log(1.0 / N)
    assert math.isfinite(ll)
    assert ll == pytest.approx(expected, rel=1e-9)


def test_prior_shape_mismatch_is_an_error(rng):
    p = random_params(rng, 3)
    with pytest.raises(DomainError):
        loglik_participant(np.zeros(3), 1, [0, 1, 2], MixturePriors([1.0], [[0.5, 0.5]]), p)


def test_mixture_consistency_in_probability_space(rng):
    for _ in range(20):
        N = int(rng.integers(2, 6))
        p = random_params(rng, N)
        row = rng.normal(size=N)
        ranks = np.array([rng.permutation(N) for _ in range(2)])
        priors = MixturePriors(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(N), size=2))
        direct = sum(
            priors.subtype[t] * priors.stage[t, k] * math.exp(loglik_stage(row, ranks[t], k, p))
            for t in range(2)
            for k in range(N)
        )
        assert math.exp(loglik_participant(row, 1, ranks, priors, p)) == pytest.approx(direct, rel=1e-9)


# --- total_loglik / compute_posteriors ------------------------------------


def test_total_single_participant(rng):
    p = random_params(rng, 3)
    ds = Dataset(rng.normal(size=(1, 3)), [1])
    priors = MixturePriors([1.0], [[0.2, 0.3, 0.5]])
    assert total_loglik(ds, [[2, 0, 1]], priors, p) == pytest.approx(
        loglik_participant(ds.values[0], 1, [[2, 0, 1]], priors, p), rel=1e-12
    )


def test_total_duplicated_dataset_doubles(small_problem):
    data, ranks, priors, params = small_problem
    doubled = Dataset(np.vstack([data.values, data.values]), np.r_[data.labels, data.labels])
    assert total_loglik(doubled, ranks, priors, params) == pytest.approx(
        2 * total_loglik(data, ranks, priors, params), rel=1e-12
    )


def test_total_matches_row_oracle(rng):
    p = random_params(rng, 4)
    ds = random_dataset(rng, 5, 4, missing_rate=0.1)
    ranks = np.array([rng.permutation(4) for _ in range(2)])
    priors = MixturePriors(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(4), size=2))
    expected = sum(
        oracles.participant_loglik(ds.values[j], ds.labels[j], ranks, priors.subtype, priors.stage, p) for j in range(5)
    )
    assert total_loglik(ds, ranks, priors, p) == pytest.approx(expected, rel=1e-10)


@given(st.integers(0, 2**31), st.booleans())
def test_posteriors_match_enumeration_oracle(seed, blind):
    rng = np.random.default_rng(seed)
    N, T, J = 3, 2, 4
    p = random_params(rng, N)
    ds = random_dataset(rng, J, N, n_controls=1)
    ranks = np.array([rng.permutation(N) for _ in range(T)])
    K = N + 1 if blind else N
    priors = MixturePriors(rng.dirichlet(np.ones(T)), rng.dirichlet(np.ones(K), size=T))
    post = compute_posteriors(ds, ranks, priors, p, blind=blind)
    sp, sub, total = oracles.posteriors(ds.values, ds.labels, ranks, priors.subtype, priors.stage, p, blind)
    np.testing.assert_allclose(post.stage_post, sp, rtol=1e-9, atol=1e-14)
    np.testing.assert_allclose(post.subtype_post, sub, rtol=1e-9, atol=1e-14)
    assert post.total_loglik == pytest.approx(total, rel=1e-9)


def test_posteriors_normalised_and_healthy_zeroed(small_problem):
    data, ranks, priors, params = small_problem
    post = compute_posteriors(data, ranks, priors, params)
    prog = data.labels == 1
    np.testing.assert_allclose(post.stage_post[prog].sum(axis=2), 1.0, atol=1e-9)
    np.testing.assert_allclose(post.subtype_post[prog].sum(axis=1), 1.0, atol=1e-9)
    assert not post.stage_post[~prog].any()
    assert not post.subtype_post[~prog].any()


def test_flat_likelihood_returns_priors():
    # zero-information data: theta == phi so every hypothesis has the same likelihood
    p = EmissionParams(np.zeros(3), np.ones(3), np.zeros(3), np.ones(3))
    ds = Dataset(np.random.default_rng(0).normal(size=(4, 3)), [1, 1, 1, 1])
    priors = MixturePriors([0.3, 0.7], [[0.1, 0.2, 0.7], [0.5, 0.25, 0.25]])
    post = compute_posteriors(ds, [[0, 1, 2], [2, 1, 0]], priors, p)
    np.testing.assert_allclose(post.stage_post, np.broadcast_to(priors.stage, (4, 2, 3)), atol=1e-12)
    np.testing.assert_allclose(post.subtype_post, np.broadcast_to(priors.subtype, (4, 2)), atol=1e-12)


def test_point_mass_stage_prior_gives_point_mass_posterior(small_problem):
    data, ranks, _, params = small_problem
    priors = MixturePriors([0.5, 0.5], [[0, 1.0, 0], [0, 0, 1.0]])
    post = compute_posteriors(data, ranks, priors, params)
    prog = data.labels == 1
    assert np.array_equal(post.stage_post[prog, 0], np.tile([0, 1.0, 0], (prog.sum(), 1)))
    assert np.array_equal(post.stage_post[prog, 1], np.tile([0, 0, 1.0], (prog.sum(), 1)))


def test_impossible_row_falls_back_to_uniform_with_warning():
    p = EmissionParams(np.zeros(2), np.ones(2), np.zeros(2), np.ones(2))
    ds = Dataset(np.zeros((2, 2)), [1, 1])
    priors = MixturePriors([1.0], [[1.0, 0.0]])
    # stage prior column 1 is 0; column 0 fine -> not degenerate
    compute_posteriors(ds, [[0, 1]], priors, p)
    huge = Dataset(np.full((1, 2), 1e200), [1])
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        post = compute_posteriors(huge, [[0, 1]], MixturePriors([1.0], [[0.5, 0.5]]), p)
    assert any("degenerate" in str(w.message) for w in caught)
    np.testing.assert_allclose(post.stage_post[0, 0], [0.5, 0.5])


@given(st.integers(0, 2**31))
def test_permuting_biomarkers_leaves_likelihood_unchanged(seed):
    rng = np.random.default_rng(seed)
    N = 5
    p = random_params(rng, N)
    ds = random_dataset(rng, 6, N, missing_rate=0.1)
    ranks = np.array([rng.permutation(N) for _ in range(2)])
    priors = MixturePriors(rng.dirichlet(np.ones(2)), rng.dirichlet(np.ones(N), size=2))
    perm = rng.permutation(N)
    ds2 = Dataset(ds.values[:, perm], ds.labels)
    p2 = p.subset(perm)
    before = total_loglik(ds, ranks, priors, p)
    after = total_loglik(ds2, ranks[:, perm], priors, p2)
    assert after == pytest.approx(before, rel=1e-12)


# --- event_weights --------------------------------------------------------


def test_rank_zero_everywhere_is_always_post_event(small_problem):
    data, _, priors, params = small_problem
    ranks = np.array([[0, 1, 2], [0, 2, 1]])
    w = event_weights(compute_posteriors(data, ranks, priors, params), ranks)
    prog = data.labels == 1
    np.testing.assert_allclose(w[prog, 0, 0], 1.0, atol=1e-12)


def test_last_rank_zero_weight_when_final_stage_excluded(small_problem):
    data, _, _, params = small_problem
    ranks = np.array([[1, 0, 2], [0, 1, 2]])
    priors = MixturePriors([0.5, 0.5], [[0.5, 0.5, 0.0], [0.3, 0.7, 0.0]])
    w = event_weights(compute_posteriors(data, ranks, priors, params), ranks)
    assert np.all(w[:, 2, 0] == 0.0)


@given(st.integers(0, 2**31), st.booleans())
def test_event_weights_match_triple_loop(seed, blind):
    rng = np.random.default_rng(seed)
    N, T = 3, 2
    p = random_params(rng, N)
    ds = random_dataset(rng, 5, N)
    ranks = np.array([rng.permutation(N) for _ in range(T)])
    K = N + 1 if blind else N
    priors = MixturePriors(rng.dirichlet(np.ones(T)), rng.dirichlet(np.ones(K), size=T))
    post = compute_posteriors(ds, ranks, priors, p, blind=blind)
    w = event_weights(post, ranks)
    expected = oracles.event_weights(post.stage_post, post.subtype_post, ranks, post.stage_offset)
    np.testing.assert_allclose(w[..., 0], expected, atol=1e-12)
    assert np.all((w >= 0) & (w <= 1))
    np.testing.assert_allclose(w.sum(axis=2), 1.0, atol=1e-12)
    if not blind:
        assert np.all(w[ds.labels == 0, :, 1] == 1.0)


def test_event_weights_shape_check():
    post = PosteriorState(np.zeros((1, 1, 3)), np.zeros((1, 1)), 0.0)
    with pytest.raises(DomainError):
        event_weights(post, [[0, 1, 2, 3]])
