import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_chain, sample_chain
from csimarkov import markov, rates
from csimarkov.fading import DomainError
from oracles import outage_by_enumeration


def test_outage_matches_path_enumeration(rng):
    for N in (2, 3):
        P = random_chain(rng, N, stickiness=2.0)
        m = markov.model_from_matrix(P)
        for K in range(1, 7):
            assert rates.outage_probability(m, K) == pytest.approx(
                outage_by_enumeration(P, m.stationary, K), abs=1e-12)


def test_outage_k1_is_zero():
    # [TRIVIAL] one step cannot contain two changes
    m = markov.model_from_matrix(np.array([[0.2, 0.7], [0.8, 0.3]]))
    assert rates.outage_probability(m, 1) == pytest.approx(0.0, abs=1e-15)


def test_outage_monte_carlo(rng):
    P = random_chain(rng, 4, stickiness=20.0)
    m = markov.model_from_matrix(P)
    K = 12
    x = sample_chain(rng, P, 400_000)
    changes = (x[1:] != x[:-1]).astype(int)
    windows = np.lib.stride_tricks.sliding_window_view(changes, K).sum(axis=1)[::K]
    est = np.mean(windows > 1)
    se = np.sqrt(est * (1 - est) / windows.size)
    assert abs(est - rates.outage_probability(m, K)) < 4 * se


def test_geometric_sum_against_direct():
    for a, b, K in [(0.9, 0.8, 5), (0.5, 0.5, 7), (0.999999, 0.9999991, 4000), (0.0, 0.3, 3), (0.3, 0.0, 1)]:
        direct = sum(a ** (K - k) * b ** (k - 1) for k in range(1, K + 1))
        assert rates.geometric_sum(np.array(a), np.array(b), K) == pytest.approx(direct, rel=1e-9, abs=1e-300)


def test_source_rate_two_state():
    # [DERIVED] B/T * (pi_1 a + pi_2 b)
    a, b = 0.01, 0.03
    m = markov.model_from_matrix(np.array([[1 - a, b], [a, 1 - b]]))
    pi = m.stationary
    assert rates.source_rate(m, 1, 1e-3) == pytest.approx(1e3 * (pi[0] * a + pi[1] * b), rel=1e-12)


def test_interval_search_matches_linear_scan(rng):
    P = random_chain(rng, 5, stickiness=60.0)
    m = markov.model_from_matrix(P)
    for delta in (0.01, 0.06, 0.2):
        K, capped = rates.max_feedback_interval(m, delta)
        k = 1
        while rates.outage_probability(m, k + 1) <= delta:
            k += 1
        assert (K, capped) == (k, False)


def test_interval_cap():
    m = markov.model_from_matrix(np.array([[1 - 1e-12, 1e-12], [1e-12, 1 - 1e-12]]))
    K, capped = rates.max_feedback_interval(m, 0.5, k_max=1000)
    assert (K, capped) == (1000, True)


def test_bounds_bracket_interval(rng):
    for _ in range(20):
        P = random_chain(rng, 4, stickiness=float(rng.uniform(5, 200)))
        m = markov.model_from_matrix(P)
        K, _ = rates.max_feedback_interval(m, 0.06)
        lo, hi = rates.interval_bounds(m, 0.06)
        assert lo <= K + 1 and K <= hi + 1


def test_bounds_undefined_cases():
    m = markov.model_from_matrix(np.array([[0.0, 0.5], [1.0, 0.5]]))
    lo, hi = rates.interval_bounds(m, 0.1)
    assert np.isnan(lo) and np.isnan(hi)
    m = markov.model_from_matrix(np.array([[0.9, 0.1], [0.1, 0.9]]))
    assert rates.interval_bounds(m, 0.1)[1] == float("inf")


def test_feedback_plan_static_chain():
    m = markov.model_from_matrix(np.ones((1, 1)))
    fb = rates.build_feedback_plan(m, 7, 1e-6, 0.06, k_max=10_000)
    assert fb.static and fb.capped and fb.K == 10_000 and fb.source_rate_bps == 0.0


def test_feedback_plan_rate_is_B_over_KT(rng):
    m = markov.model_from_matrix(random_chain(rng, 8, stickiness=100.0))
    fb = rates.build_feedback_plan(m, 3, 1e-6, 0.06)
    assert fb.feedback_rate_bps == pytest.approx(3 / (fb.K * 1e-6))
    assert fb.outage_prob_at_K <= 0.06
    assert set(fb.to_dict()) >= {"B", "T", "delta", "K", "R_s", "R_f", "P_o"}


def test_invalid_arguments():
    m = markov.model_from_matrix(np.array([[0.9, 0.1], [0.1, 0.9]]))
    with pytest.raises(DomainError):
        rates.outage_probability(m, 0)
    with pytest.raises(DomainError):
        rates.max_feedback_interval(m, 1.5)


@settings(max_examples=50, deadline=None)
@given(N=st.integers(2, 8), seed=st.integers(0, 10 ** 6), K=st.integers(1, 200))
def test_outage_is_probability_and_monotone(N, seed, K):
    m = markov.model_from_matrix(random_chain(np.random.default_rng(seed), N, stickiness=10.0))
    a = rates.outage_probability(m, K)
    b = rates.outage_probability(m, K + 1)
    assert 0.0 <= a <= 1.0
    assert b >= a - 1e-12
