import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_chain, sample_chain
from csimarkov import codebook as cbk
from csimarkov import markov
from csimarkov.fading import DomainError


def power_iteration_pi(P, iters=20000):
    """Reference stationary vector by plain iteration of a lazy chain."""
    Q = 0.5 * (P + np.eye(P.shape[0]))
    x = np.full(P.shape[0], 1.0 / P.shape[0])
    for _ in range(iters):
        x = Q @ x
    return x / x.sum()


def count_loop(states, N):
    C = np.zeros((N, N))
    for a, b in zip(states[:-1], states[1:]):
        C[b - 1, a - 1] += 1
    return C


def test_stationary_two_state_closed_form():
    # [DERIVED] pi = (b, a) / (a + b) for P = [[1-a, b], [a, 1-b]]
    a, b = 0.1, 0.3
    P = np.array([[1 - a, b], [a, 1 - b]])
    assert np.allclose(markov.stationary_distribution(P), [b / (a + b), a / (a + b)], atol=1e-15)


def test_stationary_against_power_iteration(rng):
    for N in (3, 7, 20):
        P = random_chain(rng, N, sparsity=0.5)
        assert np.allclose(markov.stationary_distribution(P), power_iteration_pi(P), atol=1e-10)


def test_stationary_nearly_decomposable():
    # two sticky blocks joined by 1e-12 leaks; GTH keeps full relative accuracy
    e = 1e-12
    P = np.array([[1 - e, 0.5, 0, 0], [0, 0.5, 0, 0], [e, 0, 0.5, 0], [0, 0, 0.5, 1]])
    P[3, 3] -= 2 * e
    P[0, 3] += 2 * e
    pi = markov.stationary_distribution(P)
    assert np.allclose(P @ pi, pi, rtol=1e-12, atol=0)


def test_fit_counts_and_normalisation(rng):
    P = random_chain(rng, 5)
    x = sample_chain(rng, P, 20000)
    assert np.array_equal(markov.transition_counts(x, 5), count_loop(x, 5))
    m = markov.fit_markov(x, 5, smoothing=0.0)
    C = count_loop(x, 5)
    assert np.allclose(m.transition, C / C.sum(axis=0))
    assert np.allclose(m.transition.sum(axis=0), 1.0)
    assert np.abs(m.transition - P).max() < 0.05


def test_fit_smoothing_makes_unvisited_ergodic():
    x = np.array([1, 2, 1, 2, 1, 2])
    raw = markov.fit_markov(x, 3, smoothing=0.0)
    assert not raw.ergodic
    assert "not communicating" in raw.diagnosis
    assert markov.fit_markov(x, 3).ergodic


def test_periodic_chain_diagnosed():
    P = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], dtype=float)
    ok, diag = markov.ergodicity_check(P)
    assert not ok and diag == ("periodic (period 3)",)
    m = markov.model_from_matrix(P)
    with pytest.raises(markov.ErgodicityError):
        markov.second_eigenvalue(m)


def test_not_stochastic_rejected():
    with pytest.raises(DomainError):
        markov.model_from_matrix(np.array([[0.5, 0.5], [0.4, 0.5]]))


def test_single_state_chain():
    m = markov.model_from_matrix(np.ones((1, 1)))
    assert m.ergodic and m.sqrt_lambda == 0.0 and m.stationary.tolist() == [1.0]


def test_sqrt_lambda_against_eigvals_of_reversibilization(rng):
    # [DERIVED] lambda = second eigenvalue of P @ P_reversed, computed independently
    for N in (2, 4, 9):
        P = random_chain(rng, N)
        m = markov.model_from_matrix(P)
        R = markov.time_reversal(m)
        ev = np.sort(np.linalg.eigvals(P @ R).real)[::-1]
        assert m.sqrt_lambda == pytest.approx(np.sqrt(max(ev[1], 0.0)), abs=1e-10)


def test_reversible_chain_sqrt_lambda_is_second_eigenvalue():
    # [PAPER] for P equal to its reversal, sqrt(lambda) is the second eigenvalue magnitude of P
    P = np.array([[0.9, 0.05, 0.0], [0.1, 0.9, 0.1], [0.0, 0.05, 0.9]])
    m = markov.model_from_matrix(P)
    assert np.allclose(markov.time_reversal(m), P)
    ev = np.sort(np.abs(np.linalg.eigvals(P)))[::-1]
    assert m.sqrt_lambda == pytest.approx(ev[1], abs=1e-12)


def test_model_autocorrelation_against_loop(rng):
    cb = cbk.build_codebook(2, 4, seed=0, iterations=100)
    P = random_chain(rng, 4)
    m = markov.model_from_matrix(P)
    G = np.abs(cb.vectors.conj().T @ cb.vectors) ** 2
    for tau in (0, 1, 5):
        Pt = np.linalg.matrix_power(P, tau)
        ref = sum(m.stationary[a] * Pt[b, a] * G[a, b] for a in range(4) for b in range(4))
        assert markov.model_autocorrelation(m, cb, 5)[tau] == pytest.approx(ref, abs=1e-14)


def test_autocorrelation_report_on_chain_samples(rng):
    cb = cbk.build_codebook(2, 4, seed=0, iterations=100)
    P = random_chain(rng, 4, stickiness=5.0)
    x = sample_chain(rng, P, 100_000)
    rep = markov.autocorrelation(x, cb, markov.fit_markov(x, 4), 20)
    assert rep.empirical[0] == pytest.approx(1.0)
    assert rep.max_abs_gap_above_half < 0.02


def test_total_variation_profile(rng):
    P = random_chain(rng, 5)
    m = markov.model_from_matrix(P)
    tv = markov.total_variation_profile(m, 30)
    assert tv[0] == pytest.approx((2 * (1 - m.stationary)).max())
    assert tv[-1] < tv[0]


def test_save_load_roundtrip(tmp_path, rng):
    m = markov.model_from_matrix(random_chain(rng, 6), sample_count=77)
    markov.save_model(m, tmp_path / "m.json")
    back = markov.load_model(tmp_path / "m.json")
    assert np.array_equal(back.transition, m.transition)
    assert back.sample_count == 77


@settings(max_examples=60, deadline=None)
@given(N=st.integers(2, 12), seed=st.integers(0, 10 ** 6), sparsity=st.floats(0, 0.8))
def test_stationary_is_fixed_point(N, seed, sparsity):
    P = random_chain(np.random.default_rng(seed), N, sparsity)
    m = markov.model_from_matrix(P)
    assert m.ergodic
    assert np.all(m.stationary > 0)
    assert np.allclose(P @ m.stationary, m.stationary, atol=1e-13)
    assert 0.0 <= m.sqrt_lambda <= 1.0


@settings(max_examples=60, deadline=None)
@given(N=st.integers(2, 10), seed=st.integers(0, 10 ** 6))
def test_time_reversal_is_stochastic_and_shares_pi(N, seed):
    m = markov.model_from_matrix(random_chain(np.random.default_rng(seed), N))
    R = markov.time_reversal(m)
    assert np.allclose(R.sum(axis=0), 1.0)
    assert np.allclose(R @ m.stationary, m.stationary)
