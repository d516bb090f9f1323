"""First-order channel-state Markov chain: fitting, spectral summaries, CSI autocorrelation.

Matrices are column-stochastic: ``P[l, m] = Pr(I_n = l | I_{n-1} = m)``, with
0-based array indices standing for 1-based states.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import reduce
from math import gcd
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.sparse.csgraph import connected_components

from .codebook import Codebook, StateSequence
from .fading import DomainError

DEFAULT_SMOOTHING = 1e-6


class ErgodicityError(DomainError):
    """The chain is not irreducible and aperiodic where that is required."""


@dataclass(frozen=True)
class MarkovChainModel:
    size: int
    stationary: np.ndarray = field(repr=False)
    transition: np.ndarray = field(repr=False)
    sample_count: int
    sqrt_lambda: float
    ergodic: bool
    diagnosis: tuple = ()
    visit_frequency: Optional[np.ndarray] = field(default=None, repr=False)


@dataclass(frozen=True)
class AutocorrReport:
    lags: np.ndarray
    empirical: np.ndarray
    model: np.ndarray
    max_abs_gap_above_half: float


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Stationary vector of an irreducible column-stochastic matrix (GTH elimination).

    Subtraction-free, so it stays accurate for nearly decomposable chains
    where an eigen-solver loses digits.
    """
    A = np.array(P, dtype=float).T  # row-stochastic working copy
    n = A.shape[0]
    for k in range(n - 1, 0, -1):
        s = A[k, :k].sum()
        if s <= 0.0:
            raise ErgodicityError("chain is reducible; stationary vector not unique")
        A[:k, k] /= s
        A[:k, :k] += np.outer(A[:k, k], A[k, :k])
    pi = np.zeros(n)
    pi[0] = 1.0
    for k in range(1, n):
        pi[k] = pi[:k] @ A[:k, k]
    return pi / pi.sum()


def ergodicity_check(P: np.ndarray) -> tuple[bool, tuple]:
    """Irreducibility (single strongly connected class) and aperiodicity of ``P``'s support."""
    P = np.asarray(P)
    n = P.shape[0]
    support = (P.T > 0).astype(int)  # support[m, l]: edge m -> l
    problems = []
    n_comp, _ = connected_components(support, directed=True, connection="strong")
    if n_comp > 1:
        problems.append("not communicating")
        return False, tuple(problems)
    # Period via BFS levels from state 1: gcd of level[u] + 1 - level[v] over edges.
    level = np.full(n, -1)
    level[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for u in frontier:
            for v in np.flatnonzero(support[u]):
                if level[v] < 0:
                    level[v] = level[u] + 1
                    nxt.append(v)
        frontier = nxt
    us, vs = np.nonzero(support)
    period = reduce(gcd, (int(abs(level[u] + 1 - level[v])) for u, v in zip(us, vs)), 0)
    if period != 1:
        problems.append(f"periodic (period {period})")
    return not problems, tuple(problems)


def _sqrt_lambda(P: np.ndarray, pi: np.ndarray) -> float:
    if P.shape[0] == 1:
        return 0.0
    r = np.sqrt(pi)
    A = P * r[None, :] / r[:, None]  # Pi^-1/2 P Pi^1/2
    s = np.linalg.svd(A, compute_uv=False)
    return float(min(max(s[1], 0.0), 1.0))


def model_from_matrix(P: np.ndarray, sample_count: int = 0,
                      visit_frequency: Optional[np.ndarray] = None) -> MarkovChainModel:
    """Wrap an exact column-stochastic matrix as a model (stationary vector and sqrt(lambda) computed)."""
    P = np.array(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise DomainError("transition matrix must be square")
    if np.any(P < 0) or np.any(np.abs(P.sum(axis=0) - 1.0) > 1e-9):
        raise DomainError("transition matrix must be column-stochastic")
    P /= P.sum(axis=0, keepdims=True)
    ergodic, diagnosis = ergodicity_check(P)
    try:
        pi = stationary_distribution(P)
    except ErgodicityError:
        if visit_frequency is None:
            w, v = np.linalg.eig(P)
            k = int(np.argmin(np.abs(w - 1.0)))
            pi = np.abs(v[:, k].real)
        else:
            pi = np.asarray(visit_frequency, dtype=float).copy()
        pi /= pi.sum()
    sl = _sqrt_lambda(P, pi) if ergodic and np.all(pi > 0) else float("nan")
    P.flags.writeable = False
    pi.flags.writeable = False
    return MarkovChainModel(P.shape[0], pi, P, int(sample_count), sl, ergodic, diagnosis, visit_frequency)


def transition_counts(states: np.ndarray, N: int) -> np.ndarray:
    """``C[l, m]`` = number of observed ``m -> l`` steps (states 1-based)."""
    s = np.asarray(states, dtype=np.int64) - 1
    if s.size and (s.min() < 0 or s.max() >= N):
        raise DomainError(f"states outside 1..{N}")
    idx = s[1:] * N + s[:-1]
    return np.bincount(idx, minlength=N * N).reshape(N, N).astype(float)


def fit_markov(seq, N: Optional[int] = None, smoothing: float = DEFAULT_SMOOTHING) -> MarkovChainModel:
    """Maximum-likelihood transition matrix from a state sequence.

    ``smoothing`` is added to every transition count before normalising; pass
    0 to fit the raw counts.  States that never precede another state get a
    self-loop when unsmoothed, which marks the chain non-ergodic.
    """
    states = seq.states if isinstance(seq, StateSequence) else np.asarray(seq)
    if N is None:
        N = seq.codebook_size if isinstance(seq, StateSequence) else int(states.max())
    if states.shape[0] < 2:
        raise DomainError("need at least two states to fit transitions")
    C = transition_counts(states, N) + smoothing
    col = C.sum(axis=0)
    empty = col <= 0
    C[:, empty] = np.eye(N)[:, empty]
    col[empty] = 1.0
    P = C / col
    visits = np.bincount(states - 1, minlength=N) / states.shape[0]
    return model_from_matrix(P, states.shape[0] - 1, visits)


def time_reversal(model: MarkovChainModel) -> np.ndarray:
    pi = model.stationary
    if np.any(pi <= 0):
        raise DomainError("time reversal needs strictly positive stationary mass")
    return pi[:, None] * model.transition.T / pi[None, :]


def second_eigenvalue(model: MarkovChainModel) -> float:
    """``sqrt(lambda)``, lambda being the second-largest eigenvalue of ``P @ P_reversed``."""
    if not model.ergodic:
        raise ErgodicityError("second eigenvalue requested for a non-ergodic chain: "
                              + ", ".join(model.diagnosis))
    if np.any(model.stationary <= 0):
        raise DomainError("stationary vector has zero entries")
    return _sqrt_lambda(model.transition, model.stationary)


def power(model: MarkovChainModel, D: int) -> np.ndarray:
    if D < 0 or int(D) != D:
        raise DomainError("power needs a non-negative integer exponent")
    return np.linalg.matrix_power(model.transition, int(D))


def total_variation_profile(model: MarkovChainModel, max_D: int) -> np.ndarray:
    """``max_m sum_l |[P^D]_{lm} - pi_l|`` for ``D = 0..max_D``."""
    P, pi = model.transition, model.stationary
    X = np.eye(model.size)
    out = np.empty(max_D + 1)
    for d in range(max_D + 1):
        out[d] = np.abs(X - pi[:, None]).sum(axis=0).max()
        X = P @ X
    return out


def model_autocorrelation(model: MarkovChainModel, cb: Codebook, max_lag: int) -> np.ndarray:
    G = cb.gram()
    X = np.diag(model.stationary)
    out = np.empty(max_lag + 1)
    for t in range(max_lag + 1):
        out[t] = np.sum(G * X)
        X = model.transition @ X
    return out


def empirical_csi_autocorrelation(states: np.ndarray, cb: Codebook, max_lag: int) -> np.ndarray:
    s = np.asarray(states, dtype=np.int64) - 1
    if max_lag >= s.shape[0]:
        raise DomainError("lag exceeds sequence length")
    G = cb.gram()
    return np.array([G[s[:s.shape[0] - t], s[t:]].mean() for t in range(max_lag + 1)])


def autocorrelation(seq, cb: Codebook, model: MarkovChainModel, max_lag: int) -> AutocorrReport:
    """Empirical vs chain-predicted ``E|f_n^* f_{n+tau}|^2`` on lags ``0..max_lag``."""
    if max_lag < 0:
        raise DomainError("max_lag must be >= 0")
    states = seq.states if isinstance(seq, StateSequence) else np.asarray(seq)
    emp = empirical_csi_autocorrelation(states, cb, max_lag)
    mod = model_autocorrelation(model, cb, max_lag)
    mask = emp >= 0.5
    gap = float(np.max(np.abs(emp - mod)[mask])) if mask.any() else 0.0
    return AutocorrReport(np.arange(max_lag + 1), emp, mod, gap)


def model_to_dict(model: MarkovChainModel) -> dict:
    return {
        "N": model.size,
        "pi": model.stationary.tolist(),
        "P": model.transition.T.tolist(),  # list of columns
        "sqrt_lambda": model.sqrt_lambda,
        "sample_count": model.sample_count,
    }


def save_model(model: MarkovChainModel, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1))


def load_model(path) -> MarkovChainModel:
    d = json.loads(Path(path).read_text())
    P = np.array(d["P"], dtype=float).T
    if P.shape != (d["N"], d["N"]):
        raise DomainError(f"{path}: P shape does not match N")
    return model_from_matrix(P, d.get("sample_count", 0))
