"""CSI source bit rate, periodic-feedback outage probability and feedback interval."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .fading import DomainError
from .markov import MarkovChainModel

K_MAX = 10_000_000


@dataclass(frozen=True)
class FeedbackPlan:
    bits_per_report: int
    sample_interval_s: float
    delta: float
    K: int
    source_rate_bps: float
    feedback_rate_bps: float
    outage_prob_at_K: float
    K_lower: float
    K_upper: float
    capped: bool = False
    static: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        return {"B": d["bits_per_report"], "T": d["sample_interval_s"], "delta": d["delta"],
                "K": d["K"], "R_s": d["source_rate_bps"], "R_f": d["feedback_rate_bps"],
                "P_o": d["outage_prob_at_K"], "K_lower": _finite_or_none(d["K_lower"]),
                "K_upper": _finite_or_none(d["K_upper"]), "capped": d["capped"], "static": d["static"]}


def _finite_or_none(x):
    return x if x is not None and math.isfinite(x) else None


def source_rate(model: MarkovChainModel, B: float, T: float) -> float:
    """Average bit rate of a fixed-length state code that reports every state change."""
    p = np.diag(model.transition)
    return float(B / T * np.sum(model.stationary * (1.0 - p)))


def geometric_sum(a: np.ndarray, b: np.ndarray, K: int) -> np.ndarray:
    """``sum_{k=1..K} a^(K-k) b^(k-1)``, i.e. ``(a^K - b^K)/(a - b)`` with its ``a == b`` limit.

    Evaluated as ``hi^(K-1) * -expm1(K*log1p(r)) / (-r)`` with ``r = (lo-hi)/hi``
    so that nearly equal arguments do not cancel.
    """
    a, b = np.broadcast_arrays(np.asarray(a, float), np.asarray(b, float))
    hi = np.maximum(a, b)
    lo = np.minimum(a, b)
    out = np.empty(hi.shape)
    zero = hi == 0.0
    out[zero] = 1.0 if K == 1 else 0.0
    nz = ~zero
    r = (lo[nz] - hi[nz]) / hi[nz]  # in [-1, 0]
    h = hi[nz]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(r == 0.0, float(K),
                         -np.expm1(K * np.log1p(np.maximum(r, -1.0))) / np.where(r == 0.0, 1.0, -r))
    # r == -1 means lo == 0: only the k = 1 term survives
    ratio = np.where(r <= -1.0, 1.0, ratio)
    out[nz] = h ** (K - 1) * ratio
    return out


def outage_probability(model: MarkovChainModel, K: int) -> float:
    """Probability of more than one state transition within ``K`` samples, stationary start."""
    if K < 1:
        raise DomainError("feedback interval K must be >= 1")
    P, pi = model.transition, model.stationary
    d = np.diag(P)
    no_change = np.sum(d ** K * pi)
    # one change: stay at l, jump l -> m, stay at m
    S = geometric_sum(d[:, None], d[None, :], K)  # S[m, l] symmetric in (d_m, d_l)
    off = P * pi[None, :]
    np.fill_diagonal(off, 0.0)
    one_change = np.sum(S * off)
    return float(min(max(1.0 - no_change - one_change, 0.0), 1.0))


def max_feedback_interval(model: MarkovChainModel, delta: float, k_max: int = K_MAX) -> tuple[int, bool]:
    """Largest ``K`` with outage probability ``<= delta``; returns ``(K, capped)``.

    Doubling then bisection; the outage probability is non-decreasing in K
    (a path with two changes in K steps still has them in K+1), and the
    bracket is re-checked at the end with a local linear scan as a guard.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    assert outage_probability(model, 1) <= delta
    lo, hi = 1, 2
    while outage_probability(model, hi) <= delta:
        lo = hi
        if hi >= k_max:
            return k_max, True
        hi = min(2 * hi, k_max)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if outage_probability(model, mid) <= delta:
            lo = mid
        else:
            hi = mid
    K = lo
    if not (outage_probability(model, K) <= delta < outage_probability(model, K + 1)):
        K = 1
        while K < k_max and outage_probability(model, K + 1) <= delta:
            K += 1
    return K, False


def interval_bounds(model: MarkovChainModel, delta: float) -> tuple[float, float]:
    """Analytic bracket ``(K_lower, K_upper)`` on the feedback interval.

    Returns ``nan`` for a bound whose formula is undefined (a diagonal entry of
    0 or 1) and ``inf`` for the upper bound when two diagonal entries coincide.
    """
    if not 0.0 < delta < 1.0:
        raise DomainError("delta must lie in (0, 1)")
    P, pi = model.transition, model.stationary
    d = np.diag(P)
    if np.any(d <= 0.0) or np.any(d >= 1.0):
        return float("nan"), float("nan")
    log_keep = math.log1p(-delta)
    k_lower = log_keep / math.log(d.min())
    diff = np.abs(d[:, None] - d[None, :])
    w = P * pi[None, :]
    mask = ~np.eye(len(d), dtype=bool)
    if np.any(diff[mask] == 0.0):
        return k_lower, float("inf")
    s = np.sum(w[mask] / diff[mask])
    k_upper = (log_keep - math.log1p(s)) / math.log(d.max())
    return k_lower, k_upper


def build_feedback_plan(model: MarkovChainModel, B: int, T: float, delta: float,
                        k_max: int = K_MAX) -> FeedbackPlan:
    rs = source_rate(model, B, T)
    if model.size == 1 or rs == 0.0:
        return FeedbackPlan(B, T, delta, k_max, rs, B / (k_max * T), 0.0,
                            float("nan"), float("nan"), capped=True, static=True)
    K, capped = max_feedback_interval(model, delta, k_max)
    k_lo, k_hi = interval_bounds(model, delta)
    return FeedbackPlan(B, T, delta, K, rs, B / (K * T), outage_probability(model, K),
                        k_lo, k_hi, capped=capped)
