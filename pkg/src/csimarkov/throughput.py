"""Ergodic throughput under delayed quantized feedback, gain bounds and capacity metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .codebook import Codebook, codeword_gains
from .fading import ChannelTrace, DomainError
from .markov import MarkovChainModel

MIN_VISITS = 100


class StarvedCellsError(DomainError):
    def __init__(self, starved):
        self.starved = list(starved)
        super().__init__(f"Voronoi cells visited fewer than the required number of times: states {self.starved}")


def batch_means_stderr(x: np.ndarray, n_batches: int = 64) -> float:
    """Standard error of the mean of a correlated series via non-overlapping batch means."""
    x = np.asarray(x, dtype=float)
    n_batches = min(n_batches, x.size // 2)
    if n_batches < 2:
        return float("nan")
    size = x.size // n_batches
    means = x[:size * n_batches].reshape(n_batches, size).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(n_batches))


@dataclass(frozen=True)
class RlmTable:
    """Conditional throughput table.

    ``values[l, m]`` is the mean of ``log2(1 + snr*||H v_m||^2)`` over samples
    quantized to state ``l+1``.  ``mc_std_err`` is the batch-means standard
    error of the matched-codeword throughput series (the zero-delay rate);
    ``cell_std_err`` holds naive per-cell errors.
    """

    size: int
    values: np.ndarray = field(repr=False)
    per_codeword_unconditional: np.ndarray = field(repr=False)
    snr: float
    mc_samples: int
    mc_std_err: float
    cell_std_err: np.ndarray = field(repr=False, default=None)
    visits: np.ndarray = field(repr=False, default=None)


@dataclass
class TraceAnalysis:
    """Everything a single pass over a (possibly streamed) trace produces."""

    states: np.ndarray
    rlm: RlmTable
    c_ideal: float
    c_ideal_std_err: float
    simulated: dict  # D -> (mean, std_err)


class TraceAnalyzer:
    """Single-pass accumulator over trace chunks.

    Feed consecutive chunks with :meth:`update`; collects the state sequence,
    conditional throughput sums, the ideal (dominant singular vector)
    throughput and direct Monte-Carlo throughput for the requested delays.
    """

    def __init__(self, cb: Codebook, snr: float, delays: Sequence[int] = (), ideal: bool = True):
        self.cb = cb
        self.snr = float(snr)
        self.delays = [int(d) for d in delays]
        if any(d < 0 for d in self.delays):
            raise DomainError("delays must be >= 0")
        self.ideal = ideal
        N = cb.size
        self._sum = np.zeros((N, N))
        self._sumsq = np.zeros((N, N))
        self._uncond = np.zeros(N)
        self._visits = np.zeros(N, dtype=np.int64)
        self._states = []
        self._matched = []
        self._ideal = []
        self._sim = {d: [] for d in self.delays}
        self._n = 0

    def update(self, H: np.ndarray) -> np.ndarray:
        gains = codeword_gains(H, self.cb)
        idx = np.argmax(gains, axis=1)
        rate = np.log2(1.0 + self.snr * gains)
        n0 = self._n
        self._n += len(idx)
        self._states.append(idx)
        self._uncond += rate.sum(axis=0)
        order = np.argsort(idx, kind="stable")
        s_sorted = idx[order]
        starts = np.flatnonzero(np.r_[True, s_sorted[1:] != s_sorted[:-1]])
        cells = s_sorted[starts]
        r_sorted = rate[order]
        self._sum[cells] += np.add.reduceat(r_sorted, starts, axis=0)
        self._sumsq[cells] += np.add.reduceat(r_sorted ** 2, starts, axis=0)
        self._visits[cells] += np.diff(np.r_[starts, len(idx)])
        self._matched.append(rate[np.arange(len(idx)), idx])
        if self.ideal:
            lam = np.linalg.eigvalsh(np.swapaxes(H.conj(), -1, -2) @ H)[:, -1]
            self._ideal.append(np.log2(1.0 + self.snr * lam))
        if self.delays:
            all_states = np.concatenate(self._states) if len(self._states) > 1 else idx
            self._states = [all_states]
            n = np.arange(n0, self._n)
            for d in self.delays:
                ok = n >= d
                past = all_states[n[ok] - d]
                self._sim[d].append(rate[np.flatnonzero(ok), past])
        return idx + 1

    def result(self, min_visits: int = MIN_VISITS) -> TraceAnalysis:
        if self._n == 0:
            raise DomainError("no samples analysed")
        starved = np.flatnonzero(self._visits < min_visits) + 1
        if starved.size:
            raise StarvedCellsError(starved.tolist())
        v = self._visits[:, None].astype(float)
        mean = self._sum / v
        var = np.maximum(self._sumsq / v - mean ** 2, 0.0)
        cell_se = np.sqrt(var / np.maximum(v - 1, 1))
        matched = np.concatenate(self._matched)
        rlm = RlmTable(self.cb.size, mean, self._uncond / self._n, self.snr, self._n,
                       batch_means_stderr(matched), cell_se, self._visits.copy())
        if self.ideal:
            ideal = np.concatenate(self._ideal)
            c_ideal, c_se = float(ideal.mean()), batch_means_stderr(ideal)
        else:
            c_ideal, c_se = float("nan"), float("nan")
        sim = {}
        for d, parts in self._sim.items():
            x = np.concatenate(parts) if parts else np.empty(0)
            sim[d] = (float(x.mean()) if x.size else float("nan"), batch_means_stderr(x))
        states = np.concatenate(self._states) + 1 if self._states else np.empty(0, np.int64)
        return TraceAnalysis(states.astype(np.int64), rlm, c_ideal, c_se, sim)


def _chunks_of(trace_or_chunks) -> Iterable[np.ndarray]:
    if isinstance(trace_or_chunks, ChannelTrace):
        s = trace_or_chunks.samples
        return (s[i:i + 65536] for i in range(0, len(s), 65536))
    return (c for _, c in trace_or_chunks)


def analyze(trace_or_chunks, cb: Codebook, snr: float, delays: Sequence[int] = (),
            ideal: bool = True, min_visits: int = MIN_VISITS) -> TraceAnalysis:
    acc = TraceAnalyzer(cb, snr, delays, ideal)
    for H in _chunks_of(trace_or_chunks):
        acc.update(H)
    return acc.result(min_visits)


def estimate_rlm(trace_or_chunks, cb: Codebook, snr: float, min_visits: int = MIN_VISITS) -> RlmTable:
    """Monte-Carlo conditional throughput table; raises if any cell is starved."""
    return analyze(trace_or_chunks, cb, snr, ideal=False, min_visits=min_visits).rlm


def simulate_throughput(trace: ChannelTrace, cb: Codebook, snr: float, D: int) -> tuple[float, float]:
    """Direct estimate of ``E log2(1 + snr*||H_n v_{I_{n-D}}||^2)`` with a batch-means error."""
    if D < 0:
        raise DomainError("delay must be >= 0")
    if len(trace) <= D:
        raise DomainError(f"trace of length {len(trace)} too short for delay {D}")
    return analyze(trace, cb, snr, delays=[D], ideal=False, min_visits=0).simulated[D]


def _check(model: MarkovChainModel, rlm: RlmTable) -> None:
    if model.size != rlm.size:
        raise DomainError(f"chain has {model.size} states, throughput table {rlm.size}")


def ergodic_throughput(model: MarkovChainModel, rlm: RlmTable, D: int) -> float:
    """Chain-weighted throughput ``sum R_lm [P^D]_lm pi_m`` for a fixed delay."""
    _check(model, rlm)
    if D < 0:
        raise DomainError("delay must be >= 0")
    PD = np.linalg.matrix_power(model.transition, int(D))
    return float(np.sum(rlm.values * PD * model.stationary[None, :]))


def throughput_curve(model: MarkovChainModel, rlm: RlmTable, max_D: int) -> np.ndarray:
    """``R(D)`` for ``D = 0..max_D`` by repeated multiplication."""
    _check(model, rlm)
    X = np.diag(model.stationary)
    out = np.empty(max_D + 1)
    for d in range(max_D + 1):
        out[d] = np.sum(rlm.values * X)
        X = model.transition @ X
    return out


def infinite_delay_throughput(model: MarkovChainModel, rlm: RlmTable) -> float:
    pi = model.stationary
    return float(pi @ rlm.values @ pi)


def gain_constant(model: MarkovChainModel, rlm: RlmTable) -> float:
    """``alpha = sum_m sqrt(pi_m) max_l R_lm``."""
    return float(np.sum(np.sqrt(model.stationary) * rlm.values.max(axis=0)))


def q_interval(sqrt_lambda: float, K: int) -> float:
    """Protocol factor ``(1 - s^K) / (K (1 - s))`` with its ``s -> 1`` limit."""
    if K < 1:
        raise DomainError("K must be >= 1")
    s = float(sqrt_lambda)
    if s >= 1.0:
        return 1.0
    if s <= 0.0:
        return 1.0 / K
    return float(-math.expm1(K * math.log(s)) / (K * (1.0 - s)))


def gain_approximation(sqrt_lambda: float, K: int, D: int) -> float:
    """Normalised feedback gain approximation ``s^D * q_K``."""
    return float(sqrt_lambda) ** D * q_interval(sqrt_lambda, K)


@dataclass
class ThroughputReport:
    snr: float
    D: np.ndarray
    R_of_D: np.ndarray
    R0: float
    R_inf: float
    delta_R: np.ndarray
    alpha: float
    sqrt_lambda: float
    bound: np.ndarray
    C_ideal: float = float("nan")
    quantization_loss: float = float("nan")
    max_gain: float = float("nan")
    capacity_loss: Optional[np.ndarray] = None
    R_tilde: dict = field(default_factory=dict)
    delta_R_bar_approx: dict = field(default_factory=dict)
    mc_std_err: float = float("nan")

    def to_dict(self) -> dict:
        return {
            "snr_db": 10 * math.log10(self.snr) if self.snr > 0 else None,
            "D": [int(d) for d in self.D],
            "R": self.R_of_D.tolist(),
            "delta_R": self.delta_R.tolist(),
            "bound": self.bound.tolist(),
            "R0": self.R0,
            "R_inf": self.R_inf,
            "C_ideal": None if math.isnan(self.C_ideal) else self.C_ideal,
            "quantization_loss": None if math.isnan(self.quantization_loss) else self.quantization_loss,
            "max_gain": None if math.isnan(self.max_gain) else self.max_gain,
            "alpha": self.alpha,
            "sqrt_lambda": self.sqrt_lambda,
            "mc_std_err": self.mc_std_err,
            "R_tilde": [{"K": k, "D": d, "value": v} for (k, d), v in sorted(self.R_tilde.items())],
            "delta_R_bar_approx": [{"K": k, "D": d, "value": v}
                                   for (k, d), v in sorted(self.delta_R_bar_approx.items())],
        }

    def csv_rows(self) -> list[list]:
        rows = [["D", "R", "delta_R", "bound"]]
        for d, r, g, b in zip(self.D, self.R_of_D, self.delta_R, self.bound):
            rows.append([int(d), r, g, b])
        return rows


def gain_and_bound(model: MarkovChainModel, rlm: RlmTable, D_list: Sequence[int]) -> ThroughputReport:
    """Feedback throughput gain ``R(D) - R(inf)`` and its ``alpha * sqrt(lambda)^D`` ceiling."""
    _check(model, rlm)
    D = np.asarray(sorted(set(int(d) for d in D_list)), dtype=int)
    if D.size and D[0] < 0:
        raise DomainError("delays must be >= 0")
    curve = throughput_curve(model, rlm, int(D.max()) if D.size else 0)
    pi = model.stationary
    R_inf = infinite_delay_throughput(model, rlm)
    # gain evaluated from the centred form to avoid subtracting two large rates
    X = np.diag(pi)
    gains = {}
    for d in range(int(D.max()) + 1 if D.size else 0):
        if d in set(D.tolist()):
            gains[d] = float(np.sum(rlm.values * (X - np.outer(pi, pi))))
        X = model.transition @ X
    s = model.sqrt_lambda
    alpha = gain_constant(model, rlm)
    return ThroughputReport(
        snr=rlm.snr, D=D, R_of_D=curve[D], R0=float(curve[0]), R_inf=R_inf,
        delta_R=np.array([gains[int(d)] for d in D]), alpha=alpha, sqrt_lambda=s,
        bound=alpha * s ** D.astype(float), mc_std_err=rlm.mc_std_err)


@dataclass(frozen=True)
class ProtocolThroughput:
    K: int
    D: int
    R_tilde: float
    delta_R_tilde: float
    delta_R_bar: float
    delta_R_bar_approx: float
    bound: float


def protocol_throughput(model: MarkovChainModel, rlm: RlmTable, K: int, D: int) -> ProtocolThroughput:
    """Throughput with fixed delay ``D`` plus the cyclic ``0..K-1`` protocol delay."""
    if K < 1 or D < 0:
        raise DomainError("need K >= 1 and D >= 0")
    curve = throughput_curve(model, rlm, D + K - 1)
    R_inf = infinite_delay_throughput(model, rlm)
    r_tilde = float(np.mean(curve[D:D + K]))
    g0 = float(curve[0] - R_inf)
    s = model.sqrt_lambda
    approx = gain_approximation(s, K, D)
    bound = gain_constant(model, rlm) * s ** D * q_interval(s, K)
    return ProtocolThroughput(K, D, r_tilde, r_tilde - R_inf,
                              (r_tilde - R_inf) / g0 if g0 > 0 else float("nan"), approx, bound)


def capacity_metrics(c_ideal: float, model: MarkovChainModel, rlm: RlmTable,
                     D_list: Sequence[int] = (0,)) -> dict:
    """Quantization loss, delay-plus-quantization loss and maximum gain relative to ``C_ideal``."""
    R_inf = infinite_delay_throughput(model, rlm)
    curve = throughput_curve(model, rlm, max(D_list) if D_list else 0)
    return {
        "C_ideal": c_ideal,
        "quantization_loss": c_ideal - float(curve[0]),
        "max_gain": c_ideal - R_inf,
        "capacity_loss": {int(d): c_ideal - float(curve[d]) for d in D_list},
        "delta_R": {int(d): float(curve[d]) - R_inf for d in D_list},
    }


def ideal_capacity(trace: ChannelTrace, snr: float) -> tuple[float, float]:
    """``E log2(1 + snr * sigma_max(H)^2)`` with a batch-means error."""
    H = trace.samples
    lam = np.concatenate([np.linalg.eigvalsh(np.swapaxes(h.conj(), -1, -2) @ h)[:, -1]
                          for h in (H[i:i + 65536] for i in range(0, len(H), 65536))])
    x = np.log2(1.0 + snr * lam)
    return float(x.mean()), batch_means_stderr(x)
