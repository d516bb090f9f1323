"""End-to-end link design: from a system description to feedback rate, delay budget and compression.

One subchannel is simulated and the results are scaled by the number of
subchannels, which are treated as statistically identical.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import codebook as cbk
from . import compression as cmp
from . import fading, markov, rates
from . import throughput as tput
from .fading import DomainError

SCHEMA_VERSION = "1.0"

_TRACE_TAG, _CODEBOOK_TAG, _CODEC_TAG = 1, 2, 3


def subseed(master: int, tag: int) -> int:
    """Independent 63-bit seed for one pipeline stage."""
    ss = np.random.SeedSequence(int(master), spawn_key=(int(tag),))
    return int(ss.generate_state(1, np.uint64)[0] >> np.uint64(1))


@dataclass(frozen=True)
class DesignSpec:
    bandwidth_hz: float = 10e6
    num_subchannels: int = 8
    subchannel_symbol_rate_hz: float = 1e6
    carrier_hz: float = 2.5e9
    max_speed_mps: float = 12.5
    n_tx: int = 4
    n_rx: int = 4
    codebook_size: int = 128
    outage_delta: float = 0.06
    gain_targets: tuple = (0.5, 0.6, 0.7)
    snr_db: float = 10.0
    epsilon: float = 0.1
    block_w: int = 1
    seed: int = 0
    samples: int = 5_000_000
    codebook_iterations: int = 20_000
    n_sinusoids: int = fading.DEFAULT_SINUSOIDS
    smoothing: float = markov.DEFAULT_SMOOTHING
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "gain_targets", tuple(float(g) for g in self.gain_targets))
        for name in ("bandwidth_hz", "num_subchannels", "subchannel_symbol_rate_hz", "carrier_hz",
                     "max_speed_mps", "n_tx", "n_rx", "codebook_size", "samples", "block_w",
                     "n_sinusoids", "workers"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise DomainError(f"{name} must be positive, got {v!r}")
        if not 0.0 < self.outage_delta < 1.0:
            raise DomainError("outage_delta must lie in (0, 1)")
        if not 0.0 < self.epsilon < 1.0:
            raise DomainError("epsilon must lie in (0, 1)")
        if not self.gain_targets or any(not 0.0 < g <= 1.0 for g in self.gain_targets):
            raise DomainError("gain_targets must be a non-empty subset of (0, 1]")
        if self.seed < 0 or self.codebook_iterations < 0 or self.smoothing < 0:
            raise DomainError("seed, codebook_iterations and smoothing must be >= 0")
        if self.num_subchannels * self.subchannel_symbol_rate_hz > self.bandwidth_hz * (1 + 1e-12):
            raise DomainError("subchannels do not fit in the bandwidth")
        cbk._bits_for(int(self.codebook_size))

    @property
    def sample_interval_s(self) -> float:
        return 1.0 / self.subchannel_symbol_rate_hz

    @property
    def snr(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)

    @property
    def bits(self) -> int:
        return int(self.codebook_size).bit_length() - 1

    def doppler(self) -> fading.DopplerSpec:
        return fading.make_doppler_spec(self.carrier_hz, self.max_speed_mps, self.sample_interval_s)

    def to_dict(self, include_runtime: bool = False) -> dict:
        d = dataclasses.asdict(self)
        d["gain_targets"] = list(self.gain_targets)
        if not include_runtime:
            d.pop("workers")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "DesignSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise DomainError(f"unknown design keys: {', '.join(unknown)}")
        return cls(**d)

    def cache_key(self) -> str:
        """Hash of every setting that affects the trace, codebook or per-cell statistics."""
        keys = ("carrier_hz", "max_speed_mps", "subchannel_symbol_rate_hz", "n_tx", "n_rx",
                "codebook_size", "snr_db", "seed", "samples", "codebook_iterations", "n_sinusoids")
        blob = json.dumps({k: getattr(self, k) for k in keys}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class TargetPlan:
    target: float
    D_max: Optional[int]
    D_max_seconds: Optional[float]
    unbounded: bool
    K_max_for_target: int
    gain_bpshz: float
    per_subchannel_mbps: float
    total_mbps: float
    compressed_gain_bpshz: float
    compressed_total_mbps: float


@dataclass
class PlanReport:
    design: DesignSpec
    doppler_hz: float
    normalized_doppler: float
    feedback: rates.FeedbackPlan
    sqrt_lambda: float
    ergodic: bool
    quasi_static: bool
    codebook_min_distance: float
    throughput: Optional[dict]
    targets: list
    compression: dict
    figures: dict = field(default_factory=dict)

    @property
    def R_s(self) -> float:
        return self.feedback.source_rate_bps

    @property
    def R_f(self) -> float:
        return self.feedback.feedback_rate_bps

    @property
    def K(self) -> int:
        return self.feedback.K

    @property
    def KT_seconds(self) -> float:
        return self.feedback.K * self.feedback.sample_interval_s

    def to_dict(self) -> dict:
        n_sub = self.design.num_subchannels
        fb = self.feedback
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "plan",
            "design": self.design.to_dict(),
            "doppler_hz": self.doppler_hz,
            "normalized_doppler": self.normalized_doppler,
            "sample_interval_s": fb.sample_interval_s,
            "B": fb.bits_per_report,
            "R_s_bps": fb.source_rate_bps,
            "R_s_kbps": fb.source_rate_bps / 1e3,
            "R_f_bps": fb.feedback_rate_bps,
            "R_f_kbps": fb.feedback_rate_bps / 1e3,
            "R_f_over_R_s": fb.feedback_rate_bps / fb.source_rate_bps if fb.source_rate_bps > 0 else None,
            "sum_feedback_rate_kbps": n_sub * fb.feedback_rate_bps / 1e3,
            "K": fb.K,
            "KT_ms": self.KT_seconds * 1e3,
            "outage_prob_at_K": fb.outage_prob_at_K,
            "K_lower": rates._finite_or_none(fb.K_lower),
            "K_upper": rates._finite_or_none(fb.K_upper),
            "K_capped": fb.capped,
            "sqrt_lambda": self.sqrt_lambda,
            "ergodic": self.ergodic,
            "quasi_static": self.quasi_static,
            "codebook_min_chordal_distance": self.codebook_min_distance,
            "throughput": self.throughput,
            "targets": [_target_dict(t) for t in self.targets],
            "compression": self.compression,
            "figures": self.figures,
        }

    def csv_rows(self) -> list[list]:
        rows = [["target", "D_max_samples", "D_max_ms", "gain_bpshz", "per_subchannel_mbps",
                 "total_mbps", "compressed_gain_bpshz", "compressed_total_mbps"]]
        for t in self.targets:
            rows.append([t.target, t.D_max, None if t.D_max_seconds is None else t.D_max_seconds * 1e3,
                         t.gain_bpshz, t.per_subchannel_mbps, t.total_mbps,
                         t.compressed_gain_bpshz, t.compressed_total_mbps])
        return rows


def _target_dict(t: TargetPlan) -> dict:
    d = dataclasses.asdict(t)
    d["D_max_ms"] = None if t.D_max_seconds is None else t.D_max_seconds * 1e3
    return d


def invert_gain_approx(sqrt_lambda: float, K: int, target: float) -> tuple[Optional[int], bool]:
    """Largest fixed delay keeping ``s^D q_K >= target``; returns ``(D_max, unbounded)``.

    ``D_max`` is 0 when ``q_K`` alone already falls short of the target.  For
    ``s >= 1`` the gain never decays and ``(None, True)`` is returned.
    """
    if not 0.0 < target <= 1.0:
        raise DomainError("target must lie in (0, 1]")
    if K < 1:
        raise DomainError("K must be >= 1")
    s = float(sqrt_lambda)
    if s >= 1.0:
        return None, True
    if s <= 0.0:
        return 0, False
    q = tput.q_interval(s, K)
    if q < target:
        return 0, False
    return int(math.floor((math.log(target) - math.log(q)) / math.log(s))), False


def max_interval_for_target(sqrt_lambda: float, target: float, k_cap: int = rates.K_MAX) -> int:
    """Largest ``K`` whose protocol factor ``q_K`` alone still reaches ``target``."""
    s = float(sqrt_lambda)
    if s >= 1.0:
        return k_cap
    lo, hi = 1, 2
    while hi < k_cap and tput.q_interval(s, hi) >= target:
        lo, hi = hi, min(2 * hi, k_cap)
    if tput.q_interval(s, hi) >= target:
        return hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tput.q_interval(s, mid) >= target:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------- pipeline stages

def design_codebook(spec: DesignSpec) -> cbk.Codebook:
    return cbk.build_codebook(spec.n_tx, spec.codebook_size, seed=subseed(spec.seed, _CODEBOOK_TAG),
                              iterations=spec.codebook_iterations)


def design_chunks(spec: DesignSpec):
    return fading.iter_trace_chunks(spec.doppler(), spec.n_rx, spec.n_tx, spec.samples,
                                    seed=subseed(spec.seed, _TRACE_TAG), n_sinusoids=spec.n_sinusoids,
                                    workers=spec.workers)


def design_trace(spec: DesignSpec) -> fading.ChannelTrace:
    return fading.generate_trace(spec.doppler(), spec.n_rx, spec.n_tx, spec.samples,
                                 seed=subseed(spec.seed, _TRACE_TAG), n_sinusoids=spec.n_sinusoids,
                                 workers=spec.workers)


def _save_analysis(path: Path, an: tput.TraceAnalysis) -> None:
    r = an.rlm
    np.savez(path, values=r.values, uncond=r.per_codeword_unconditional, visits=r.visits,
             cell_se=r.cell_std_err, scalars=np.array([r.snr, r.mc_samples, r.mc_std_err,
                                                       an.c_ideal, an.c_ideal_std_err]))


def _load_analysis(path: Path, states: np.ndarray) -> tput.TraceAnalysis:
    with np.load(path) as z:
        snr, n, se, c, cse = z["scalars"].tolist()
        rlm = tput.RlmTable(z["values"].shape[0], z["values"], z["uncond"], snr, int(n), se,
                            z["cell_se"], z["visits"])
    return tput.TraceAnalysis(states, rlm, c, cse, {})


def analyze_design(spec: DesignSpec, cb: cbk.Codebook, out_dir: Optional[Path] = None,
                   reuse: bool = True) -> tput.TraceAnalysis:
    """Stream the design trace once; cached in ``out_dir`` under the spec's cache key."""
    if out_dir is not None:
        out_dir = Path(out_dir)
        manifest = out_dir / "manifest.json"
        if reuse and manifest.exists():
            try:
                key = json.loads(manifest.read_text()).get("cache_key")
            except json.JSONDecodeError:
                key = None
            if key == spec.cache_key() and (out_dir / "states.npy").exists():
                states = np.load(out_dir / "states.npy").astype(np.int64)
                return _load_analysis(out_dir / "analysis.npz", states)
    acc = tput.TraceAnalyzer(cb, spec.snr, ideal=True)
    for _, H in design_chunks(spec):
        acc.update(H)
    with np.errstate(invalid="ignore", divide="ignore"):
        an = acc.result(min_visits=0)
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        dtype = np.int16 if spec.codebook_size < 2 ** 15 else np.int32
        np.save(out_dir / "states.npy", an.states.astype(dtype))
        _save_analysis(out_dir / "analysis.npz", an)
        cbk.save_codebook(cb, out_dir / "codebook.txt")
        (out_dir / "manifest.json").write_text(json.dumps({"cache_key": spec.cache_key()}) + "\n")
    return an


def plan(spec: DesignSpec, out_dir=None, reuse: bool = True, min_visits: int = tput.MIN_VISITS,
         fig6_delays: Sequence[int] = (0, 100, 200, 400, 800, 1600)) -> PlanReport:
    """Run the full design pipeline for one subchannel and scale to the band.

    Raises
    ------
    StarvedCellsError
        Some codeword was selected fewer than ``min_visits`` times and the
        channel is not quasi-static; lengthen the trace.
    ErgodicityError
        The fitted chain is not irreducible and aperiodic (possible only with
        ``smoothing=0``).
    """
    dop = spec.doppler()
    T = spec.sample_interval_s
    out = Path(out_dir) if out_dir is not None else None
    cb = None
    if out is not None and reuse and (out / "codebook.txt").exists() and (out / "manifest.json").exists():
        try:
            if json.loads((out / "manifest.json").read_text()).get("cache_key") == spec.cache_key():
                cb = cbk.load_codebook(out / "codebook.txt")
        except (json.JSONDecodeError, DomainError):
            cb = None
    if cb is None:
        cb = design_codebook(spec)
    an = analyze_design(spec, cb, out, reuse)
    model = markov.fit_markov(an.states, spec.codebook_size, smoothing=spec.smoothing)
    if not model.ergodic:
        raise markov.ErgodicityError("fitted chain is not ergodic: " + ", ".join(model.diagnosis)
                                     + "; use a positive smoothing or a longer trace")
    fb = rates.build_feedback_plan(model, spec.bits, T, spec.outage_delta)
    visited = int(np.count_nonzero(an.rlm.visits))
    quasi_static = fb.static or fb.capped or visited <= 1
    n_sub = spec.num_subchannels
    sym = spec.subchannel_symbol_rate_hz
    s = model.sqrt_lambda

    throughput = None
    targets = []
    figures = {}
    if quasi_static:
        for g in spec.gain_targets:
            targets.append(TargetPlan(g, None, None, True, fb.K, float("nan"), float("nan"), float("nan"),
                                      float("nan"), float("nan")))
    else:
        starved = np.flatnonzero(an.rlm.visits < min_visits) + 1
        if starved.size:
            raise tput.StarvedCellsError(starved.tolist())
        rep = tput.gain_and_bound(model, an.rlm, [0])
        dR0 = float(rep.delta_R[0])
        throughput = {
            "snr_db": spec.snr_db,
            "R0": rep.R0,
            "R_inf": rep.R_inf,
            "delta_R0": dR0,
            "C_ideal": an.c_ideal,
            "C_ideal_std_err": an.c_ideal_std_err,
            "quantization_loss": an.c_ideal - rep.R0,
            "max_gain": an.c_ideal - rep.R_inf,
            "alpha": rep.alpha,
            "mc_std_err": an.rlm.mc_std_err,
        }
        for g in spec.gain_targets:
            D, unb = invert_gain_approx(s, fb.K, g)
            gain = g * dR0
            cgain = cmp.compressed_throughput_gain(gain, spec.epsilon, spec.block_w)
            targets.append(TargetPlan(
                g, D, None if D is None else D * T, unb, max_interval_for_target(s, g),
                gain, gain * sym / 1e6, n_sub * gain * sym / 1e6, cgain, n_sub * cgain * sym / 1e6))
        Ks = sorted({1, fb.K})
        figures["fig6"] = _fig6_rows(model, an.rlm, [(dop.normalized_doppler, k) for k in Ks],
                                     list(fig6_delays))
    scheme = cmp.build_scheme(model, fb.K, spec.epsilon, spec.block_w, spec.bits, T)
    r_hat = scheme.avg_feedback_rate_bps
    compression = {
        "epsilon": spec.epsilon,
        "W": spec.block_w,
        "B_tilde": scheme.compressed_bits,
        "enabled": scheme.enabled,
        "ratio": scheme.ratio,
        "R_hat_f_bps": r_hat,
        "R_hat_f_kbps": r_hat / 1e3,
        "sum_rate_kbps": n_sub * r_hat / 1e3,
        "gain_factor": cmp.compressed_throughput_gain(1.0, spec.epsilon, spec.block_w),
        "max_neighborhood": max(len(n) for n in scheme.neighborhoods),
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        markov.save_model(model, out / "model.json")
        cmp.save_scheme(scheme, out / "scheme.json")
        (out / "feedback.json").write_text(dump_json({"schema_version": SCHEMA_VERSION, **fb.to_dict()}))
    return PlanReport(spec, dop.doppler_hz, dop.normalized_doppler, fb, s, model.ergodic, quasi_static,
                      cb.min_chordal_distance, throughput, targets, compression, figures)


def dump_json(obj) -> str:
    """Canonical JSON text (sorted keys, NaN mapped to null) so reruns compare byte for byte."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


# ---------------------------------------------------------------- figure datasets

@dataclass(frozen=True)
class FigureSpec:
    n_tx: int = 4
    n_rx: int = 4
    snr_db: float = 10.0
    seed: int = 0
    samples: int = 1_000_000
    codebook_iterations: int = 5_000
    n_sinusoids: int = fading.DEFAULT_SINUSOIDS
    workers: int = 1
    fig2_fdt: float = 1e-2
    fig2_size: int = 64
    fig2_max_lag: int = 60
    fig3_fdt: tuple = (1e-5, 3e-5, 1e-4, 3e-4, 1e-3, 3e-3, 1e-2)
    fig3_sizes: tuple = (64, 128, 256)
    fig4_fdt: tuple = (1e-4, 2e-4, 3e-4, 1e-3)
    fig4_size: int = 128
    fig4_ratios: tuple = (1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0, 6.0)
    fig5_fdt: float = 1e-3
    fig5_size: int = 128
    fig5_delays: tuple = (0, 25, 50, 100, 200, 400, 800)
    fig6_fdt: tuple = (1e-4, 1e-3)
    fig6_size: int = 128
    fig6_K: tuple = (1, 100, 300)
    fig6_delays: tuple = (0, 100, 200, 400, 800, 1600)
    fig7_fdt: tuple = (1e-4, 3e-4, 1e-3)
    fig7_sizes: tuple = (64, 128, 256)
    fig7_ratios: tuple = (3.0, 5.0)
    fig7_epsilon: float = 0.1

    @classmethod
    def from_dict(cls, d: dict) -> "FigureSpec":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise DomainError(f"unknown figure keys: {', '.join(unknown)}")
        d = {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
        return cls(**d)

    @property
    def snr(self) -> float:
        return 10.0 ** (self.snr_db / 10.0)


class _PointCache:
    """Quantized state sequences (and optionally analyses) per ``(fDT, N)`` grid point."""

    def __init__(self, fs: FigureSpec):
        self.fs = fs
        self._codebooks = {}
        self._states = {}
        self._analyses = {}

    def codebook(self, N: int) -> cbk.Codebook:
        if N not in self._codebooks:
            self._codebooks[N] = cbk.build_codebook(self.fs.n_tx, N, seed=subseed(self.fs.seed, _CODEBOOK_TAG),
                                                    iterations=self.fs.codebook_iterations)
        return self._codebooks[N]

    def _chunks(self, fdt: float):
        fs = self.fs
        return fading.iter_trace_chunks(fading.DopplerSpec.from_normalized(fdt), fs.n_rx, fs.n_tx, fs.samples,
                                        seed=subseed(fs.seed, _TRACE_TAG), n_sinusoids=fs.n_sinusoids,
                                        workers=fs.workers)

    def states(self, fdt: float, sizes: Sequence[int]) -> dict:
        need = [N for N in sizes if (fdt, N) not in self._states]
        if need:
            cbs = {N: self.codebook(N) for N in need}
            parts = {N: [] for N in need}
            for _, H in self._chunks(fdt):
                for N in need:
                    parts[N].append(cbk.quantize_many(H, cbs[N]))
            for N in need:
                self._states[(fdt, N)] = np.concatenate(parts[N]).astype(np.int64)
        return {N: self._states[(fdt, N)] for N in sizes}

    def analysis(self, fdt: float, N: int) -> tput.TraceAnalysis:
        if (fdt, N) not in self._analyses:
            an = tput.analyze(self._chunks(fdt), self.codebook(N), self.fs.snr, ideal=True, min_visits=0)
            self._analyses[(fdt, N)] = an
            self._states[(fdt, N)] = an.states
        return self._analyses[(fdt, N)]

    def model(self, fdt: float, N: int) -> markov.MarkovChainModel:
        return markov.fit_markov(self.states(fdt, [N])[N], N)


def _fig6_rows(model, rlm, fdt_K: Sequence[tuple], delays: Sequence[int]) -> list[dict]:
    rows = []
    max_K = max(k for _, k in fdt_K)
    curve = tput.throughput_curve(model, rlm, max(delays) + max_K)
    R_inf = tput.infinite_delay_throughput(model, rlm)
    g0 = curve[0] - R_inf
    csum = np.concatenate([[0.0], np.cumsum(curve - R_inf)])
    for fdt, K in fdt_K:
        for D in delays:
            exact = (csum[D + K] - csum[D]) / K / g0
            rows.append({"fdt": fdt, "K": int(K), "D": int(D), "normalized_gain": float(exact),
                         "approximation": tput.gain_approximation(model.sqrt_lambda, K, D)})
    return rows


def figure_datasets(fs: FigureSpec, which: Sequence[str] = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7")) -> dict:
    """Tidy row tables (lists of dicts) for the validation figures."""
    cache = _PointCache(fs)
    out = {}
    for name in which:
        if name == "fig2":
            N = fs.fig2_size
            states = cache.states(fs.fig2_fdt, [N])[N]
            model = markov.fit_markov(states, N)
            rep = markov.autocorrelation(states, cache.codebook(N), model, fs.fig2_max_lag)
            j0 = fading.bessel_j0(2 * np.pi * fs.fig2_fdt * rep.lags)
            out[name] = [{"tau": int(t), "empirical": float(e), "markov": float(m), "clarke_coefficient": float(c)}
                         for t, e, m, c in zip(rep.lags, rep.empirical, rep.model, j0)]
        elif name == "fig3":
            rows = []
            for fdt in fs.fig3_fdt:
                for N, st in cache.states(fdt, fs.fig3_sizes).items():
                    m = markov.fit_markov(st, N)
                    B = N.bit_length() - 1
                    rows.append({"fdt": fdt, "N": N, "Rs_T": rates.source_rate(m, B, 1.0),
                                 "empirical_Rs_T": B * float(np.mean(st[1:] != st[:-1]))})
            out[name] = rows
        elif name == "fig4":
            rows = []
            N, B = fs.fig4_size, fs.fig4_size.bit_length() - 1
            for fdt in fs.fig4_fdt:
                m = cache.model(fdt, N)
                rs = rates.source_rate(m, B, 1.0)
                for ratio in fs.fig4_ratios:
                    K = max(int(B / (ratio * rs)), 1) if rs > 0 else rates.K_MAX
                    rows.append({"fdt": fdt, "N": N, "target_ratio": ratio, "K": K,
                                 "Rf_over_Rs": B / (K * rs) if rs > 0 else None,
                                 "outage": rates.outage_probability(m, K)})
            out[name] = rows
        elif name == "fig5":
            N = fs.fig5_size
            an = cache.analysis(fs.fig5_fdt, N)
            m = markov.fit_markov(an.states, N)
            curve = tput.throughput_curve(m, an.rlm, max(fs.fig5_delays))
            out[name] = [{"fdt": fs.fig5_fdt, "N": N, "D": int(D), "C_ideal": an.c_ideal,
                          "R_quantized": float(curve[0]), "R_delayed": float(curve[D]),
                          "R_inf": tput.infinite_delay_throughput(m, an.rlm)} for D in fs.fig5_delays]
        elif name == "fig6":
            rows = []
            N = fs.fig6_size
            for fdt in fs.fig6_fdt:
                an = cache.analysis(fdt, N)
                m = markov.fit_markov(an.states, N)
                rows += _fig6_rows(m, an.rlm, [(fdt, k) for k in fs.fig6_K], list(fs.fig6_delays))
            out[name] = rows
        elif name == "fig7":
            rows = []
            for fdt in fs.fig7_fdt:
                for N in fs.fig7_sizes:
                    m = cache.model(fdt, N)
                    B = N.bit_length() - 1
                    rs = rates.source_rate(m, B, 1.0)
                    for ratio in fs.fig7_ratios:
                        K = max(int(B / (ratio * rs)), 1) if rs > 0 else rates.K_MAX
                        sc = cmp.build_scheme(m, K, fs.fig7_epsilon, 1, B)
                        rows.append({"fdt": fdt, "N": N, "Rf_over_Rs": ratio, "K": K,
                                     "B_tilde": sc.compressed_bits, "ratio": sc.ratio})
            out[name] = rows
        else:
            raise DomainError(f"unknown figure {name!r}")
    return out
