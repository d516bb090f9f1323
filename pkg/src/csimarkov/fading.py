"""Doppler-correlated Rayleigh MIMO channel traces.

Each channel coefficient is an independent sum-of-sinusoids process whose
autocorrelation approximates Clarke's ``J0(2*pi*fD*T*tau)``.  Arrival angles
are stratified over the circle (one random angle per stratum) so that the
time-averaged autocorrelation of a single realisation already tracks J0
closely; phases are i.i.d. uniform.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Optional

import numpy as np
from scipy import special

SPEED_OF_LIGHT = 2.99792458e8

# Chunk length is fixed so that output never depends on how work is split.
CHUNK_LEN = 4096
DEFAULT_SINUSOIDS = 64

TRACE_MAGIC = b"CSIT"
TRACE_VERSION = 1
_TRACE_HEADER = struct.Struct("<4sIIIQdQ")


class DomainError(ValueError):
    """Raised for inputs outside an operation's domain."""


@dataclass(frozen=True)
class DopplerSpec:
    carrier_hz: Optional[float]
    speed_mps: Optional[float]
    sample_interval_s: float
    doppler_hz: float
    normalized_doppler: float

    @classmethod
    def from_normalized(cls, normalized_doppler: float, sample_interval_s: float = 1.0) -> "DopplerSpec":
        """Build a spec from ``fD*T`` alone (carrier and speed unknown)."""
        if not normalized_doppler > 0 or not sample_interval_s > 0:
            raise DomainError("normalized Doppler and sample interval must be positive")
        return cls(None, None, float(sample_interval_s),
                   normalized_doppler / sample_interval_s, float(normalized_doppler))


def make_doppler_spec(carrier_hz: float, speed_mps: float, sample_interval_s: float) -> DopplerSpec:
    """Maximum Doppler shift ``v*fc/c`` and its value normalised by the sample rate."""
    for name, value in (("carrier_hz", carrier_hz), ("speed_mps", speed_mps),
                        ("sample_interval_s", sample_interval_s)):
        if not np.isfinite(value) or value <= 0:
            raise DomainError(f"{name} must be positive, got {value!r}")
    fd = speed_mps * carrier_hz / SPEED_OF_LIGHT
    return DopplerSpec(float(carrier_hz), float(speed_mps), float(sample_interval_s),
                       fd, fd * sample_interval_s)


def bessel_j0(x):
    """Bessel function of the first kind, order zero."""
    return special.j0(x)


@dataclass(frozen=True)
class ChannelTrace:
    """Immutable sequence of ``n_rx x n_tx`` channel matrices, shape ``(n, n_rx, n_tx)``."""

    n_rx: int
    n_tx: int
    samples: np.ndarray = field(repr=False)
    spec: DopplerSpec
    seed: int

    def __len__(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True)
class _SosParams:
    omega: np.ndarray  # (entries, M) rad/sample
    phase: np.ndarray  # (entries, M)
    n_rx: int
    n_tx: int


def _sos_params(spec: DopplerSpec, n_rx: int, n_tx: int, seed: int, n_sinusoids: int) -> _SosParams:
    entries = n_rx * n_tx
    omega = np.empty((entries, n_sinusoids))
    phase = np.empty((entries, n_sinusoids))
    w_max = 2.0 * np.pi * spec.normalized_doppler
    strata = np.arange(n_sinusoids)
    for e in range(entries):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(e,)))
        alpha = 2.0 * np.pi * (strata + rng.random(n_sinusoids)) / n_sinusoids
        omega[e] = w_max * np.cos(alpha)
        phase[e] = 2.0 * np.pi * rng.random(n_sinusoids)
    return _SosParams(omega, phase, n_rx, n_tx)


class _ChunkSynth:
    """Evaluates fixed-length blocks of the sum-of-sinusoids process."""

    def __init__(self, params: _SosParams):
        self.params = params
        m = params.omega.shape[1]
        t = np.arange(CHUNK_LEN, dtype=float)
        # (entries, CHUNK_LEN, M); reused for every block
        self._table = np.exp(1j * params.omega[:, None, :] * t[None, :, None]) / np.sqrt(m)

    def block(self, start: int, length: int) -> np.ndarray:
        p = self.params
        coef = np.exp(1j * (p.omega * float(start) + p.phase))  # (entries, M)
        h = np.matmul(self._table[:, :length, :], coef[:, :, None])[..., 0]  # (entries, length)
        return np.ascontiguousarray(h.T).reshape(length, p.n_rx, p.n_tx)


def _check_dims(n_rx: int, n_tx: int, num_samples: int) -> None:
    if n_rx < 1 or n_tx < 1:
        raise DomainError("antenna counts must be >= 1")
    if num_samples < 0:
        raise DomainError("num_samples must be >= 0")


def iter_trace_chunks(spec: DopplerSpec, n_rx: int, n_tx: int, num_samples: int, seed: int,
                      n_sinusoids: int = DEFAULT_SINUSOIDS,
                      chunk_blocks: int = 16, workers: int = 1) -> Iterator[tuple[int, np.ndarray]]:
    """Yield ``(start, samples)`` pieces of the trace ``generate_trace`` would build.

    Lets long traces be analysed in bounded memory; concatenating the pieces
    reproduces ``generate_trace(...).samples`` bit for bit, for any ``workers``.
    """
    _check_dims(n_rx, n_tx, num_samples)
    synth = _ChunkSynth(_sos_params(spec, n_rx, n_tx, seed, n_sinusoids))
    step = CHUNK_LEN * chunk_blocks
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for start in range(0, num_samples, step):
            stop = min(start + step, num_samples)
            out = np.empty((stop - start, n_rx, n_tx), dtype=complex)

            def fill(b: int) -> None:
                n = min(CHUNK_LEN, stop - b)
                out[b - start:b - start + n] = synth.block(b, n)

            blocks = range(start, stop, CHUNK_LEN)
            if pool is None:
                for b in blocks:
                    fill(b)
            else:
                list(pool.map(fill, blocks))
            yield start, out
    finally:
        if pool is not None:
            pool.shutdown()


def generate_trace(spec: DopplerSpec, n_rx: int, n_tx: int, num_samples: int, seed: int,
                   n_sinusoids: int = DEFAULT_SINUSOIDS, workers: int = 1) -> ChannelTrace:
    """Generate a spatially i.i.d., Clarke-correlated Rayleigh channel trace.

    Parameters
    ----------
    spec : DopplerSpec
        Fading speed; only ``normalized_doppler`` affects the samples.
    n_rx, n_tx : int
        Antenna counts.
    num_samples : int
        Trace length.
    seed : int
        Master seed.  Entry ``e`` draws its angles and phases from
        ``SeedSequence(seed, spawn_key=(e,))``.
    n_sinusoids : int
        Sinusoids per coefficient.
    workers : int
        Threads used to evaluate blocks.  Output does not depend on it.
    """
    _check_dims(n_rx, n_tx, num_samples)
    if n_sinusoids < 1:
        raise DomainError("n_sinusoids must be >= 1")
    synth = _ChunkSynth(_sos_params(spec, n_rx, n_tx, seed, n_sinusoids))
    samples = np.empty((num_samples, n_rx, n_tx), dtype=complex)

    def fill(start: int) -> None:
        n = min(CHUNK_LEN, num_samples - start)
        samples[start:start + n] = synth.block(start, n)

    starts = range(0, num_samples, CHUNK_LEN)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(fill, starts))
    else:
        for s in starts:
            fill(s)
    samples.flags.writeable = False
    return ChannelTrace(n_rx, n_tx, samples, spec, int(seed))


def empirical_autocorrelation(x: np.ndarray, max_lag: int) -> np.ndarray:
    """Normalised autocorrelation ``E[x(n+tau) x*(n)] / E|x|^2`` of a complex series, real part."""
    x = np.asarray(x)
    n = x.shape[0]
    if max_lag >= n:
        raise DomainError("max_lag must be shorter than the series")
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.fft(x, size)
    r = np.fft.ifft(f * np.conj(f))[:max_lag + 1]
    r = r / (n - np.arange(max_lag + 1))
    return (r / r[0]).real


def save_trace(trace: ChannelTrace, path) -> None:
    header = _TRACE_HEADER.pack(TRACE_MAGIC, TRACE_VERSION, trace.n_rx, trace.n_tx, len(trace),
                                trace.spec.normalized_doppler, trace.seed)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(trace.samples, dtype="<c16").tobytes())


def load_trace(path, sample_interval_s: float = 1.0) -> ChannelTrace:
    data = Path(path).read_bytes()
    magic, version, n_rx, n_tx, n, fdt, seed = _TRACE_HEADER.unpack_from(data)
    if magic != TRACE_MAGIC or version != TRACE_VERSION:
        raise DomainError(f"{path}: not a version-{TRACE_VERSION} trace file")
    body = np.frombuffer(data, dtype="<c16", offset=_TRACE_HEADER.size)
    if body.size != n * n_rx * n_tx:
        raise DomainError(f"{path}: truncated trace body")
    samples = body.astype(complex).reshape(n, n_rx, n_tx)
    samples.flags.writeable = False
    return ChannelTrace(n_rx, n_tx, samples, DopplerSpec.from_normalized(fdt, sample_interval_s), seed)
