"""Beamforming codebooks and the SNR-maximising channel quantizer.

States are 1-based throughout (``1..N``) to match the usual channel-state
numbering; arrays indexed by state use ``state - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .fading import ChannelTrace, DomainError


@dataclass(frozen=True)
class Codebook:
    """``size`` unit-norm columns of ``vectors`` (shape ``(n_tx, size)``)."""

    n_tx: int
    size: int
    bits: int
    vectors: np.ndarray = field(repr=False)
    min_chordal_distance: float
    degenerate: bool = False

    def gram(self) -> np.ndarray:
        """``|v_l^* v_m|^2`` for all codeword pairs."""
        g = self.vectors.conj().T @ self.vectors
        return np.abs(g) ** 2


@dataclass(frozen=True)
class StateSequence:
    states: np.ndarray
    codebook_size: int
    sample_interval_s: float = 1.0
    codebook_id: Optional[str] = None

    def __len__(self) -> int:
        return self.states.shape[0]


def chordal_distances(vectors: np.ndarray) -> np.ndarray:
    g = np.abs(vectors.conj().T @ vectors) ** 2
    return np.sqrt(np.clip(1.0 - g, 0.0, None))


def _min_offdiag(d: np.ndarray) -> float:
    if d.shape[0] < 2:
        return float("nan")
    return float(np.min(d[~np.eye(d.shape[0], dtype=bool)]))


def _bits_for(size: int) -> int:
    if size < 1 or size & (size - 1):
        raise DomainError(f"codebook size must be a power of two, got {size}")
    return size.bit_length() - 1


def _random_unit(rng: np.random.Generator, n_tx: int, count: int) -> np.ndarray:
    v = rng.standard_normal((n_tx, count)) + 1j * rng.standard_normal((n_tx, count))
    return v / np.linalg.norm(v, axis=0)


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    # First nonzero component made real-positive; lines are phase invariant.
    out = v.copy()
    for j in range(v.shape[1]):
        k = int(np.argmax(np.abs(v[:, j]) > 1e-12))
        out[:, j] *= np.exp(-1j * np.angle(v[k, j]))
    return out / np.linalg.norm(out, axis=0)


def from_vectors(vectors: np.ndarray) -> Codebook:
    vectors = np.asarray(vectors, dtype=complex)
    if vectors.ndim != 2:
        raise DomainError("codebook vectors must be a 2-D (n_tx, N) array")
    n_tx, size = vectors.shape
    bits = _bits_for(size)
    norms = np.linalg.norm(vectors, axis=0)
    if np.any(np.abs(norms - 1.0) > 1e-9):
        raise DomainError("codebook vectors must have unit norm")
    vectors = vectors / norms
    vectors.flags.writeable = False
    dmin = _min_offdiag(chordal_distances(vectors))
    degenerate = size > 1 and (n_tx == 1 or dmin < 1e-9)
    return Codebook(n_tx, size, bits, vectors, dmin, degenerate)


def build_codebook(n_tx: int, size: int, seed: int = 0, iterations: int = 10_000) -> Codebook:
    """Max-min chordal distance line packing by random search with local polish.

    Starts from random unit vectors and repeatedly perturbs (or redraws) one
    member of the closest pair, keeping the candidate only when that member's
    nearest-neighbour distance improves.
    """
    if n_tx < 1:
        raise DomainError("n_tx must be >= 1")
    _bits_for(size)
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xC0DE,)))
    v = _random_unit(rng, n_tx, size)
    if size == 1 or n_tx == 1:
        return from_vectors(_normalize_phase(v))

    g = np.abs(v.conj().T @ v) ** 2
    np.fill_diagonal(g, -1.0)
    nearest = g.max(axis=0)  # largest overlap = smallest distance, per vector
    step = 0.5
    for it in range(iterations):
        worst = int(np.argmax(nearest))
        partner = int(np.argmax(g[:, worst]))
        i = worst if rng.random() < 0.5 else partner
        if rng.random() < 0.1:
            cand = _random_unit(rng, n_tx, 1)[:, 0]
        else:
            noise = rng.standard_normal(n_tx) + 1j * rng.standard_normal(n_tx)
            cand = v[:, i] + step * noise / np.sqrt(2 * n_tx)
            cand /= np.linalg.norm(cand)
        overlap = np.abs(v.conj().T @ cand) ** 2
        overlap[i] = -1.0
        if overlap.max() < nearest[i]:
            v[:, i] = cand
            g[:, i] = overlap
            g[i, :] = overlap
            nearest = g.max(axis=0)
        else:
            step = max(step * 0.9995, 0.01)
    return from_vectors(_normalize_phase(v))


def _gains(H: np.ndarray, cb: Codebook) -> np.ndarray:
    """``||H v_l||^2`` for every codeword; ``H`` may be a stack ``(..., n_rx, n_tx)``."""
    hv = H @ cb.vectors
    return np.sum(hv.real ** 2 + hv.imag ** 2, axis=-2)


def codeword_gains(H: np.ndarray, cb: Codebook) -> np.ndarray:
    H = np.asarray(H)
    if H.shape[-1] != cb.n_tx:
        raise DomainError(f"channel has {H.shape[-1]} transmit columns, codebook expects {cb.n_tx}")
    return _gains(H, cb)


def quantize(H: np.ndarray, cb: Codebook) -> int:
    """Index (1-based) of the codeword maximising ``||H v||^2``; ties go to the smaller index."""
    H = np.atleast_2d(np.asarray(H))
    if H.ndim != 2:
        raise DomainError("quantize expects a single channel matrix")
    return int(np.argmax(codeword_gains(H, cb))) + 1


def quantize_many(H: np.ndarray, cb: Codebook, block: int = 65536) -> np.ndarray:
    """Quantize a stack of channels ``(n, n_rx, n_tx)`` to 1-based states."""
    H = np.asarray(H)
    if H.ndim == 2:
        return np.argmax(codeword_gains(H, cb), axis=-1) + 1
    if H.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    return np.concatenate([np.argmax(codeword_gains(H[i:i + block], cb), axis=-1) + 1
                           for i in range(0, max(H.shape[0], 1), block)])


def quantize_trace(trace: ChannelTrace, cb: Codebook, sample_interval_s: Optional[float] = None) -> StateSequence:
    if trace.n_tx != cb.n_tx:
        raise DomainError(f"trace has {trace.n_tx} transmit antennas, codebook expects {cb.n_tx}")
    T = trace.spec.sample_interval_s if sample_interval_s is None else sample_interval_s
    if len(trace) == 0:
        return StateSequence(np.empty(0, dtype=np.int64), cb.size, T)
    states = quantize_many(trace.samples, cb)
    return StateSequence(states.astype(np.int64), cb.size, T)


def quantize_chunks(chunks: Iterable[tuple[int, np.ndarray]], cb: Codebook) -> np.ndarray:
    return np.concatenate([quantize_many(c, cb) for _, c in chunks]).astype(np.int64)


def effective_gain(H: np.ndarray, cb: Codebook, state: int) -> float:
    """Beamformed channel norm ``||H v_state||`` seen after maximum-ratio combining."""
    if not 1 <= state <= cb.size:
        raise DomainError(f"state {state} outside 1..{cb.size}")
    H = np.atleast_2d(np.asarray(H))
    if H.shape[-1] != cb.n_tx:
        raise DomainError("dimension mismatch between channel and codebook")
    return float(np.linalg.norm(H @ cb.vectors[:, state - 1]))


def save_codebook(cb: Codebook, path) -> None:
    lines = [f"CBK1 {cb.n_tx} {cb.size}"]
    for j in range(cb.size):
        vals = []
        for z in cb.vectors[:, j]:
            vals += [repr(float(z.real)), repr(float(z.imag))]
        lines.append(" ".join(vals))
    Path(path).write_text("\n".join(lines) + "\n")


def load_codebook(path) -> Codebook:
    lines = Path(path).read_text().split("\n")
    head = lines[0].split()
    if len(head) != 3 or head[0] != "CBK1":
        raise DomainError(f"{path}: missing 'CBK1 n_tx N' header")
    n_tx, size = int(head[1]), int(head[2])
    rows = [ln.split() for ln in lines[1:] if ln.strip()]
    if len(rows) != size or any(len(r) != 2 * n_tx for r in rows):
        raise DomainError(f"{path}: expected {size} rows of {2 * n_tx} floats")
    arr = np.array(rows, dtype=float)
    vectors = (arr[:, 0::2] + 1j * arr[:, 1::2]).T
    return from_vectors(vectors)
