"""Lossy fixed-length compression of periodic CSI feedback.

Feedback instants are grouped in cycles of ``W + 1``: one uncompressed
``B``-bit report followed by ``W`` compressed ``B_tilde``-bit reports.  A
compressed report carries the rank of the current state inside the
epsilon-neighbourhood of the previously reported state (under the
``K``-step transition matrix).  A state outside the neighbourhood is replaced
by the truncation codeword, and once truncated the rest of the cycle stays
truncated because the decoder has lost its reference.  On truncation the
decoder picks a uniformly random beam from a seeded stream.

Wire format of one instant: the payload is ``B`` bits at cycle position 0
and ``B_tilde`` bits otherwise, most significant bit first.  Position in the
cycle is implicit.  Full reports carry ``state - 1``; compressed reports
carry the neighbour rank, with the all-ones word reserved for truncation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .fading import DomainError
from .markov import MarkovChainModel

FULL = "full"
COMPRESSED = "compressed"
TRUNCATION = "truncation"


class ProtocolError(DomainError):
    """Encoder and decoder fell out of step."""


@dataclass(frozen=True)
class CompressionScheme:
    epsilon: float
    K: int
    neighborhoods: tuple  # per state m (0-based): destinations (1-based), most probable first
    codeword_bits_per_state: tuple
    compressed_bits: int
    uncompressed_bits: int
    block_length: int = 1
    enabled: bool = True
    sample_interval_s: Optional[float] = None
    tail_mass: np.ndarray = field(default=None, repr=False)

    @property
    def truncation_code(self) -> int:
        return (1 << self.compressed_bits) - 1

    @property
    def ratio(self) -> float:
        """Fraction of feedback bits saved relative to always sending ``B`` bits."""
        if not self.enabled:
            return 0.0
        W, B = self.block_length, self.uncompressed_bits
        return W * (B - self.compressed_bits) / ((W + 1) * B)

    @property
    def avg_feedback_rate_bps(self) -> Optional[float]:
        if self.sample_interval_s is None:
            return None
        b_tilde = self.compressed_bits if self.enabled else self.uncompressed_bits
        return compressed_feedback_rate(self.uncompressed_bits, b_tilde, self.K,
                                        self.sample_interval_s, self.block_length)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon, "K": self.K, "W": self.block_length,
            "B": self.uncompressed_bits, "B_tilde": self.compressed_bits,
            "enabled": self.enabled,
            "neighborhoods": [list(n) for n in self.neighborhoods],
            "bits_per_state": list(self.codeword_bits_per_state),
        }


def epsilon_neighborhood(column: np.ndarray, epsilon: float) -> list[int]:
    """Smallest most-probable set of destinations holding mass ``>= 1 - epsilon``.

    Ties in probability keep the smaller state first.  Returns 1-based states.
    """
    order = np.argsort(-column, kind="stable")
    csum = np.cumsum(column[order])
    target = 1.0 - epsilon
    # 1e-12 absorbs rounding in columns that sum to exactly 1
    count = int(np.searchsorted(csum, target - 1e-12)) + 1
    count = min(count, column.shape[0])
    return [int(s) + 1 for s in order[:count]]


def build_scheme(model: MarkovChainModel, K: int, epsilon: float, W: int = 1,
                 B: Optional[int] = None, sample_interval_s: Optional[float] = None) -> CompressionScheme:
    """Neighbourhoods and codeword lengths on the ``K``-step (feedback-rate) chain."""
    if not 0.0 < epsilon < 1.0:
        raise DomainError("epsilon must lie in (0, 1)")
    if K < 1 or W < 1:
        raise DomainError("K and W must be >= 1")
    N = model.size
    if B is None:
        B = max(int(math.ceil(math.log2(N))), 1)
    PK = np.linalg.matrix_power(model.transition, int(K))
    hoods, bits, tails = [], [], []
    for m in range(N):
        hood = epsilon_neighborhood(PK[:, m], epsilon)
        hoods.append(tuple(hood))
        bits.append(int(math.ceil(math.log2(len(hood) + 1))))
        tails.append(max(1.0 - PK[np.asarray(hood) - 1, m].sum(), 0.0))
    b_tilde = max(bits)
    enabled = b_tilde < B
    return CompressionScheme(float(epsilon), int(K), tuple(hoods), tuple(bits),
                             min(b_tilde, B), int(B), int(W), enabled, sample_interval_s, np.array(tails))


def compressed_throughput_gain(delta_R: float, epsilon: float, W: int = 1) -> float:
    """Feedback throughput gain after compression: ``[1-(1-eps)^(W+1)] / ((W+1) eps)`` times the gain."""
    if not 0.0 <= epsilon < 1.0 or W < 1:
        raise DomainError("need epsilon in [0, 1) and W >= 1")
    if epsilon == 0.0:
        return float(delta_R)
    factor = -math.expm1((W + 1) * math.log1p(-epsilon)) / ((W + 1) * epsilon)
    return float(factor * delta_R)


def compressed_feedback_rate(B: int, B_tilde: int, K: int, T: float, W: int = 1) -> float:
    """Average feedback bit rate ``(B + W*B_tilde) / ((W+1) K T)``."""
    if K < 1 or W < 1 or T <= 0:
        raise DomainError("need K >= 1, W >= 1, T > 0")
    return (B + W * B_tilde) / ((W + 1) * K * T)


@dataclass(frozen=True)
class Codeword:
    kind: str
    payload: int
    bits: int

    def to_bits(self) -> str:
        return format(self.payload, f"0{self.bits}b") if self.bits else ""


def pack_bits(codewords) -> bytes:
    """Concatenate codeword payloads MSB first, zero-padded to whole bytes."""
    s = "".join(c.to_bits() for c in codewords)
    s += "0" * (-len(s) % 8)
    return int(s, 2).to_bytes(len(s) // 8, "big") if s else b""


@dataclass
class CodecState:
    """Protocol state shared (in lockstep) by encoder and decoder."""

    role: str
    reference_state: Optional[int] = None
    position_in_cycle: int = 0
    truncated: bool = False
    rng_seed: int = 0
    rng: np.random.Generator = field(default=None, repr=False)

    def __post_init__(self):
        if self.role not in ("encoder", "decoder"):
            raise DomainError("role must be 'encoder' or 'decoder'")
        if self.rng is None:
            self.rng = np.random.default_rng(self.rng_seed)

    def _advance(self, scheme: CompressionScheme) -> None:
        self.position_in_cycle = (self.position_in_cycle + 1) % (scheme.block_length + 1)

    def snapshot(self) -> tuple:
        return (self.reference_state, self.position_in_cycle, self.truncated)


def encode(state_now: int, codec: CodecState, scheme: CompressionScheme) -> Codeword:
    if codec.role != "encoder":
        raise DomainError("encode needs an encoder-role codec")
    N = len(scheme.neighborhoods)
    if not 1 <= state_now <= N:
        raise DomainError(f"state {state_now} outside 1..{N}")
    if codec.position_in_cycle == 0 or not scheme.enabled:
        cw = Codeword(FULL, state_now - 1, scheme.uncompressed_bits)
        codec.reference_state = state_now
        codec.truncated = False
    elif codec.truncated:
        cw = Codeword(TRUNCATION, scheme.truncation_code, scheme.compressed_bits)
    else:
        hood = scheme.neighborhoods[codec.reference_state - 1]
        if state_now in hood:
            cw = Codeword(COMPRESSED, hood.index(state_now), scheme.compressed_bits)
            codec.reference_state = state_now
        else:
            cw = Codeword(TRUNCATION, scheme.truncation_code, scheme.compressed_bits)
            codec.truncated = True
    if scheme.enabled:
        codec._advance(scheme)
    return cw


def decode(codeword: Codeword, codec: CodecState, scheme: CompressionScheme) -> int:
    """Beam index (1-based) the transmitter uses after receiving ``codeword``."""
    if codec.role != "decoder":
        raise DomainError("decode needs a decoder-role codec")
    N = len(scheme.neighborhoods)
    if codec.position_in_cycle == 0 or not scheme.enabled:
        if codeword.bits != scheme.uncompressed_bits or not 0 <= codeword.payload < N:
            raise ProtocolError("expected a full report at this cycle position")
        index = codeword.payload + 1
        codec.reference_state = index
        codec.truncated = False
    else:
        if codeword.bits != scheme.compressed_bits:
            raise ProtocolError("expected a compressed report at this cycle position")
        if codeword.payload == scheme.truncation_code:
            codec.truncated = True
            index = int(codec.rng.integers(1, N + 1))
        elif codec.truncated:
            raise ProtocolError("non-truncation codeword after truncation within a block")
        else:
            hood = scheme.neighborhoods[codec.reference_state - 1]
            if codeword.payload >= len(hood):
                raise ProtocolError(f"rank {codeword.payload} outside neighbourhood of size {len(hood)}")
            index = hood[codeword.payload]
            codec.reference_state = index
    if scheme.enabled:
        codec._advance(scheme)
    return index


def run_codec(states, scheme: CompressionScheme, seed: int = 0) -> tuple[np.ndarray, list]:
    """Encode and decode a feedback-instant state sequence; returns decoded beams and codewords."""
    enc = CodecState("encoder", rng_seed=seed)
    dec = CodecState("decoder", rng_seed=seed)
    out = np.empty(len(states), dtype=np.int64)
    words = []
    for i, s in enumerate(states):
        cw = encode(int(s), enc, scheme)
        out[i] = decode(cw, dec, scheme)
        words.append(cw)
    return out, words


def save_scheme(scheme: CompressionScheme, path) -> None:
    Path(path).write_text(json.dumps(scheme.to_dict(), indent=1))


def load_scheme(path, sample_interval_s: Optional[float] = None) -> CompressionScheme:
    d = json.loads(Path(path).read_text())
    hoods = tuple(tuple(int(x) for x in n) for n in d["neighborhoods"])
    return CompressionScheme(float(d["epsilon"]), int(d["K"]), hoods, tuple(d["bits_per_state"]),
                             int(d["B_tilde"]), int(d["B"]), int(d["W"]), bool(d.get("enabled", True)),
                             sample_interval_s)
