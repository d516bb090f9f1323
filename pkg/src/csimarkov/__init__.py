"""Finite-state Markov modelling of quantized CSI for limited-feedback beamforming."""

from .codebook import Codebook, StateSequence, build_codebook, quantize, quantize_trace
from .compression import CompressionScheme, CodecState, build_scheme, decode, encode
from .fading import ChannelTrace, DomainError, DopplerSpec, generate_trace, make_doppler_spec
from .markov import ErgodicityError, MarkovChainModel, fit_markov, model_from_matrix
from .planner import DesignSpec, PlanReport, plan
from .rates import FeedbackPlan, build_feedback_plan, outage_probability, source_rate
from .throughput import RlmTable, StarvedCellsError, estimate_rlm, gain_and_bound

__version__ = "0.1.0"
