"""Parametric estimation of time-varying frequency-selective MIMO-OFDM
channels via CP tensor decomposition."""

from .cpsolver import CpFactors, CpSolveConfig, DegenerateComponentError, cp_als, normalize_factors
from .harmonic import AcdConfig, AcdResult, TrigPolyRatio, acd_2d, esprit_tone, max_unit_circle, vandermonde
from .modelorder import MdlReport, estimate_model_order, mdl_rank
from .pipelines import (
    EstimationError,
    EstimationResult,
    EstimatorConfig,
    PilotDesignError,
    estimate_digital,
    estimate_hybrid,
    estimate_psi_hybrid,
    jade_digital,
    jade_hybrid,
    refine_a1,
    refine_a2,
)
from .simchannel import (
    ChannelGenConfig,
    ChannelParamSet,
    PathParams,
    PilotDigital,
    PilotHybrid,
    SystemDims,
    channel_tensor,
    draw_channel,
    make_pilot_digital,
    make_pilot_hybrid,
    receive_digital,
    receive_hybrid,
    snr_to_n0,
)
from .tensors import cp_compose, fold, khatri_rao, rank1_compose, unfold, vectorize

__version__ = "0.1.0"
