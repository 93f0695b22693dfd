"""Confidence detection: labeling, static HMM, DA-HMM and decoding."""

from .adaptive import (DaHmm, DecayFit, adaptive_emission, adaptive_transition, estimate_da_hmm,
                       fit_adaptive_transition, gauss_newton_exp_decay)
from .decode import Decoded, brute_force_decode, viterbi_decode
from .labels import FLAWED, NORMAL, LabeledSequence, compute_tau, label_confidence
from .observation import P_FLOOR, EmissionIndex, Observation, jaccard, observation_of
from .static import StaticHmm, train_static_hmm

__all__ = [
    "DaHmm", "DecayFit", "Decoded", "EmissionIndex", "FLAWED", "LabeledSequence", "NORMAL",
    "Observation", "P_FLOOR", "StaticHmm", "adaptive_emission", "adaptive_transition",
    "brute_force_decode", "compute_tau", "estimate_da_hmm", "fit_adaptive_transition",
    "gauss_newton_exp_decay", "jaccard", "label_confidence", "observation_of", "train_static_hmm",
    "viterbi_decode",
]
