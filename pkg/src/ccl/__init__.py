"""Layered coded caching over a macro-diversity edge network.

Closed-form layer decoding probabilities for a PZF receiver in a Poisson
field of edge nodes, the resulting average distortion of a successively
refined Gaussian source, MAN coded caching with MDS splitting, and an
alternating PSO / closed-form search for the latency-optimal cache split.
"""

from .distortion import average_distortion, decoding_probabilities, distortion
from .optimize import PsoConfig, alternate_optimize, cache_split_closed_form, delta_T, uniform_baseline
from .params import LayerSpec, LinkModel, SystemParams, default_layers
from .special import ergodic_I, inverse_qlb, qlb_rate

__all__ = [
    "LayerSpec",
    "LinkModel",
    "PsoConfig",
    "SystemParams",
    "alternate_optimize",
    "average_distortion",
    "cache_split_closed_form",
    "decoding_probabilities",
    "default_layers",
    "delta_T",
    "distortion",
    "ergodic_I",
    "inverse_qlb",
    "qlb_rate",
    "uniform_baseline",
]
