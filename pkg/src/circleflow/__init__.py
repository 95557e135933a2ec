"""Stochastic flows of kernels for Tanaka's equation on an oriented circle graph."""

from .circle import (
    TOL_MERGE,
    AtomicMeasure,
    CirclePoint,
    GraphParams,
    epsilon,
    measure_distance,
    pushforward,
)
from .decorations import DecorationStore, SplitLaw, parse_law, resample_epsilons
from .flow import FlowRealization, coalescing_wrapper, flow_map, kernel, sde_residual
from .paths import BrownianPath, sample_path

__all__ = [
    "TOL_MERGE",
    "AtomicMeasure",
    "BrownianPath",
    "CirclePoint",
    "DecorationStore",
    "FlowRealization",
    "GraphParams",
    "SplitLaw",
    "coalescing_wrapper",
    "epsilon",
    "flow_map",
    "kernel",
    "measure_distance",
    "parse_law",
    "pushforward",
    "resample_epsilons",
    "sample_path",
    "sde_residual",
]
