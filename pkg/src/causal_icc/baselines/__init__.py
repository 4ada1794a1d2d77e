"""Comparison measures of causal influence."""

from .causal_shapley import BadObservation, causal_shapley_expectation, causal_shapley_uncertainty
from .info_flow import OverlapError, information_flow, interventional_distribution
from .shapley_flow import (
    Boundary,
    FlowAttribution,
    FlowConfig,
    InvalidBoundary,
    PathCapExceeded,
    boundary_consistency_check,
    conservation_residuals,
    shapley_flow,
)
from .strength import UnknownEdge, causal_strength_edge

__all__ = [
    "BadObservation",
    "Boundary",
    "FlowAttribution",
    "FlowConfig",
    "InvalidBoundary",
    "OverlapError",
    "PathCapExceeded",
    "UnknownEdge",
    "boundary_consistency_check",
    "causal_shapley_expectation",
    "causal_shapley_uncertainty",
    "causal_strength_edge",
    "conservation_residuals",
    "information_flow",
    "interventional_distribution",
    "shapley_flow",
]
