"""Outage analysis and optimization of truncated channel-inversion power control."""

from cipc.errors import DomainError, InfeasibleError, UnsupportedConfigError
from cipc.model import (
    ConvexInterval,
    OutageBreakdown,
    SystemConfig,
    convex_interval,
    decoding_error,
    outage_probability,
    pt_at_knee,
    solve_q0,
    transmit_probability,
)
from cipc.montecarlo import McConfig, McEstimate, estimate
from cipc.optimize import OptimizationResult, optimize_q, sweep_optimal

__all__ = [
    "ConvexInterval",
    "DomainError",
    "InfeasibleError",
    "McConfig",
    "McEstimate",
    "OptimizationResult",
    "OutageBreakdown",
    "SystemConfig",
    "UnsupportedConfigError",
    "convex_interval",
    "decoding_error",
    "estimate",
    "optimize_q",
    "outage_probability",
    "pt_at_knee",
    "solve_q0",
    "sweep_optimal",
    "transmit_probability",
]
