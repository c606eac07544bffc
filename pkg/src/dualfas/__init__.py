"""Capacity analysis and power allocation for jointly correlated dual-side fluid antenna links."""
from . import allocator, capacity, channel, numerics, permanent
from .allocator import OptimizerConfig, gradient, kkt_residual, optimize, project_simplex
from .capacity import (
    CapacityEstimate,
    PowerAllocation,
    SnrSpec,
    mc_det_expectation,
    mc_full_capacity,
    mc_selection_capacity,
    upper_bound,
)
from .channel import (
    CouplingKind,
    CouplingModel,
    PortGeometry,
    build_correlation,
    build_coupling,
    build_eigenbasis,
    sample_channel,
)
from .numerics import RngStream
from .permanent import extended_permanent, extended_permanent_log2, permanent_ryser

__version__ = "0.1.0"
