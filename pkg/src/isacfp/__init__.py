"""Fractional-programming beamformers for multi-cell integrated sensing and communications."""

__version__ = "0.1.0"

from .errors import ConfigError, DomainError, NumericalError
from .scenario import ChannelSet, NetworkConfig, Topology, make_scenario
from .metrics import ObjectiveBreakdown, Weights, objective
from .fpcore import MajorantStrategy
from .solvers import ALGORITHMS, IterationTrace, SolverOptions, run

__all__ = [
    "ConfigError", "DomainError", "NumericalError",
    "ChannelSet", "NetworkConfig", "Topology", "make_scenario",
    "ObjectiveBreakdown", "Weights", "objective",
    "MajorantStrategy", "ALGORITHMS", "IterationTrace", "SolverOptions", "run",
]
