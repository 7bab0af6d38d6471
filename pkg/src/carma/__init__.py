"""Attribute-based stochastic process calculus: parsing, continuous-time
Markov chain derivation, and simulation."""

from .errors import (
    CarmaError,
    EvalError,
    ModelError,
    ParseError,
)
from .model import Measure, MeasureGrid, Model
from .dsl import format_model, format_process, parse_model
from .semantics.system import exhaustive_ctmc, export_ctmc, system_transitions
from .simulator import SimulationResult, simulate, write_csv

__all__ = [
    "CarmaError",
    "EvalError",
    "Measure",
    "MeasureGrid",
    "Model",
    "ModelError",
    "ParseError",
    "SimulationResult",
    "exhaustive_ctmc",
    "export_ctmc",
    "format_model",
    "format_process",
    "parse_model",
    "simulate",
    "system_transitions",
    "write_csv",
]
