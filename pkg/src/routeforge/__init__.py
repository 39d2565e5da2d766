"""Composable meta-heuristics for vehicle routing with time windows."""

__version__ = "0.1.0"

from .model import Instance, ParseError, distance, parse_solomon
from .solution import (EvalContext, InsertionReport, NoFeasibleInsertion,
                       RemovalReport, Solution, Violation, objective, pull,
                       push, validate)

__all__ = [
    "Instance", "ParseError", "distance", "parse_solomon",
    "EvalContext", "InsertionReport", "NoFeasibleInsertion", "RemovalReport",
    "Solution", "Violation", "objective", "pull", "push", "validate",
    "__version__",
]
