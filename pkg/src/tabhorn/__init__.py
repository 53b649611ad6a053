"""tabhorn: a tabled Horn-clause evaluator.

Variant tables, subsumptive tables, and subsumptive tabling with call
abstraction via table_index declarations; a multiple-machine scheduler with
reproducible traces; and an independent bottom-up oracle for differential
testing.
"""

from .engine import Engine, EngineError, TraceConfig
from .program import parse_program, parse_query, print_term, validate
from .terms import Struct, Var, VarSource, unify

__version__ = "0.1.0"

__all__ = [
    "Engine",
    "EngineError",
    "TraceConfig",
    "parse_program",
    "parse_query",
    "print_term",
    "validate",
    "Struct",
    "Var",
    "VarSource",
    "unify",
    "__version__",
]
