"""Dense two-phase simplex LP solver with warm starts and dual extraction."""

from .model import (
    EQ,
    GE,
    LE,
    Basis,
    IterationLimitError,
    LinearProgram,
    LpError,
    LpFormatError,
    LpSolution,
    LpStatus,
    NotOptimalError,
    PerturbationPolicy,
    PerturbMode,
    extract_duals,
)
from .simplex import active_backend, cython_backend_available, solve
from .mps import write_mps, read_mps

__all__ = [
    "LE",
    "EQ",
    "GE",
    "Basis",
    "IterationLimitError",
    "LinearProgram",
    "LpError",
    "LpFormatError",
    "LpSolution",
    "LpStatus",
    "NotOptimalError",
    "PerturbationPolicy",
    "PerturbMode",
    "extract_duals",
    "solve",
    "active_backend",
    "cython_backend_available",
    "write_mps",
    "read_mps",
]
