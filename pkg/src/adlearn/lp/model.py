"""Problem and solution containers for the dense LP solver.

Sign conventions (minimization problems throughout):

* row duals ``pi``: a binding ``>=`` row has ``pi >= 0``, a binding ``<=``
  row has ``pi <= 0``, equality rows are unrestricted;
* reduced costs ``d = c - A^T pi``: nonnegative for columns at their lower
  bound, nonpositive for columns at their upper bound;
* strong duality: ``c.x == pi.b + sum_j d_j x_j`` over nonbasic columns j
  (the last term is the bound contribution).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

LE, EQ, GE = "<=", "==", ">="

_SENSES = (LE, EQ, GE)


class LpError(Exception):
    """Base class for solver errors."""


class LpFormatError(LpError):
    """The LinearProgram violates a structural invariant."""


class IterationLimitError(LpError):
    """The pivot budget was exhausted before reaching a terminal status."""


class NotOptimalError(LpError):
    """Dual information requested from a non-optimal solution."""


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class PerturbMode(enum.Enum):
    NONE = "none"
    DETERMINISTIC = "deterministic"


@dataclass(frozen=True)
class PerturbationPolicy:
    """Anti-degeneracy objective perturbation.

    In deterministic mode column ``j`` of the objective receives the offset
    ``eps * (j + 1) / (n + 1)``: seed-free, strictly increasing in the column
    index, and independent of the right-hand side, so one perturbation is
    valid for every rhs the same structure is re-solved with.
    """

    mode: PerturbMode = PerturbMode.NONE
    eps: float = 0.0

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("perturbation magnitude must be >= 0")

    @classmethod
    def none(cls) -> "PerturbationPolicy":
        return cls(PerturbMode.NONE, 0.0)

    @classmethod
    def deterministic(cls, eps: float = 1e-7) -> "PerturbationPolicy":
        return cls(PerturbMode.DETERMINISTIC, eps)

    def offsets(self, n_cols: int) -> np.ndarray:
        if self.mode is PerturbMode.NONE or self.eps == 0.0:
            return np.zeros(n_cols)
        j = np.arange(1, n_cols + 1, dtype=float)
        return self.eps * j / (n_cols + 1)


@dataclass(frozen=True)
class Basis:
    """Simplex basis descriptor: basic columns plus which nonbasic columns
    rest at their upper bound.  Column indices refer to the solver's
    slack-extended column space (structural columns first, then one slack
    per inequality row)."""

    basic: tuple
    at_upper: tuple = ()


@dataclass
class LinearProgram:
    """Dense, row-oriented LP: min c.x s.t. A x (<=,==,>=) b, lb <= x <= ub."""

    c: np.ndarray
    A: np.ndarray
    senses: list
    b: np.ndarray
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    row_names: list | None = None
    col_names: list | None = None
    objective_constant: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        n = self.c.shape[0]
        if self.lb is None:
            self.lb = np.zeros(n)
        if self.ub is None:
            self.ub = np.full(n, np.inf)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        if self.row_names is None:
            self.row_names = [f"r{i}" for i in range(self.n_rows)]
        if self.col_names is None:
            self.col_names = [f"x{j}" for j in range(n)]
        self.validate()

    @property
    def n_rows(self) -> int:
        return self.A.shape[0] if self.A.size else len(self.b)

    @property
    def n_cols(self) -> int:
        return self.c.shape[0]

    def validate(self):
        m, n = self.n_rows, self.n_cols
        if self.A.size and self.A.shape != (m, n):
            raise LpFormatError(
                f"matrix shape {self.A.shape} does not match {m} rows x {n} cols"
            )
        if len(self.b) != m or len(self.senses) != m:
            raise LpFormatError("rhs/senses length does not match row count")
        for s in self.senses:
            if s not in _SENSES:
                raise LpFormatError(f"unknown row sense {s!r}")
        if len(self.lb) != n or len(self.ub) != n:
            raise LpFormatError("bound length does not match column count")
        if np.any(self.lb > self.ub + 1e-12):
            j = int(np.argmax(self.lb - self.ub))
            raise LpFormatError(f"column {self.col_names[j]} has lb > ub")
        if len(self.row_names) != m or len(self.col_names) != n:
            raise LpFormatError("name tag length mismatch")
        for arr, what in ((self.c, "objective"), (self.b, "rhs"), (self.A, "matrix")):
            if arr.size and not np.all(np.isfinite(arr)):
                raise LpFormatError(f"non-finite entry in {what}")


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    duals: np.ndarray | None = None
    reduced_costs: np.ndarray | None = None
    objective: float = np.nan
    basis: Basis | None = None
    iterations: int = 0
    slacks: np.ndarray | None = field(default=None, repr=False)

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def extract_duals(sol: LpSolution):
    """Row duals and reduced costs of an optimal solution.

    Raises NotOptimalError when the solution carries no certified optimal
    basis (infeasible/unbounded outcomes have no meaningful duals).
    """
    if not sol.is_optimal:
        raise NotOptimalError(f"duals undefined for status {sol.status.value}")
    return sol.duals, sol.reduced_costs
