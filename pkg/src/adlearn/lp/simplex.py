"""Public LP interface: equality-form conversion, backend dispatch, duals.

The hot pivot loop lives in a compiled Cython module when available and in
``_core_py`` otherwise; both implement the identical algorithm.  Select
explicitly with ``solve(..., backend="python"|"cython")`` or the
``ADLEARN_LP_BACKEND`` environment variable; default is the compiled core
when importable.
"""

from __future__ import annotations

import os

import numpy as np

from . import _core_py
from .model import (
    EQ,
    GE,
    LE,
    Basis,
    IterationLimitError,
    LinearProgram,
    LpError,
    LpSolution,
    LpStatus,
    PerturbationPolicy,
)

try:
    from . import _core_cy

    _HAVE_CY = True
except ImportError:  # pragma: no cover - depends on the build
    _core_cy = None
    _HAVE_CY = False

DEFAULT_MAX_ITERS = 20000
PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
BLAND_AFTER = 50

_STATUS_BY_CODE = {
    _core_py.OPTIMAL: LpStatus.OPTIMAL,
    _core_py.INFEASIBLE: LpStatus.INFEASIBLE,
    _core_py.UNBOUNDED: LpStatus.UNBOUNDED,
}


def cython_backend_available() -> bool:
    return _HAVE_CY


def active_backend(backend: str | None = None) -> str:
    choice = backend or os.environ.get("ADLEARN_LP_BACKEND", "auto")
    if choice == "auto":
        return "cython" if _HAVE_CY else "python"
    if choice not in ("python", "cython"):
        raise ValueError(f"unknown LP backend {choice!r}")
    if choice == "cython" and not _HAVE_CY:
        raise LpError("compiled LP core requested but not built")
    return choice


def _core(backend: str | None):
    return _core_cy if active_backend(backend) == "cython" else _core_py


class Standardized:
    """Equality form of a LinearProgram: slack columns appended per
    inequality row, original column order preserved."""

    __slots__ = ("A", "b", "c", "lb", "ub", "n_struct", "slack_of_row")

    def __init__(self, lp: LinearProgram):
        m, n = lp.n_rows, lp.n_cols
        n_slack = sum(1 for s in lp.senses if s != EQ)
        A = np.zeros((m, n + n_slack))
        if lp.A.size:
            A[:, :n] = lp.A
        lb = np.concatenate([lp.lb, np.zeros(n_slack)])
        ub = np.concatenate([lp.ub, np.full(n_slack, np.inf)])
        slack_of_row = np.full(m, -1, dtype=np.int64)
        k = n
        for i, s in enumerate(lp.senses):
            if s == LE:
                A[i, k] = 1.0
                slack_of_row[i] = k
                k += 1
            elif s == GE:
                A[i, k] = -1.0
                slack_of_row[i] = k
                k += 1
        self.A = A
        self.b = lp.b.astype(float)
        self.c = np.concatenate([lp.c, np.zeros(n_slack)])
        self.lb = lb
        self.ub = ub
        self.n_struct = n
        self.slack_of_row = slack_of_row


class Template:
    """Repeated re-solves of one LP structure with fresh rhs/bounds.

    Standardizes once and calls the backend core directly, skipping
    construction and validation on the hot path.  ``resolve`` accepts
    bound overrides either for the structural columns only or for the full
    slack-extended column space."""

    def __init__(self, lp: LinearProgram, perturb: PerturbationPolicy | None = None,
                 backend: str | None = None):
        perturb = perturb or PerturbationPolicy.none()
        self.lp = lp
        self.std = Standardized(lp)
        self.c_pivot = self.std.c.copy()
        self.c_pivot[: lp.n_cols] += perturb.offsets(lp.n_cols)
        self._core = _core(backend)

    def resolve(self, b, lb=None, ub=None, warm=None, max_iter=DEFAULT_MAX_ITERS):
        """Returns ``(code, x_ext, objective, (basis, at_upper), duals)``;
        ``x_ext`` covers the slack-extended column space.  Callers decide
        what non-optimal status codes mean."""
        std = self.std
        lb_e, ub_e = std.lb, std.ub
        if lb is not None:
            lb_e = std.lb.copy()
            lb_e[: len(lb)] = lb
        if ub is not None:
            ub_e = std.ub.copy()
            ub_e[: len(ub)] = ub
        basis0, at_up0 = warm if warm is not None else (None, _EMPTY_IDX)
        code, x, y, d, basis, at_upper, iters = self._core.solve_core(
            std.A, np.asarray(b, float), self.c_pivot, lb_e, ub_e, std.c,
            basis0, at_up0, max_iter, PIVOT_TOL, FEAS_TOL, BLAND_AFTER,
        )
        if code == _core_py.ITER_LIMIT:
            raise IterationLimitError(f"no terminal status after {iters} pivots")
        if code == _core_py.NUMERICAL:
            raise LpError("numerical failure in simplex core")
        if code != _core_py.OPTIMAL:
            return code, None, np.nan, None, None
        n = self.lp.n_cols
        return 0, x, float(std.c @ x), (basis, at_upper), y


_EMPTY_IDX = np.zeros(0, dtype=np.int64)


def solve(
    lp: LinearProgram,
    warm: Basis | None = None,
    perturb: PerturbationPolicy | None = None,
    max_iters: int = DEFAULT_MAX_ITERS,
    backend: str | None = None,
) -> LpSolution:
    """Two-phase primal simplex with optional warm basis and deterministic
    objective perturbation.

    The perturbation applies to the pivoting objective only; the reported
    objective, duals and reduced costs always come from the original costs.
    A supplied warm basis is used when it is still primal feasible for the
    given rhs, otherwise the solve silently falls back to a cold start.
    """
    perturb = perturb or PerturbationPolicy.none()
    std = Standardized(lp)
    c_pivot = std.c.copy()
    c_pivot[: lp.n_cols] += perturb.offsets(lp.n_cols)

    basis0 = at_up0 = None
    if warm is not None:
        basis0 = np.asarray(warm.basic, dtype=np.int64)
        at_up0 = np.asarray(warm.at_upper, dtype=np.int64)

    core = _core(backend)
    code, x_ext, y, d_ext, basis, at_upper, iters = core.solve_core(
        std.A,
        std.b,
        c_pivot,
        std.lb,
        std.ub,
        std.c,
        basis0,
        at_up0 if at_up0 is not None else np.zeros(0, dtype=np.int64),
        max_iters,
        PIVOT_TOL,
        FEAS_TOL,
        BLAND_AFTER,
    )
    if code == _core_py.ITER_LIMIT:
        raise IterationLimitError(f"no terminal status after {iters} pivots")
    if code == _core_py.NUMERICAL:
        raise LpError("numerical failure in simplex core")
    status = _STATUS_BY_CODE[code]
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status=status, iterations=iters)

    n = lp.n_cols
    x = x_ext[:n]
    obj = float(lp.c @ x) + lp.objective_constant
    slacks = lp.b - (lp.A @ x if lp.A.size else np.zeros(lp.n_rows))
    return LpSolution(
        status=LpStatus.OPTIMAL,
        x=x,
        duals=y,
        reduced_costs=d_ext[:n],
        objective=obj,
        basis=Basis(tuple(int(j) for j in basis), tuple(int(j) for j in at_upper)),
        iterations=iters,
        slacks=slacks,
    )
