"""Bounded-variable two-phase primal simplex, pure numpy backend.

Operates on the equality form  min c.x  s.t.  A x = b,  lb <= x <= ub
(slack columns already appended by the caller).  Artificial columns are
managed internally.  The compiled backend in ``_core_cy`` implements the
same algorithm with identical pivot selection rules; both must stay
deterministic: every tie is broken by the lowest index.

Status codes: 0 optimal, 1 infeasible, 2 unbounded, 3 iteration limit,
4 numerical failure (caller decides how to surface it).
"""

from __future__ import annotations

import numpy as np

AT_LB, AT_UB, BASIC, NB_FREE = 0, 1, 2, 3

OPTIMAL, INFEASIBLE, UNBOUNDED, ITER_LIMIT, NUMERICAL = 0, 1, 2, 3, 4

_REFACTOR_EVERY = 100


def _invert(B, tol=1e-11):
    """Gauss-Jordan inverse with partial pivoting; None when singular."""
    m = B.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    work = np.hstack([B.astype(float), np.eye(m)])
    for k in range(m):
        p = k + int(np.argmax(np.abs(work[k:, k])))
        if abs(work[p, k]) < tol:
            return None
        if p != k:
            work[[k, p]] = work[[p, k]]
        work[k] /= work[k, k]
        for i in range(m):
            if i != k and work[i, k] != 0.0:
                work[i] -= work[i, k] * work[k]
    return work[:, m:]


def _nearest_bound_status(lo, hi):
    if np.isfinite(lo):
        return AT_LB, lo
    if np.isfinite(hi):
        return AT_UB, hi
    return NB_FREE, 0.0


class _State:
    """Mutable solver state over the artificial-extended column space."""

    def __init__(self, A, b, lb, ub):
        m, n = A.shape
        self.m, self.n = m, n
        self.b = b
        # artificial signs fixed from the canonical cold-start residual so
        # the extended matrix is identical for warm and cold paths
        x0 = np.empty(n)
        for j in range(n):
            _, x0[j] = _nearest_bound_status(lb[j], ub[j])
        resid = b - A @ x0 if n else b.copy()
        signs = np.where(resid >= 0.0, 1.0, -1.0)
        self.A = np.hstack([A, np.diag(signs)]) if m else A.copy()
        self.lb = np.concatenate([lb, np.zeros(m)])
        self.ub = np.concatenate([ub, np.full(m, np.inf)])
        self.x0 = x0
        self.resid_abs = np.abs(resid)
        self.xval = np.zeros(n + m)
        self.vstat = np.zeros(n + m, dtype=np.int8)
        self.basis = np.zeros(m, dtype=np.int64)
        self.binv = np.zeros((m, m))
        self.iters = 0

    def cold_start(self):
        n, m = self.n, self.m
        self.xval[:n] = self.x0
        for j in range(n):
            st, _ = _nearest_bound_status(self.lb[j], self.ub[j])
            self.vstat[j] = st
        self.xval[n:] = self.resid_abs
        self.vstat[n:] = BASIC
        self.basis = np.arange(n, n + m, dtype=np.int64)
        # the artificial block is diag(+-1), which is its own inverse
        self.binv = np.diag(np.diag(self.A[:, n:])) if m else np.zeros((0, 0))

    def try_warm_start(self, basis0, at_upper0, feas_slack):
        n, m = self.n, self.m
        basis0 = np.asarray(basis0, dtype=np.int64)
        if basis0.shape != (m,) or len(np.unique(basis0)) != m:
            return False
        if np.any(basis0 < 0) or np.any(basis0 >= n):
            return False
        binv = _invert(self.A[:, basis0])
        if binv is None:
            return False
        upset = set(int(j) for j in at_upper0)
        self.vstat[:] = AT_LB
        for j in range(n):
            if j in upset and np.isfinite(self.ub[j]):
                self.vstat[j], self.xval[j] = AT_UB, self.ub[j]
            else:
                self.vstat[j], self.xval[j] = _nearest_bound_status(self.lb[j], self.ub[j])
        self.vstat[n:] = AT_LB
        self.xval[n:] = 0.0
        self.vstat[basis0] = BASIC
        self.xval[basis0] = 0.0
        xb = binv @ (self.b - self.A @ self.xval)
        if np.any(xb < self.lb[basis0] - feas_slack) or np.any(
            xb > self.ub[basis0] + feas_slack
        ):
            return False
        self.basis = basis0.copy()
        self.binv = binv
        self.xval[basis0] = xb
        return True

    def refactorize(self):
        binv = _invert(self.A[:, self.basis])
        if binv is None:
            return False
        self.binv = binv
        nb_mask = self.vstat != BASIC
        xn = np.where(nb_mask, self.xval, 0.0)
        self.binv = binv
        xb = binv @ (self.b - self.A @ xn)
        self.xval[self.basis] = xb
        return True


def _run_phase(st, cost, max_iter, pivot_tol, feas_tol, bland_after, phase):
    """Pivot until optimal for `cost`; returns a status code."""
    A, lb, ub = st.A, st.lb, st.ub
    degenerate_run = 0
    bland = False
    since_refactor = 0
    while True:
        if st.iters >= max_iter:
            return ITER_LIMIT
        cb = cost[st.basis]
        y = st.binv.T @ cb
        d = cost - A.T @ y
        nb = st.vstat != BASIC
        movable = nb & (ub - lb > 0.0)
        merit = np.zeros(len(cost))
        at_lb = movable & (st.vstat == AT_LB)
        at_ub = movable & (st.vstat == AT_UB)
        free = movable & (st.vstat == NB_FREE)
        merit[at_lb] = d[at_lb]
        merit[at_ub] = -d[at_ub]
        merit[free] = -np.abs(d[free])
        merit[~movable] = np.inf
        if bland:
            cands = np.flatnonzero(movable & (merit < -pivot_tol))
            if cands.size == 0:
                return OPTIMAL
            e = int(cands[0])
        else:
            e = int(np.argmin(merit))
            if merit[e] >= -pivot_tol:
                return OPTIMAL
        de = d[e]
        if st.vstat[e] == AT_LB:
            direction = 1.0
        elif st.vstat[e] == AT_UB:
            direction = -1.0
        else:
            direction = 1.0 if de < 0 else -1.0

        alpha = st.binv @ A[:, e]
        bi = st.basis
        delta = -direction * alpha
        xb = st.xval[bi]
        ratios = np.full(st.m, np.inf)
        dec = delta < -pivot_tol
        inc = delta > pivot_tol
        lo_ok = dec & np.isfinite(lb[bi])
        hi_ok = inc & np.isfinite(ub[bi])
        ratios[lo_ok] = (xb[lo_ok] - lb[bi][lo_ok]) / (-delta[lo_ok])
        ratios[hi_ok] = (ub[bi][hi_ok] - xb[hi_ok]) / delta[hi_ok]
        ratios = np.maximum(ratios, 0.0)
        span = ub[e] - lb[e]
        t_own = span if np.isfinite(span) else np.inf

        t_row = np.inf
        leave = -1
        if st.m and np.any(np.isfinite(ratios)):
            t_row = float(np.min(ratios))
            close = np.flatnonzero(ratios <= t_row + 1e-9 * (1.0 + t_row))
            if bland:
                leave = int(close[np.argmin(bi[close])])
            else:
                leave = int(close[np.argmax(np.abs(alpha[close]))])
        t = min(t_own, t_row)
        if not np.isfinite(t):
            return UNBOUNDED if phase == 2 else NUMERICAL
        st.iters += 1
        if t <= 1e-9:
            degenerate_run += 1
            if degenerate_run > bland_after:
                bland = True
        else:
            degenerate_run = 0
            bland = False
        if t_own <= t_row:
            # bound flip: the entering column traverses its whole range
            st.xval[bi] = xb - t * direction * alpha
            if st.vstat[e] == AT_LB:
                st.vstat[e], st.xval[e] = AT_UB, ub[e]
            else:
                st.vstat[e], st.xval[e] = AT_LB, lb[e]
            continue
        v_out = int(bi[leave])
        st.xval[bi] = xb - t * direction * alpha
        st.xval[e] = st.xval[e] + t * direction
        if delta[leave] < 0:
            st.vstat[v_out], st.xval[v_out] = AT_LB, lb[v_out]
        else:
            st.vstat[v_out], st.xval[v_out] = AT_UB, ub[v_out]
        st.vstat[e] = BASIC
        st.basis[leave] = e
        piv = alpha[leave]
        row = st.binv[leave] / piv
        st.binv -= np.outer(alpha, row)
        st.binv[leave] = row
        since_refactor += 1
        if since_refactor >= _REFACTOR_EVERY:
            since_refactor = 0
            if not st.refactorize():
                return NUMERICAL


def solve_core(
    A,
    b,
    c,
    lb,
    ub,
    c_report,
    basis0=None,
    at_upper0=(),
    max_iter=20000,
    pivot_tol=1e-9,
    feas_tol=1e-7,
    bland_after=50,
):
    """Solve the equality-form LP; see module docstring for codes.

    Returns (code, x, y, d, basis, at_upper, iterations) where y and d are
    the row duals / reduced costs computed against ``c_report`` (the
    unperturbed objective) from the final basis.
    """
    A = np.ascontiguousarray(A, dtype=float)
    m, n = A.shape
    st = _State(A, np.asarray(b, float), np.asarray(lb, float), np.asarray(ub, float))
    scale = 1.0 + (np.max(np.abs(b)) if m else 0.0)

    warm_ok = False
    if basis0 is not None:
        warm_ok = st.try_warm_start(basis0, at_upper0, feas_tol * scale)
    if not warm_ok:
        st.cold_start()
        c1 = np.concatenate([np.zeros(n), np.ones(m)])
        code = _run_phase(st, c1, max_iter, pivot_tol, feas_tol, bland_after, phase=1)
        if code != OPTIMAL:
            return code, None, None, None, None, None, st.iters
        infeas = float(np.sum(st.xval[n:]))
        if infeas > feas_tol * scale:
            return INFEASIBLE, None, None, None, None, None, st.iters
        _pivot_out_artificials(st, pivot_tol)
    # artificials are frozen at zero for phase 2
    st.ub[n:] = 0.0
    st.lb[n:] = 0.0
    c2 = np.concatenate([np.asarray(c, float), np.zeros(m)])
    code = _run_phase(st, c2, max_iter, pivot_tol, feas_tol, bland_after, phase=2)
    if code != OPTIMAL:
        return code, None, None, None, None, None, st.iters

    cr = np.concatenate([np.asarray(c_report, float), np.zeros(m)])
    y = st.binv.T @ cr[st.basis]
    d_all = cr - st.A.T @ y
    x = st.xval[:n].copy()
    at_upper = np.flatnonzero(st.vstat[:n] == AT_UB).astype(np.int64)
    return OPTIMAL, x, y, d_all[:n], st.basis.copy(), at_upper, st.iters


def _pivot_out_artificials(st, pivot_tol):
    """Replace basic artificials by structural columns where possible."""
    n = st.n
    for r in range(st.m):
        if st.basis[r] < n:
            continue
        row = st.binv[r] @ st.A[:, :n]
        pick = -1
        for j in range(n):
            if st.vstat[j] != BASIC and abs(row[j]) > 100 * pivot_tol:
                pick = j
                break
        if pick < 0:
            # dependent row: freeze the artificial in the basis at zero
            continue
        art = st.basis[r]
        alpha = st.binv @ st.A[:, pick]
        piv = alpha[r]
        new_row = st.binv[r] / piv
        st.binv -= np.outer(alpha, new_row)
        st.binv[r] = new_row
        st.basis[r] = pick
        st.vstat[pick] = BASIC
        st.vstat[art] = AT_LB
        # the swap happens at a degenerate point: values are unchanged
        st.xval[art] = 0.0
