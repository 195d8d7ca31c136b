# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False, language_level=3
"""Compiled twin of ``_core_py``: same bounded-variable two-phase simplex,
same deterministic pivot selection, C loops instead of numpy vector ops.

The matrix is held transposed (columns contiguous) because the inner loop
is dominated by column fetches: pricing reads every column against the
duals and the ratio test reads the entering column.  The pivot loop runs
without the GIL so per-sample LP solves can fan out across threads.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, isfinite

cnp.import_array()

DEF AT_LB = 0
DEF AT_UB = 1
DEF BASIC = 2
DEF NB_FREE = 3

OPTIMAL, INFEASIBLE, UNBOUNDED, ITER_LIMIT, NUMERICAL = 0, 1, 2, 3, 4

DEF C_OPTIMAL = 0
DEF C_INFEASIBLE = 1
DEF C_UNBOUNDED = 2
DEF C_ITER_LIMIT = 3
DEF C_NUMERICAL = 4

DEF REFACTOR_EVERY = 100


cdef int _invert_into(double[:, ::1] src, double[:, ::1] out, double[:, ::1] work,
                      Py_ssize_t m, double tol) noexcept nogil:
    """Gauss-Jordan inverse of src (m x m) into out; 1 on success."""
    cdef Py_ssize_t i, j, k, p
    cdef double piv, f
    for i in range(m):
        for j in range(m):
            work[i, j] = src[i, j]
            work[i, m + j] = 1.0 if i == j else 0.0
    for k in range(m):
        p = k
        piv = fabs(work[k, k])
        for i in range(k + 1, m):
            if fabs(work[i, k]) > piv:
                piv = fabs(work[i, k])
                p = i
        if piv < tol:
            return 0
        if p != k:
            for j in range(2 * m):
                f = work[k, j]
                work[k, j] = work[p, j]
                work[p, j] = f
        piv = work[k, k]
        for j in range(2 * m):
            work[k, j] /= piv
        for i in range(m):
            if i != k and work[i, k] != 0.0:
                f = work[i, k]
                for j in range(2 * m):
                    work[i, j] -= f * work[k, j]
    for i in range(m):
        for j in range(m):
            out[i, j] = work[i, m + j]
    return 1


cdef void _recompute_basics(double[:, ::1] AT, double[::1] b, double[:, ::1] binv,
                            long long[::1] basis, signed char[::1] vstat,
                            double[::1] xval, double[::1] scratch_m,
                            Py_ssize_t m, Py_ssize_t ncols) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double v, s
    for i in range(m):
        scratch_m[i] = b[i]
    for j in range(ncols):
        if vstat[j] != BASIC:
            v = xval[j]
            if v != 0.0:
                for i in range(m):
                    scratch_m[i] -= AT[j, i] * v
    for i in range(m):
        s = 0.0
        for j in range(m):
            s += binv[i, j] * scratch_m[j]
        xval[basis[i]] = s


cdef int _refactorize(double[:, ::1] AT, double[::1] b, double[:, ::1] binv,
                      double[:, ::1] bmat, double[:, ::1] work,
                      long long[::1] basis, signed char[::1] vstat,
                      double[::1] xval, double[::1] scratch_m,
                      Py_ssize_t m, Py_ssize_t ncols) noexcept nogil:
    cdef Py_ssize_t i, k
    for k in range(m):
        for i in range(m):
            bmat[i, k] = AT[basis[k], i]
    if not _invert_into(bmat, binv, work, m, 1e-11):
        return 0
    _recompute_basics(AT, b, binv, basis, vstat, xval, scratch_m, m, ncols)
    return 1


cdef int _run_phase(double[:, ::1] AT, double[::1] b, double[::1] cost,
                    double[::1] lb, double[::1] ub,
                    double[::1] xval, signed char[::1] vstat,
                    long long[::1] basis, double[:, ::1] binv,
                    double[::1] y, double[::1] alpha, double[::1] ratios,
                    double[:, ::1] bmat, double[:, ::1] work, double[::1] scratch_m,
                    Py_ssize_t m, Py_ssize_t ncols,
                    long max_iter, double pivot_tol, long bland_after,
                    int phase, long* iters) noexcept nogil:
    cdef Py_ssize_t i, j, e, leave, v_out
    cdef long degenerate_run = 0, since_refactor = 0
    cdef bint bland = False
    cdef double dj, mj, best_merit, de, direction, t, t_own, t_row, span
    cdef double delta, xv, piv, f, amax, tie
    cdef long long bi_min

    while True:
        if iters[0] >= max_iter:
            return C_ITER_LIMIT
        # duals of the current basis: y = binv^T c_B
        for i in range(m):
            y[i] = 0.0
        for i in range(m):
            f = cost[basis[i]]
            if f != 0.0:
                for j in range(m):
                    y[j] += binv[i, j] * f
        # pricing: most negative merit wins, ties to the lowest index
        e = -1
        best_merit = -pivot_tol
        for j in range(ncols):
            if vstat[j] == BASIC or ub[j] - lb[j] <= 0.0:
                continue
            dj = cost[j]
            for i in range(m):
                dj -= y[i] * AT[j, i]
            if vstat[j] == AT_LB:
                mj = dj
            elif vstat[j] == AT_UB:
                mj = -dj
            else:
                mj = -fabs(dj)
            if mj < best_merit:
                best_merit = mj
                e = j
                if bland:
                    break
        if e < 0:
            return C_OPTIMAL
        de = cost[e]
        for i in range(m):
            de -= y[i] * AT[e, i]
        if vstat[e] == AT_LB:
            direction = 1.0
        elif vstat[e] == AT_UB:
            direction = -1.0
        else:
            direction = 1.0 if de < 0.0 else -1.0

        for i in range(m):
            f = 0.0
            for j in range(m):
                f += binv[i, j] * AT[e, j]
            alpha[i] = f

        t_row = INFINITY
        for i in range(m):
            delta = -direction * alpha[i]
            xv = xval[basis[i]]
            if delta < -pivot_tol:
                if isfinite(lb[basis[i]]):
                    f = (xv - lb[basis[i]]) / (-delta)
                    ratios[i] = f if f > 0.0 else 0.0
                else:
                    ratios[i] = INFINITY
            elif delta > pivot_tol:
                if isfinite(ub[basis[i]]):
                    f = (ub[basis[i]] - xv) / delta
                    ratios[i] = f if f > 0.0 else 0.0
                else:
                    ratios[i] = INFINITY
            else:
                ratios[i] = INFINITY
            if ratios[i] < t_row:
                t_row = ratios[i]
        span = ub[e] - lb[e]
        t_own = span if isfinite(span) else INFINITY

        leave = -1
        if t_row < INFINITY:
            tie = t_row + 1e-9 * (1.0 + t_row)
            if bland:
                bi_min = -1
                for i in range(m):
                    if ratios[i] <= tie and (bi_min < 0 or basis[i] < bi_min):
                        bi_min = basis[i]
                        leave = i
            else:
                amax = -1.0
                for i in range(m):
                    if ratios[i] <= tie and fabs(alpha[i]) > amax:
                        amax = fabs(alpha[i])
                        leave = i
        t = t_own if t_own < t_row else t_row
        if t == INFINITY:
            return C_UNBOUNDED if phase == 2 else C_NUMERICAL
        iters[0] += 1
        if t <= 1e-9:
            degenerate_run += 1
            if degenerate_run > bland_after:
                bland = True
        else:
            degenerate_run = 0
            bland = False
        if t_own <= t_row:
            for i in range(m):
                xval[basis[i]] -= t * direction * alpha[i]
            if vstat[e] == AT_LB:
                vstat[e] = AT_UB
                xval[e] = ub[e]
            else:
                vstat[e] = AT_LB
                xval[e] = lb[e]
            continue
        v_out = basis[leave]
        for i in range(m):
            xval[basis[i]] -= t * direction * alpha[i]
        xval[e] = xval[e] + t * direction
        if -direction * alpha[leave] < 0.0:
            vstat[v_out] = AT_LB
            xval[v_out] = lb[v_out]
        else:
            vstat[v_out] = AT_UB
            xval[v_out] = ub[v_out]
        vstat[e] = BASIC
        basis[leave] = e
        piv = alpha[leave]
        for j in range(m):
            binv[leave, j] /= piv
        for i in range(m):
            if i != leave:
                f = alpha[i]
                if f != 0.0:
                    for j in range(m):
                        binv[i, j] -= f * binv[leave, j]
        since_refactor += 1
        if since_refactor >= REFACTOR_EVERY:
            since_refactor = 0
            if not _refactorize(AT, b, binv, bmat, work, basis, vstat, xval,
                                scratch_m, m, ncols):
                return C_NUMERICAL


cdef void _pivot_out_artificials(double[:, ::1] AT, long long[::1] basis,
                                 signed char[::1] vstat, double[::1] xval,
                                 double[:, ::1] binv, double[::1] alpha,
                                 Py_ssize_t m, Py_ssize_t n,
                                 double pivot_tol) noexcept nogil:
    cdef Py_ssize_t r, j, i, pick
    cdef long long art
    cdef double v, piv, f
    for r in range(m):
        if basis[r] < n:
            continue
        pick = -1
        for j in range(n):
            if vstat[j] == BASIC:
                continue
            v = 0.0
            for i in range(m):
                v += binv[r, i] * AT[j, i]
            if fabs(v) > 100.0 * pivot_tol:
                pick = j
                break
        if pick < 0:
            continue
        art = basis[r]
        for i in range(m):
            f = 0.0
            for j in range(m):
                f += binv[i, j] * AT[pick, j]
            alpha[i] = f
        piv = alpha[r]
        for j in range(m):
            binv[r, j] /= piv
        for i in range(m):
            if i != r:
                f = alpha[i]
                if f != 0.0:
                    for j in range(m):
                        binv[i, j] -= f * binv[r, j]
        basis[r] = pick
        vstat[pick] = BASIC
        vstat[art] = AT_LB
        xval[art] = 0.0


def solve_core(A, b, c, lb, ub, c_report, basis0=None, at_upper0=None,
               long max_iter=20000, double pivot_tol=1e-9, double feas_tol=1e-7,
               long bland_after=50):
    """Same contract as ``_core_py.solve_core``."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2] A_ = np.ascontiguousarray(A, dtype=np.float64)
    cdef Py_ssize_t m = A_.shape[0], n = A_.shape[1], ncols = n + m
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b_ = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] lb_ = np.concatenate(
        [np.asarray(lb, dtype=np.float64), np.zeros(m)])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ub_ = np.concatenate(
        [np.asarray(ub, dtype=np.float64), np.full(m, np.inf)])
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cost = np.empty(ncols, dtype=np.float64)

    # canonical cold-start point fixes the artificial signs (see _core_py)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x0 = np.where(
        np.isfinite(lb_[:n]), lb_[:n], np.where(np.isfinite(ub_[:n]), ub_[:n], 0.0))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] resid = b_ - A_ @ x0 if n else b_.copy()
    cdef cnp.ndarray[cnp.float64_t, ndim=1] signs = np.where(resid >= 0.0, 1.0, -1.0)

    # transposed storage: AT[j] is column j of the extended matrix
    cdef cnp.ndarray[cnp.float64_t, ndim=2] AT = np.empty((ncols, m), dtype=np.float64)
    AT[:n] = A_.T
    AT[n:] = np.diag(signs)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] xval = np.zeros(ncols, dtype=np.float64)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] vstat = np.zeros(ncols, dtype=np.int8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] basis = np.empty(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] binv = np.zeros((m, m), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] bmat = np.zeros((m, m), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] work = np.zeros((m, 2 * m), dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] alpha = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ratios = np.zeros(m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] scratch_m = np.zeros(m, dtype=np.float64)

    cdef double scale = 1.0 + (np.max(np.abs(b_)) if m else 0.0)
    cdef bint warm_ok = False
    cdef long iters = 0
    cdef int code
    cdef Py_ssize_t i, j

    # bind memoryviews while holding the GIL; the nogil calls below must
    # not trigger buffer acquisition
    cdef double[:, ::1] AT_mv = AT
    cdef double[::1] b_mv = b_
    cdef double[::1] lb_mv = lb_
    cdef double[::1] ub_mv = ub_
    cdef double[::1] cost_mv = cost
    cdef double[::1] xval_mv = xval
    cdef signed char[::1] vstat_mv = vstat
    cdef long long[::1] basis_mv = basis
    cdef double[:, ::1] binv_mv = binv
    cdef double[:, ::1] bmat_mv = bmat
    cdef double[:, ::1] work_mv = work
    cdef double[::1] y_mv = y
    cdef double[::1] alpha_mv = alpha
    cdef double[::1] ratios_mv = ratios
    cdef double[::1] scratch_mv = scratch_m

    if basis0 is not None:
        warm_ok = _try_warm(AT, b_, lb_, ub_, xval, vstat, basis, binv, bmat, work,
                            scratch_m, np.asarray(basis0, dtype=np.int64),
                            np.asarray(at_upper0 if at_upper0 is not None else (),
                                       dtype=np.int64),
                            m, n, feas_tol * scale)
    if not warm_ok:
        binv.fill(0.0)  # a rejected warm attempt may have written into it
        for j in range(n):
            if np.isfinite(lb_[j]):
                vstat[j] = AT_LB
                xval[j] = lb_[j]
            elif np.isfinite(ub_[j]):
                vstat[j] = AT_UB
                xval[j] = ub_[j]
            else:
                vstat[j] = NB_FREE
                xval[j] = 0.0
        for i in range(m):
            basis[i] = n + i
            vstat[n + i] = BASIC
            xval[n + i] = abs(resid[i])
            binv[i, i] = signs[i]
        cost[:n] = 0.0
        cost[n:] = 1.0
        with nogil:
            code = _run_phase(AT_mv, b_mv, cost_mv, lb_mv, ub_mv, xval_mv, vstat_mv,
                              basis_mv, binv_mv, y_mv, alpha_mv, ratios_mv, bmat_mv,
                              work_mv, scratch_mv, m, ncols, max_iter, pivot_tol,
                              bland_after, 1, &iters)
        if code != C_OPTIMAL:
            return code, None, None, None, None, None, iters
        if float(np.sum(xval[n:])) > feas_tol * scale:
            return INFEASIBLE, None, None, None, None, None, iters
        with nogil:
            _pivot_out_artificials(AT_mv, basis_mv, vstat_mv, xval_mv, binv_mv,
                                   alpha_mv, m, n, pivot_tol)

    lb_[n:] = 0.0
    ub_[n:] = 0.0
    cost[:n] = np.asarray(c, dtype=np.float64)
    cost[n:] = 0.0
    with nogil:
        code = _run_phase(AT_mv, b_mv, cost_mv, lb_mv, ub_mv, xval_mv, vstat_mv,
                          basis_mv, binv_mv, y_mv, alpha_mv, ratios_mv, bmat_mv,
                          work_mv, scratch_mv, m, ncols, max_iter, pivot_tol,
                          bland_after, 2, &iters)
    if code != C_OPTIMAL:
        return code, None, None, None, None, None, iters

    cost[:n] = np.asarray(c_report, dtype=np.float64)
    cost[n:] = 0.0
    ydual = np.zeros(m, dtype=np.float64)
    for i in range(m):
        f = cost[basis[i]]
        if f != 0.0:
            ydual += binv[i] * f
    d = np.asarray(c_report, dtype=np.float64) - AT[:n] @ ydual
    x = xval[:n].copy()
    at_upper = np.flatnonzero(vstat[:n] == AT_UB).astype(np.int64)
    return OPTIMAL, x, ydual, d, basis.copy(), at_upper, iters


cdef bint _try_warm(double[:, ::1] AT, double[::1] b, double[::1] lb, double[::1] ub,
                    double[::1] xval, signed char[::1] vstat, long long[::1] basis,
                    double[:, ::1] binv, double[:, ::1] bmat, double[:, ::1] work,
                    double[::1] scratch_m, cnp.ndarray basis0_arr, cnp.ndarray atup_arr,
                    Py_ssize_t m, Py_ssize_t n, double feas_slack):
    cdef long long[::1] basis0 = basis0_arr
    cdef Py_ssize_t i, j
    if basis0_arr.shape[0] != m:
        return False
    seen = set()
    for i in range(m):
        if basis0[i] < 0 or basis0[i] >= n or basis0[i] in seen:
            return False
        seen.add(basis0[i])
    upset = set(int(v) for v in atup_arr)
    for j in range(n + m):
        if j < n and j in upset and isfinite(ub[j]):
            vstat[j] = AT_UB
            xval[j] = ub[j]
        elif isfinite(lb[j]):
            vstat[j] = AT_LB
            xval[j] = lb[j]
        elif isfinite(ub[j]):
            vstat[j] = AT_UB
            xval[j] = ub[j]
        else:
            vstat[j] = NB_FREE
            xval[j] = 0.0
    for i in range(m):
        basis[i] = basis0[i]
        vstat[basis0[i]] = BASIC
        xval[basis0[i]] = 0.0
    with nogil:
        for i in range(m):
            for j in range(m):
                bmat[j, i] = AT[basis[i], j]
        if not _invert_into(bmat, binv, work, m, 1e-11):
            return False
        _recompute_basics(AT, b, binv, basis, vstat, xval, scratch_m, m, n + m)
    for i in range(m):
        j = basis[i]
        if xval[j] < lb[j] - feas_slack or xval[j] > ub[j] + feas_slack:
            return False
    return True
