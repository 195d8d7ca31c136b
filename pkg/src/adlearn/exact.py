"""Exact estimation at desk scale: the single-level optimality-conditions
model of the bilevel estimator and a branch-and-bound over its
complementarity dichotomies, plus a big-M MILP export.

Per sample the model carries the planning problem's primal variables, its
stationarity system (duals for every row plus a multiplier per variable
bound), the assessment variables, and affine rows tying the forecast
outputs to the shared parameter vector.  Dropping the complementarity
pairs yields an LP whose value lower-bounds the estimator; each pair is a
dichotomy (inequality tight, or its multiplier zero) realized as an
upper-bound fixing on either the row's slack column or the multiplier
column, so node re-solves reuse the matrix untouched.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field

import numpy as np

from .forecast import ForecastSpec, ThetaVector, design_matrices, trainable_mask
from .lp.model import EQ, GE, LE, LinearProgram
from .lp import mps as mps_mod
from .lp.simplex import Template
from .netcase import SystemCase, incidence_maps


class ExactError(Exception):
    pass


class BigMError(ExactError):
    """Bound propagation failed to produce a finite big-M."""


class _Builder:
    def __init__(self):
        self.obj = []
        self.lb = []
        self.ub = []
        self.names = []
        self.rows = []
        self.senses = []
        self.rhs = []
        self.row_names = []

    def var(self, name, lb=0.0, ub=np.inf, obj=0.0):
        self.names.append(name)
        self.lb.append(lb)
        self.ub.append(ub)
        self.obj.append(obj)
        return len(self.names) - 1

    def vars(self, prefix, n, lb=0.0, ub=np.inf, obj=0.0):
        objv = np.broadcast_to(np.asarray(obj, float), (n,))
        ubv = np.broadcast_to(np.asarray(ub, float), (n,))
        lbv = np.broadcast_to(np.asarray(lb, float), (n,))
        return [self.var(f"{prefix}{i}", lbv[i], ubv[i], objv[i]) for i in range(n)]

    def row(self, coefs: dict, sense, rhs, name):
        self.rows.append(dict(coefs))
        self.senses.append(sense)
        self.rhs.append(rhs)
        self.row_names.append(name)
        return len(self.rows) - 1

    def lp(self) -> LinearProgram:
        n = len(self.names)
        A = np.zeros((len(self.rows), n))
        for i, coefs in enumerate(self.rows):
            for j, v in coefs.items():
                A[i, j] += v
        return LinearProgram(
            np.array(self.obj), A, list(self.senses), np.array(self.rhs),
            lb=np.array(self.lb), ub=np.array(self.ub),
            row_names=list(self.row_names), col_names=list(self.names),
        )


@dataclass
class KktInstance:
    lp: LinearProgram
    pairs: list  # (primal_col, dual_col, label); primal side -row -> slack
    pair_rows: list  # inequality row index for row pairs, -1 for bound pairs
    theta_cols: dict  # flat theta coordinate -> column
    spec: ForecastSpec
    theta_base: ThetaVector
    T: int
    meta: dict = field(default_factory=dict)

    def theta_from_x(self, x) -> ThetaVector:
        vals = self.theta_base.values.copy()
        for coord, col in self.theta_cols.items():
            vals[coord] = x[col]
        return ThetaVector(self.spec, vals)


def build_kkt(case: SystemCase, ptdf, spec: ForecastSpec, dataset,
              theta_base: ThetaVector, copper_plate: bool = False,
              theta_box: float = 1e3, pair_guard: int = 5000,
              t_indices=None) -> KktInstance:
    """Assemble the single-level model.

    ``theta_base`` supplies the values of non-trainable blocks; trainable
    coordinates become box-bounded model variables.  ``t_indices`` selects
    a subset of the dataset's samples (default: all).  Only copper-plate
    or PTDF-form networks are supported (matching the scheduling problem
    the search pipeline solves).
    """
    copper = copper_plate or case.n_lines == 0
    if not copper and ptdf is None:
        raise ExactError("networked model needs a PTDF")
    maps = incidence_maps(case)
    ng, nb, nz = case.n_gens, case.n_buses, case.n_zones
    samples = (list(range(dataset.T)) if t_indices is None
               else [int(i) for i in t_indices])
    T = len(samples)
    nlines = 0 if copper else case.n_lines
    n_w = 3 * ng + 2 * nb + 2 * nz
    n_ineq = 2 * ng + 2 * ng + 2 * nlines  # cap, foot, rcaps, network
    pairs_per_t = n_ineq + n_w
    if T * pairs_per_t > pair_guard:
        raise ExactError(
            f"instance too large: T*pairs = {T * pairs_per_t} > {pair_guard}"
        )

    X = design_matrices(spec, dataset)
    mask = trainable_mask(spec)
    offsets = spec.offsets()
    bld = _Builder()
    theta_cols = {}
    for b in spec.blocks:
        if not b.trainable:
            continue
        lo, hi = offsets[b.name]
        for k in range(b.size):
            theta_cols[lo + k] = bld.var(
                f"th_{b.name}_{k}", -theta_box, theta_box, 0.0
            )

    bi = case.bus_index()
    dem_pos = {b.key: bi[b.key] for b in spec.demand}
    data_pos = [bi[b] for b in dataset.bus_ids]
    c_act = case.gen_cost() / T
    pu_act = case.gen_p_up() / T
    pd_act = case.gen_p_dn() / T
    lam_ls_a = case.penalties.load_shed / T
    lam_sp_a = case.penalties.spill / T
    c_til = case.tilde_gen_cost()
    pu_til = case.tilde_gen_p_up()
    pd_til = case.tilde_gen_p_dn()
    cap_til = case.tilde_gen_capacity()
    rbar_up = case.gen_rbar_up()
    rbar_dn = case.gen_rbar_dn()
    lam_ls_t = case.tilde_load_shed
    lam_sp_t = case.tilde_spill
    lim_til = case.tilde_line_limits() if not copper else None
    lim_act = case.line_limits() if not copper else None
    B = None if copper else ptdf.B
    BM = None if copper else B @ maps.M
    M = maps.M
    N = maps.N

    pairs = []
    pair_rows = []
    box_hints = {}  # column -> (lo, hi) range valid at every inner optimum

    def forecast_range(block, t):
        """Interval of the block's affine output over the theta box."""
        lo, _ = offsets[block.name]
        row = X[block.name][t]
        mid = 0.0
        rad = 0.0
        for k in range(block.size):
            coord = lo + k
            if mask[coord]:
                rad += abs(row[k]) * theta_box
            else:
                mid += theta_base.values[coord] * row[k]
        return mid - rad, mid + rad

    def forecast_expr(block, t):
        """(coefficient dict over theta columns, constant) of the block's
        affine output at sample t."""
        lo, _ = offsets[block.name]
        row = X[block.name][t]
        coefs = {}
        const = 0.0
        for k in range(block.size):
            coord = lo + k
            if mask[coord]:
                coefs[theta_cols[coord]] = row[k]
            else:
                const += theta_base.values[coord] * row[k]
        return coefs, const

    for tt, t in enumerate(samples):
        # forecast outputs as variables tied to theta by equality rows;
        # constant blocks collapse to plain numbers
        dhat_bus_expr = {}  # bus position -> (col or None, const)
        for blk in spec.demand:
            coefs, const = forecast_expr(blk, t)
            if coefs:
                v = bld.var(f"dhat_b{blk.key}_t{tt}", -np.inf, np.inf)
                row = {v: 1.0}
                for cc, vv in coefs.items():
                    row[cc] = -vv
                bld.row(row, EQ, const, f"fc_{blk.name}_t{tt}")
                dhat_bus_expr[dem_pos[blk.key]] = (v, 0.0)
            else:
                dhat_bus_expr[dem_pos[blk.key]] = (None, const)
        dhat_lo = dhat_hi = 0.0
        for blk in spec.demand:
            lo_b, hi_b = forecast_range(blk, t)
            dhat_lo += lo_b
            dhat_hi += hi_b
            pos = dem_pos[blk.key]
            col = dhat_bus_expr[pos][0]
            if col is not None:
                box_hints[col] = (lo_b, hi_b)
        rhat_hi = {"up": [], "dn": []}
        rhat = {}
        for side, blocks in (("up", spec.rup), ("dn", spec.rdn)):
            vals = []
            for blk in blocks:
                coefs, const = forecast_expr(blk, t)
                if coefs:
                    v = bld.var(f"rhat_{side}_z{blk.key}_t{tt}", 0.0, np.inf)
                    row = {v: 1.0}
                    for cc, vv in coefs.items():
                        row[cc] = -vv
                    bld.row(row, EQ, const, f"fc_{blk.name}_t{tt}")
                    vals.append((v, 0.0))
                else:
                    vals.append((None, max(const, 0.0)))
            for blk in blocks:
                rhat_hi[side].append(max(forecast_range(blk, t)[1], 0.0))
            rhat[side] = vals

        # planning primal block
        g_h = bld.vars(f"gh_t{tt}_", ng)
        ru_h = bld.vars(f"ruh_t{tt}_", ng)
        rd_h = bld.vars(f"rdh_t{tt}_", ng)
        sh_h = bld.vars(f"shh_t{tt}_", nb)
        sp_h = bld.vars(f"sph_t{tt}_", nb)
        zu_h = bld.vars(f"zuh_t{tt}_", nz)
        zd_h = bld.vars(f"zdh_t{tt}_", nz)
        w_cols = g_h + ru_h + rd_h + sh_h + sp_h + zu_h + zd_h
        # ranges every inner optimum respects: shed never exceeds forecast
        # demand, spill never exceeds dispatchable energy plus negative
        # forecasts, requirement slack never exceeds the requirement
        shed_cap = max(0.0, dhat_hi)
        spill_cap = float(np.sum(cap_til)) + max(0.0, -dhat_lo)
        for c in sh_h:
            box_hints[c] = (0.0, shed_cap)
        for c in sp_h:
            box_hints[c] = (0.0, spill_cap)
        for z in range(nz):
            box_hints[zu_h[z]] = (0.0, rhat_hi["up"][z])
            box_hints[zd_h[z]] = (0.0, rhat_hi["dn"][z])
        w_cost = np.concatenate([
            c_til, pu_til, pd_til, np.full(nb, lam_ls_t), np.full(nb, lam_sp_t),
            np.full(nz, lam_ls_t), np.full(nz, lam_ls_t),
        ])
        # outer objective prices the planned reserves at actual prices
        for j in range(ng):
            bld.obj[ru_h[j]] += pu_act[j]
            bld.obj[rd_h[j]] += pd_act[j]

        eq_rows = []  # (row index, row coefficient dict over w cols)
        bal = {c: 1.0 for c in g_h}
        for c in sh_h:
            bal[c] = 1.0
        for c in sp_h:
            bal[c] = -1.0
        const = 0.0
        row = dict(bal)
        for pos, (col, cst) in dhat_bus_expr.items():
            if col is not None:
                row[col] = row.get(col, 0.0) - 1.0
            else:
                const += cst
        ridx = bld.row(row, EQ, const, f"pl_bal_t{tt}")
        eq_rows.append((ridx, bal))
        for z in range(nz):
            zrow = {}
            for j in range(ng):
                if N[z, j]:
                    zrow[ru_h[j]] = 1.0
            zrow[zu_h[z]] = 1.0
            col, cst = rhat["up"][z]
            row = dict(zrow)
            if col is not None:
                row[col] = -1.0
            ridx = bld.row(row, EQ, cst if col is None else 0.0, f"pl_zup{z}_t{tt}")
            eq_rows.append((ridx, zrow))
        for z in range(nz):
            zrow = {}
            for j in range(ng):
                if N[z, j]:
                    zrow[rd_h[j]] = 1.0
            zrow[zd_h[z]] = 1.0
            col, cst = rhat["dn"][z]
            row = dict(zrow)
            if col is not None:
                row[col] = -1.0
            ridx = bld.row(row, EQ, cst if col is None else 0.0, f"pl_zdn{z}_t{tt}")
            eq_rows.append((ridx, zrow))

        ineq_rows = []  # (row index, coefs over w, rhs)
        for j in range(ng):
            coefs = {g_h[j]: 1.0, ru_h[j]: 1.0}
            ridx = bld.row(coefs, LE, cap_til[j], f"pl_cap{j}_t{tt}")
            ineq_rows.append((ridx, coefs, cap_til[j]))
        for j in range(ng):
            coefs = {g_h[j]: -1.0, rd_h[j]: 1.0}
            ridx = bld.row(coefs, LE, 0.0, f"pl_foot{j}_t{tt}")
            ineq_rows.append((ridx, coefs, 0.0))
        for j in range(ng):
            coefs = {ru_h[j]: 1.0}
            ridx = bld.row(coefs, LE, rbar_up[j], f"pl_rcu{j}_t{tt}")
            ineq_rows.append((ridx, coefs, rbar_up[j]))
        for j in range(ng):
            coefs = {rd_h[j]: 1.0}
            ridx = bld.row(coefs, LE, rbar_dn[j], f"pl_rcd{j}_t{tt}")
            ineq_rows.append((ridx, coefs, rbar_dn[j]))
        if not copper:
            for k in range(nlines):
                base = {}
                for j in range(ng):
                    if BM[k, j]:
                        base[g_h[j]] = BM[k, j]
                for i in range(nb):
                    if B[k, i]:
                        base[sh_h[i]] = B[k, i]
                        base[sp_h[i]] = -B[k, i]
                for sign, tag in ((1.0, "hi"), (-1.0, "lo")):
                    coefs = {c: sign * v for c, v in base.items()}
                    rhs = lim_til[k]
                    row = dict(coefs)
                    for pos, (col, cst) in dhat_bus_expr.items():
                        coef = -sign * B[k, pos]
                        if col is not None:
                            row[col] = row.get(col, 0.0) + coef
                        else:
                            rhs -= coef * cst
                    ridx = bld.row(row, LE, rhs, f"pl_net{tag}{k}_t{tt}")
                    ineq_rows.append((ridx, coefs, rhs))

        # duals: alpha per equality row (free), beta per inequality (>=0),
        # nu per planning variable bound (>=0)
        alpha = [bld.var(f"al{r}_t{tt}", -np.inf, np.inf) for r, _ in enumerate(eq_rows)]
        beta = [bld.var(f"be{r}_t{tt}", 0.0, np.inf) for r, _ in enumerate(ineq_rows)]
        nu = [bld.var(f"nu{j}_t{tt}", 0.0, np.inf) for j in range(n_w)]
        w_index = {c: j for j, c in enumerate(w_cols)}
        stat = [dict() for _ in range(n_w)]
        for a_col, (_, coefs) in zip(alpha, eq_rows):
            for c, v in coefs.items():
                stat[w_index[c]][a_col] = v
        for b_col, (_, coefs, _) in zip(beta, ineq_rows):
            for c, v in coefs.items():
                stat[w_index[c]][b_col] = v
        for j in range(n_w):
            row = dict(stat[j])
            row[nu[j]] = -1.0
            bld.row(row, EQ, -w_cost[j], f"st{j}_t{tt}")

        for j, c in enumerate(w_cols):
            pairs.append((c, nu[j], f"bnd{j}_t{tt}"))
            pair_rows.append(-1)
        for b_col, (ridx, _, _) in zip(beta, ineq_rows):
            pairs.append((-1, b_col, bld.row_names[ridx]))
            pair_rows.append(ridx)

        # assessment block (first level): redispatch within the plan's band
        g_a = bld.vars(f"ga_t{tt}_", ng, obj=c_act)
        sh_a = bld.vars(f"sha_t{tt}_", nb, obj=lam_ls_a)
        sp_a = bld.vars(f"spa_t{tt}_", nb, obj=lam_sp_a)
        d_real = np.zeros(nb)
        for v, pos in zip(dataset.demand[t], data_pos):
            d_real[pos] += v
        row = {c: 1.0 for c in g_a}
        for c in sh_a:
            row[c] = 1.0
        for c in sp_a:
            row[c] = -1.0
        bld.row(row, EQ, float(d_real.sum()), f"as_bal_t{tt}")
        if not copper:
            for k in range(nlines):
                row = {}
                for j in range(ng):
                    if BM[k, j]:
                        row[g_a[j]] = BM[k, j]
                for i in range(nb):
                    if B[k, i]:
                        row[sh_a[i]] = B[k, i]
                        row[sp_a[i]] = -B[k, i]
                off = float(B[k] @ d_real)
                bld.row(dict(row), LE, lim_act[k] + off, f"as_nethi{k}_t{tt}")
                bld.row({c: -v for c, v in row.items()}, LE, lim_act[k] - off,
                        f"as_netlo{k}_t{tt}")
        for j in range(ng):
            bld.row({g_a[j]: 1.0, g_h[j]: -1.0, ru_h[j]: -1.0}, LE, 0.0,
                    f"as_hi{j}_t{tt}")
            bld.row({g_a[j]: -1.0, g_h[j]: 1.0, rd_h[j]: -1.0}, LE, 0.0,
                    f"as_lo{j}_t{tt}")

    lp = bld.lp()
    return KktInstance(
        lp=lp, pairs=pairs, pair_rows=pair_rows, theta_cols=theta_cols,
        spec=spec, theta_base=theta_base, T=T,
        meta={"n_w": n_w, "n_ineq": n_ineq, "copper": copper,
              "box_hints": box_hints},
    )


@dataclass
class BnbNode:
    bound: float
    node_id: int
    fixing: tuple  # pair index -> 0 free, 1 slack-zero, 2 dual-zero
    depth: int
    warm: object = None

    def __lt__(self, other):
        return (self.bound, self.node_id) < (other.bound, other.node_id)


@dataclass
class ExactResult:
    theta: ThetaVector
    objective: float
    bound: float
    gap: float
    nodes: int
    status: str  # "optimal" | "timeout" | "node-limit"
    x: np.ndarray | None = None


def _pair_columns(inst: KktInstance, template: Template):
    """Map every pair to (column_a, column_b) in the extended space, where
    fixing a side means clamping that column's upper bound at zero."""
    slack_of_row = template.std.slack_of_row
    cols = []
    for (a, b, _label), ridx in zip(inst.pairs, inst.pair_rows):
        if a >= 0:
            cols.append((a, b))
        else:
            s = slack_of_row[ridx]
            if s < 0:
                raise ExactError("row pair on an equality row")
            cols.append((int(s), b))
    return cols


def _violations(x_ext, pair_cols):
    a = x_ext[[c[0] for c in pair_cols]]
    b = x_ext[[c[1] for c in pair_cols]]
    return np.minimum(a, b), a * b


def solve_bnb(inst: KktInstance, gap_tol: float = 1e-3,
              time_limit: float | None = None, node_limit: int = 200000,
              comp_tol: float = 1e-7, backend=None, on_node=None,
              pipeline=None, incumbent0=None, dive_every: int = 40) -> ExactResult:
    """Best-bound branch-and-bound over the complementarity dichotomies.

    Incumbents come from three sources: nodes whose relaxation already
    satisfies every pair, greedy dives (repeatedly fixing the cheaper side
    of the most violated pair), and, when ``pipeline`` is given, direct
    plan-then-assess evaluation of a node's parameter vector (any theta
    yields a feasible bilevel point).  ``incumbent0`` seeds the search
    with ``(theta, value)``, typically the trained heuristic.

    Returns a certified optimum (relative gap <= gap_tol) or the best
    incumbent with its remaining gap on timeout.  Deterministic: queue
    ties break by creation order, branching picks the largest violation
    product with the lowest index.
    """
    template = Template(inst.lp, backend=backend)
    pair_cols = _pair_columns(inst, template)
    std_ub = template.std.ub
    b_rhs = template.std.b
    t0 = time.monotonic()
    n_struct = inst.lp.n_cols

    def solve_node(fixing, warm):
        ub = std_ub.copy()
        for k, side in enumerate(fixing):
            if side == 1:
                ub[pair_cols[k][0]] = 0.0
            elif side == 2:
                ub[pair_cols[k][1]] = 0.0
        # the core reports the slack-extended solution, so every pair
        # column (structural or row slack) reads off x_ext directly
        code, x_ext, obj, basis, _ = template.resolve(b_rhs, ub=ub, warm=warm)
        if code != 0:
            return code, None, np.nan, None
        return code, x_ext, obj, basis

    incumbent_x = None
    inc_obj = np.inf
    inc_theta = None

    def offer(theta, value, x=None):
        nonlocal incumbent_x, inc_obj, inc_theta
        if value < inc_obj - 1e-12:
            inc_obj = value
            inc_theta = theta
            incumbent_x = x

    def offer_x(x_ext, lp_value):
        # with a pipeline at hand, score the incumbent by the value the
        # evaluation path reproduces (>= the optimistic LP value on ties)
        theta = inst.theta_from_x(x_ext[:n_struct])
        value = pipeline.mean_cost(theta) if pipeline is not None else lp_value
        offer(theta, value, x_ext[:n_struct])

    if incumbent0 is not None:
        offer(incumbent0[0], float(incumbent0[1]))

    def pipeline_probe(x_ext):
        if pipeline is None:
            return
        theta = inst.theta_from_x(x_ext[:n_struct])
        offer(theta, pipeline.mean_cost(theta))

    def dive(fixing, x_ext, warm):
        fixing = list(fixing)
        for _ in range(len(pair_cols)):
            viol_min, viol_prod = _violations(x_ext, pair_cols)
            free = np.array([s == 0 for s in fixing])
            viol = np.where(free, viol_min, 0.0)
            if np.max(viol, initial=0.0) <= comp_tol:
                offer_x(x_ext, float(template.std.c @ x_ext))
                return
            k = int(np.argmax(np.where(free, viol_prod, -np.inf)))
            a, b = pair_cols[k]
            fixing[k] = 1 if x_ext[a] <= x_ext[b] else 2
            code, x_ext, obj, warm = solve_node(tuple(fixing), warm)
            if code != 0 or obj >= inc_obj - 1e-12:
                return

    n_pairs = len(pair_cols)
    root = tuple([0] * n_pairs)
    code, x_root, obj, basis = solve_node(root, None)
    if code != 0:
        raise ExactError(f"infeasible root relaxation (code {code}): modeling bug")
    pipeline_probe(x_root)
    dive(root, x_root, basis)
    nodes = 1
    heap = [BnbNode(obj, 0, root, 0, basis)]
    next_id = 1
    status = "optimal"
    since_dive = 0

    def gap_of(lb):
        if not np.isfinite(inc_obj):
            return np.inf
        return (inc_obj - lb) / max(abs(inc_obj), 1e-12)

    lb_global = obj
    while heap:
        if time_limit is not None and time.monotonic() - t0 > time_limit:
            status = "timeout"
            break
        if nodes >= node_limit:
            status = "node-limit"
            break
        node = heapq.heappop(heap)
        lb_global = node.bound
        if node.bound >= inc_obj - max(1e-9, 1e-9 * abs(inc_obj)) or (
            gap_of(lb_global) <= gap_tol
        ):
            lb_global = min(lb_global, inc_obj)
            heap = []
            break
        code, x_ext, obj, basis = solve_node(node.fixing, node.warm)
        nodes += 1
        if code != 0:
            continue
        if on_node is not None:
            on_node(node.bound, obj)
        if obj >= inc_obj - 1e-12:
            continue
        viol_min, viol_prod = _violations(x_ext, pair_cols)
        free_mask = np.array([s == 0 for s in node.fixing])
        viol = np.where(free_mask, viol_min, 0.0)
        if np.max(viol, initial=0.0) <= comp_tol:
            offer_x(x_ext, obj)
            continue
        pipeline_probe(x_ext)
        since_dive += 1
        if since_dive >= dive_every:
            since_dive = 0
            dive(node.fixing, x_ext, basis)
            if obj >= inc_obj - 1e-12:
                continue
        prods = np.where(free_mask, viol_prod, -np.inf)
        k = int(np.argmax(prods))
        for side in (1, 2):
            fixing = list(node.fixing)
            fixing[k] = side
            child = BnbNode(obj, next_id, tuple(fixing), node.depth + 1, basis)
            next_id += 1
            heapq.heappush(heap, child)

    if heap:
        lb_global = min([lb_global] + [n.bound for n in heap])
    elif status == "optimal":
        lb_global = min(inc_obj, lb_global)
    if inc_theta is None:
        raise ExactError(f"no incumbent found (status {status})")
    gap = 0.0 if status == "optimal" else gap_of(lb_global)
    return ExactResult(
        theta=inc_theta,
        objective=inc_obj,
        bound=min(lb_global, inc_obj) if status == "optimal" else lb_global,
        gap=gap,
        nodes=nodes,
        status=status,
        x=incumbent_x,
    )


def derive_big_m(inst: KktInstance, dual_m: float | None = None) -> tuple:
    """Big-M values per pair: the primal side by interval arithmetic over
    the variable ranges (a row slack is rhs minus the row's minimum
    activity over the box), the dual side by a policy constant (default
    scales with the largest objective entry).

    Variable ranges combine explicit bounds with the ranges recorded at
    build time (shed/spill/slack caps hold at every inner optimum, which
    is where the MILP lives).  Raises BigMError naming the first quantity
    whose range stays unbounded, with a hint to tighten bounds.
    """
    lp = inst.lp
    hints = inst.meta.get("box_hints", {})

    def col_range(j):
        lo_j, hi_j = lp.lb[j], lp.ub[j]
        if j in hints:
            lo_j = max(lo_j, hints[j][0])
            hi_j = min(hi_j, hints[j][1])
        return lo_j, hi_j

    m_primal = []
    for (a, _b, label), ridx in zip(inst.pairs, inst.pair_rows):
        if a >= 0:
            hi_a = col_range(a)[1]
            if not np.isfinite(hi_a):
                hi_a = _implied_ub(lp, a, col_range)
            if not np.isfinite(hi_a):
                raise BigMError(
                    f"pair {label}: variable {lp.col_names[a]} has no "
                    "finite upper bound; tighten variable bounds"
                )
            m_primal.append(hi_a)
        else:
            row = lp.A[ridx]
            act_min = 0.0
            for j in np.flatnonzero(row):
                c = row[j]
                lo_j, hi_j = col_range(j)
                if c < 0 and not np.isfinite(hi_j):
                    hi_j = _implied_ub(lp, j, col_range)
                b_lo = lo_j if c > 0 else hi_j
                if not np.isfinite(b_lo):
                    raise BigMError(
                        f"pair {label}: row activity unbounded through "
                        f"{lp.col_names[j]}; tighten variable bounds"
                    )
                act_min += c * b_lo
            m_primal.append(lp.b[ridx] - act_min)
    if dual_m is None:
        dual_m = 100.0 * max(float(np.max(np.abs(lp.c))) * inst.T, 1.0)
    return np.array(m_primal), float(dual_m)


def _implied_ub(lp, col, col_range):
    """Smallest upper bound on a column implied by a single <= row with all
    other terms boxed below."""
    best = np.inf
    for i in range(lp.n_rows):
        if lp.senses[i] != LE or lp.A[i, col] <= 0:
            continue
        rest = 0.0
        ok = True
        for j in np.flatnonzero(lp.A[i]):
            if j == col:
                continue
            c = lp.A[i, j]
            lo_j, hi_j = col_range(j)
            b_lo = lo_j if c > 0 else hi_j
            if not np.isfinite(b_lo):
                ok = False
                break
            rest += c * b_lo
        if ok:
            best = min(best, (lp.b[i] - rest) / lp.A[i, col])
    return best


def bigm_milp(inst: KktInstance, dual_m: float | None = None):
    """Fortuny-Amat MILP of the instance: binary y per pair with
    primal_side <= M_p (1 - y) and dual_side <= M_d y.  Returns
    ``(LinearProgram, integer_column_indices, M_primal, M_dual)``."""
    m_primal, m_dual = derive_big_m(inst, dual_m)
    lp = inst.lp
    n = lp.n_cols
    n_pairs = len(inst.pairs)
    A = np.zeros((lp.n_rows + 2 * n_pairs, n + n_pairs))
    A[: lp.n_rows, :n] = lp.A
    senses = list(lp.senses)
    b = list(lp.b)
    row_names = list(lp.row_names)
    col_names = list(lp.col_names) + [f"y_{k}" for k in range(n_pairs)]
    c = np.concatenate([lp.c, np.zeros(n_pairs)])
    lb = np.concatenate([lp.lb, np.zeros(n_pairs)])
    ub = np.concatenate([lp.ub, np.ones(n_pairs)])
    r = lp.n_rows
    for k, ((a, bcol, label), ridx) in enumerate(zip(inst.pairs, inst.pair_rows)):
        y = n + k
        if a >= 0:
            A[r, a] = 1.0
            A[r, y] = m_primal[k]
            senses.append(LE)
            b.append(m_primal[k])
        else:
            # slack of row ridx is rhs - activity
            A[r, :n] = -lp.A[ridx]
            A[r, y] = m_primal[k]
            senses.append(LE)
            b.append(m_primal[k] - lp.b[ridx])
        row_names.append(f"fa_p_{k}")
        r += 1
        A[r, bcol] = 1.0
        A[r, y] = -m_dual
        senses.append(LE)
        b.append(0.0)
        row_names.append(f"fa_d_{k}")
        r += 1
    milp = LinearProgram(
        c, A[:r], senses, np.array(b), lb=lb, ub=ub,
        row_names=row_names, col_names=col_names,
    )
    return milp, list(range(n, n + n_pairs)), m_primal, m_dual


def export_bigm_mps(inst: KktInstance, path, dual_m: float | None = None):
    """Write the Fortuny-Amat MILP as fixed MPS; returns the
    (M_primal array, M_dual) used."""
    milp, int_cols, m_primal, m_dual = bigm_milp(inst, dual_m)
    mps_mod.write_mps(milp, path, name="ADLEARN_KKT", integer_cols=int_cols)
    return m_primal, m_dual


def solve_milp(inst: KktInstance, gap_tol: float = 1e-3,
               time_limit: float | None = None, pipeline=None,
               dual_m: float | None = None) -> ExactResult:
    """Solve the big-M reformulation with scipy's HiGHS branch-and-cut.

    The reported objective is re-evaluated through ``pipeline`` when given
    (plan-then-assess at the returned theta), which also guards against an
    undersized dual-side big-M: a mismatch beyond tolerance raises."""
    from scipy.optimize import Bounds, LinearConstraint
    from scipy.optimize import milp as scipy_milp

    milp, int_cols, _, m_dual = bigm_milp(inst, dual_m)
    lo = np.full(milp.n_rows, -np.inf)
    hi = np.full(milp.n_rows, np.inf)
    for i, sense in enumerate(milp.senses):
        if sense == LE:
            hi[i] = milp.b[i]
        elif sense == GE:
            lo[i] = milp.b[i]
        else:
            lo[i] = hi[i] = milp.b[i]
    integrality = np.zeros(milp.n_cols)
    integrality[int_cols] = 1
    options = {"mip_rel_gap": gap_tol, "presolve": True}
    if time_limit is not None:
        options["time_limit"] = float(time_limit)
    res = scipy_milp(
        c=milp.c,
        constraints=LinearConstraint(milp.A, lo, hi),
        bounds=Bounds(milp.lb, np.where(np.isinf(milp.ub), 1e15, milp.ub)),
        integrality=integrality,
        options=options,
    )
    if res.x is None:
        raise ExactError(f"external MILP engine found no incumbent: {res.message}")
    n_struct = inst.lp.n_cols
    x = res.x[:n_struct]
    theta = inst.theta_from_x(x)
    obj = float(res.fun)
    status = "optimal" if res.status == 0 else "timeout"
    gap = float(res.mip_gap) if res.mip_gap is not None else np.inf
    bound = float(res.mip_dual_bound) if res.mip_dual_bound is not None else obj
    if pipeline is not None:
        reval = pipeline.mean_cost(theta)
        if reval < obj - 1e-4:
            raise BigMError(
                "MILP value exceeds the pipeline re-evaluation: dual big-M "
                "looks too small; raise dual_m"
            )
        if reval > obj + max(1e-4, 1e-4 * abs(obj)):
            raise BigMError(
                "pipeline re-evaluation exceeds the MILP value by more than "
                "tolerance: primal big-M looks too small; raise bounds"
            )
        obj = reval
    return ExactResult(theta=theta, objective=obj, bound=bound, gap=gap,
                       nodes=int(res.mip_node_count or 0), status=status, x=x)


def solve_exact(inst: KktInstance, gap_tol: float = 1e-3,
                time_limit: float | None = None, engine: str = "auto",
                pipeline=None, incumbent0=None, **kw) -> ExactResult:
    """Certified solve of the instance.

    ``engine="bnb"`` runs the built-in complementarity branch-and-bound
    (plain LP-relaxation bounds; fine for a handful of samples),
    ``engine="milp"`` the big-M reformulation on HiGHS (scales to the
    exact-vs-heuristic study sizes); ``auto`` picks by instance size."""
    if engine == "auto":
        engine = "bnb" if len(inst.pairs) <= 80 else "milp"
    if engine == "bnb":
        return solve_bnb(inst, gap_tol=gap_tol, time_limit=time_limit,
                         pipeline=pipeline, incumbent0=incumbent0, **kw)
    if engine == "milp":
        return solve_milp(inst, gap_tol=gap_tol, time_limit=time_limit,
                          pipeline=pipeline, **kw)
    raise ExactError(f"unknown engine {engine!r}")
