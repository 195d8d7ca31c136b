"""Energy-and-reserve scheduling (planning) and ex-post redispatch
(assessment) linear programs.

Planning schedules generation and zonal reserves against a forecast using
the planning-side (tilde) parameters; assessment fixes the plan and prices
the realized demand with the actual parameters.  Both stay feasible for
any input through shed/spill slack columns, and the planning problem
additionally carries a slack per reserve-requirement row (priced at the
shed penalty) so requirements beyond the fleet's capability do not kill
feasibility.

Planning solves use the deterministic objective perturbation (the solution
must be unique in the estimation loop); assessment solves do not (any
optimal value is the cost).

Both problems come in template form: the matrix is built once per
(case, network) and only rhs/bounds move per sample, feeding the solver
core directly and skipping the public-API overhead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import forecast as fc
from .lp import simplex
from .lp.model import EQ, GE, LE, LinearProgram, LpError, PerturbationPolicy
from .netcase import PtdfMatrix, SystemCase, incidence_maps

PLAN_PERTURB = PerturbationPolicy.deterministic(1e-7)
_TOL = 1e-6


class DispatchError(LpError):
    pass


@dataclass
class DispatchPlan:
    g: np.ndarray
    r_up: np.ndarray
    r_dn: np.ndarray
    objective: float
    shed: np.ndarray
    spill: np.ndarray
    reserve_slack_up: np.ndarray
    reserve_slack_dn: np.ndarray
    basis: tuple | None = None

    def validate(self, case: SystemCase, rup_req, rdn_req, tol=_TOL):
        cap = case.tilde_gen_capacity()
        if np.any(self.g < -tol) or np.any(self.g > cap + tol):
            raise DispatchError("plan violates generation capacity")
        if np.any(self.g + self.r_up > cap + tol):
            raise DispatchError("plan violates headroom for up reserve")
        if np.any(self.g - self.r_dn < -tol):
            raise DispatchError("plan violates footroom for down reserve")
        if np.any(self.r_up > case.gen_rbar_up() + tol) or np.any(
            self.r_dn > case.gen_rbar_dn() + tol
        ):
            raise DispatchError("plan violates reserve caps")
        N = incidence_maps(case).N
        up_gap = N @ self.r_up + self.reserve_slack_up - np.asarray(rup_req)
        dn_gap = N @ self.r_dn + self.reserve_slack_dn - np.asarray(rdn_req)
        if np.max(np.abs(up_gap), initial=0.0) > 1e-7 or np.max(
            np.abs(dn_gap), initial=0.0
        ) > 1e-7:
            raise DispatchError("zone reserve balance violated")


@dataclass
class AssessmentResult:
    g: np.ndarray
    shed: np.ndarray
    spill: np.ndarray
    cost: float
    binding: list = field(default_factory=list)
    basis: tuple | None = None


def _expand_to_buses(case: SystemCase, values, bus_ids) -> np.ndarray:
    """Scatter per-load-bus values into a full bus vector."""
    bi = case.bus_index()
    out = np.zeros(case.n_buses)
    for v, b in zip(np.atleast_1d(values), bus_ids):
        out[bi[b]] += v
    return out


class _Template(simplex.Template):
    """Dispatch-flavored template: any non-optimal outcome is a bug, since
    complete recourse guarantees feasibility and boundedness."""

    def resolve(self, b, lb=None, ub=None, warm=None, max_iter=20000):
        code, x, obj, basis, y = super().resolve(b, lb=lb, ub=ub, warm=warm,
                                                 max_iter=max_iter)
        if code != 0:
            raise DispatchError(
                f"dispatch LP not optimal (complete recourse violated?): code {code}"
            )
        return x, obj, basis, y


class PlanningProblem:
    """Template for the scheduling problem G_p over tilde parameters."""

    def __init__(self, case: SystemCase, ptdf: PtdfMatrix | None = None,
                 copper_plate: bool = False, nodal_balance: bool = False,
                 perturb: PerturbationPolicy = PLAN_PERTURB, backend=None):
        self.case = case
        self.copper_plate = copper_plate or case.n_lines == 0
        self.nodal_balance = nodal_balance
        if not self.copper_plate and ptdf is None:
            raise DispatchError("networked planning needs a PTDF")
        self.ptdf = ptdf
        self.maps = incidence_maps(case)
        ng, nb, nz = case.n_gens, case.n_buses, case.n_zones
        self.ng, self.nb, self.nz = ng, nb, nz
        lp = self._build_lp(np.zeros(nb), np.zeros(nz), np.zeros(nz))
        self.template = _Template(lp, perturb, backend)
        self._net_rows = case.n_lines if not self.copper_plate else 0

    # column layout: g | r_up | r_dn | shed | spill | zs_up | zs_dn [| theta]
    def _columns(self):
        ng, nb, nz = self.ng, self.nb, self.nz
        cols = {}
        k = 0
        for name, size in (("g", ng), ("r_up", ng), ("r_dn", ng),
                           ("shed", nb), ("spill", nb),
                           ("zs_up", nz), ("zs_dn", nz)):
            cols[name] = slice(k, k + size)
            k += size
        if self.nodal_balance and not self.copper_plate:
            cols["theta"] = slice(k, k + nb)
            k += nb
        return cols, k

    def _build_lp(self, dhat_bus, rup, rdn) -> LinearProgram:
        case = self.case
        ng, nb, nz = self.ng, self.nb, self.nz
        cols, n = self._columns()
        lam_ls, lam_sp = case.tilde_load_shed, case.tilde_spill
        c = np.zeros(n)
        c[cols["g"]] = case.tilde_gen_cost()
        c[cols["r_up"]] = case.tilde_gen_p_up()
        c[cols["r_dn"]] = case.tilde_gen_p_dn()
        c[cols["shed"]] = lam_ls
        c[cols["spill"]] = lam_sp
        c[cols["zs_up"]] = lam_ls
        c[cols["zs_dn"]] = lam_ls
        lb = np.zeros(n)
        ub = np.full(n, np.inf)
        ub[cols["r_up"]] = case.gen_rbar_up()
        ub[cols["r_dn"]] = case.gen_rbar_dn()
        rows = []
        senses = []
        b = []
        names = []

        def add(coefs: dict, sense, rhs, name):
            row = np.zeros(n)
            for cname, vec in coefs.items():
                row[cols[cname]] = vec
            rows.append(row)
            senses.append(sense)
            b.append(rhs)
            names.append(name)

        M = self.maps.M
        if self.nodal_balance and not self.copper_plate:
            # angle form: per-bus balance with Laplacian flows plus line
            # limits written on angle differences
            L, line_rows = self._laplacian()
            theta_lb = np.full(nb, -np.inf)
            theta_ub = np.full(nb, np.inf)
            s = case.bus_index()[self.ptdf.slack]
            theta_lb[s] = theta_ub[s] = 0.0
            lb[cols["theta"]] = theta_lb
            ub[cols["theta"]] = theta_ub
            for i in range(nb):
                add(
                    {"g": M[i], "shed": _unit(nb, i), "spill": -_unit(nb, i),
                     "theta": -L[i]},
                    EQ, dhat_bus[i], f"bal_b{i}",
                )
            lim = case.tilde_line_limits()
            for k, row in enumerate(line_rows):
                add({"theta": row}, LE, lim[k], f"flow_hi_l{k}")
                add({"theta": -row}, LE, lim[k], f"flow_lo_l{k}")
        else:
            add(
                {"g": np.ones(ng), "shed": np.ones(nb), "spill": -np.ones(nb)},
                EQ, float(np.sum(dhat_bus)), "balance",
            )
            if not self.copper_plate:
                B = self.ptdf.B
                lim = case.tilde_line_limits()
                BM = B @ M
                bd = B @ dhat_bus
                for k in range(case.n_lines):
                    add({"g": BM[k], "shed": B[k], "spill": -B[k]},
                        LE, lim[k] + bd[k], f"flow_hi_l{k}")
                    add({"g": -BM[k], "shed": -B[k], "spill": B[k]},
                        LE, lim[k] - bd[k], f"flow_lo_l{k}")
        N = self.maps.N
        for z in range(nz):
            add({"r_up": N[z], "zs_up": _unit(nz, z)}, EQ, rup[z], f"zone_up{z}")
        for z in range(nz):
            add({"r_dn": N[z], "zs_dn": _unit(nz, z)}, EQ, rdn[z], f"zone_dn{z}")
        cap = case.tilde_gen_capacity()
        for i in range(ng):
            add({"g": _unit(ng, i), "r_up": _unit(ng, i)}, LE, cap[i], f"cap_g{i}")
        for i in range(ng):
            add({"g": _unit(ng, i), "r_dn": -_unit(ng, i)}, GE, 0.0, f"foot_g{i}")
        col_names = _planning_col_names(case, cols, n)
        return LinearProgram(
            c, np.array(rows), senses, np.array(b), lb=lb, ub=ub,
            row_names=names, col_names=col_names,
        )

    def _laplacian(self):
        case = self.case
        bi = case.bus_index()
        nb = case.n_buses
        L = np.zeros((nb, nb))
        line_rows = []
        for ln in case.lines:
            f, t = bi[ln.from_bus], bi[ln.to_bus]
            w = 1.0 / ln.reactance
            L[f, f] += w
            L[t, t] += w
            L[f, t] -= w
            L[t, f] -= w
            row = np.zeros(nb)
            row[f], row[t] = w, -w
            line_rows.append(row)
        return L, line_rows

    def rhs(self, dhat_bus, rup, rdn) -> np.ndarray:
        """Right-hand side for a forecast, matching the template rows."""
        case = self.case
        b = []
        if self.nodal_balance and not self.copper_plate:
            b.extend(dhat_bus)
            lim = case.tilde_line_limits()
            for k in range(case.n_lines):
                b.extend((lim[k], lim[k]))
        else:
            b.append(float(np.sum(dhat_bus)))
            if not self.copper_plate:
                lim = case.tilde_line_limits()
                bd = self.ptdf.B @ dhat_bus
                for k in range(case.n_lines):
                    b.extend((lim[k] + bd[k], lim[k] - bd[k]))
        b.extend(np.maximum(rup, 0.0))
        b.extend(np.maximum(rdn, 0.0))
        b.extend(self.case.tilde_gen_capacity())
        b.extend(np.zeros(self.ng))
        return np.array(b)

    def lp(self, dhat_bus, rup, rdn) -> LinearProgram:
        return self._build_lp(
            np.asarray(dhat_bus, float),
            np.maximum(np.asarray(rup, float), 0.0),
            np.maximum(np.asarray(rdn, float), 0.0),
        )

    def solve(self, dhat_bus, rup, rdn, warm=None) -> DispatchPlan:
        x, obj, basis, _ = self.template.resolve(
            self.rhs(dhat_bus, rup, rdn), warm=warm
        )
        cols, _ = self._columns()
        return DispatchPlan(
            g=x[cols["g"]].copy(),
            r_up=x[cols["r_up"]].copy(),
            r_dn=x[cols["r_dn"]].copy(),
            objective=obj,
            shed=x[cols["shed"]].copy(),
            spill=x[cols["spill"]].copy(),
            reserve_slack_up=x[cols["zs_up"]].copy(),
            reserve_slack_dn=x[cols["zs_dn"]].copy(),
            basis=basis,
        )


def _unit(n, i):
    e = np.zeros(n)
    e[i] = 1.0
    return e


def _planning_col_names(case, cols, n):
    names = [""] * n
    gids = [g.id for g in case.generators]
    bids = [b.id for b in case.buses]
    zids = [z.id for z in case.zones]
    for nm, ids in (("g", gids), ("r_up", gids), ("r_dn", gids),
                    ("shed", bids), ("spill", bids),
                    ("zs_up", zids), ("zs_dn", zids)):
        sl = cols[nm]
        for k, eid in zip(range(sl.start, sl.stop), ids):
            names[k] = f"{nm}_{eid}"
    if "theta" in cols:
        sl = cols["theta"]
        for k, eid in zip(range(sl.start, sl.stop), bids):
            names[k] = f"theta_{eid}"
    return names


class AssessmentProblem:
    """Template for the ex-post cost G_a given a plan: redispatch within
    the reserve band against realized demand, actual parameters."""

    def __init__(self, case: SystemCase, ptdf: PtdfMatrix | None = None,
                 copper_plate: bool = False, nodal_balance: bool = False,
                 backend=None):
        self.case = case
        self.copper_plate = copper_plate or case.n_lines == 0
        self.nodal_balance = nodal_balance
        if not self.copper_plate and ptdf is None:
            raise DispatchError("networked assessment needs a PTDF")
        self.ptdf = ptdf
        self.maps = incidence_maps(case)
        ng, nb = case.n_gens, case.n_buses
        self.ng, self.nb = ng, nb
        lp = self._build_lp(np.zeros(ng), np.ones(ng), np.zeros(nb))
        self.template = _Template(lp, PerturbationPolicy.none(), backend)

    def _columns(self):
        ng, nb = self.ng, self.nb
        cols = {"g": slice(0, ng), "shed": slice(ng, ng + nb),
                "spill": slice(ng + nb, ng + 2 * nb)}
        k = ng + 2 * nb
        if self.nodal_balance and not self.copper_plate:
            cols["theta"] = slice(k, k + nb)
            k += nb
        return cols, k

    def _build_lp(self, g_lo, g_hi, d_bus) -> LinearProgram:
        case = self.case
        ng, nb = self.ng, self.nb
        cols, n = self._columns()
        c = np.zeros(n)
        c[cols["g"]] = case.gen_cost()
        c[cols["shed"]] = case.penalties.load_shed
        c[cols["spill"]] = case.penalties.spill
        lb = np.zeros(n)
        ub = np.full(n, np.inf)
        lb[cols["g"]] = np.maximum(g_lo, 0.0)
        ub[cols["g"]] = g_hi
        rows, senses, b, names = [], [], [], []

        def add(coefs, sense, rhs, name):
            row = np.zeros(n)
            for cname, vec in coefs.items():
                row[cols[cname]] = vec
            rows.append(row)
            senses.append(sense)
            b.append(rhs)
            names.append(name)

        M = self.maps.M
        if self.nodal_balance and not self.copper_plate:
            L, line_rows = self._laplacian()
            s = case.bus_index()[self.ptdf.slack]
            lb[cols["theta"]] = -np.inf
            ub[cols["theta"]] = np.inf
            lb[cols["theta"]][s] = ub[cols["theta"]][s] = 0.0
            for i in range(nb):
                add({"g": M[i], "shed": _unit(nb, i), "spill": -_unit(nb, i),
                     "theta": -L[i]}, EQ, d_bus[i], f"bal_b{i}")
            lim = case.line_limits()
            for k, row in enumerate(line_rows):
                add({"theta": row}, LE, lim[k], f"flow_hi_l{k}")
                add({"theta": -row}, LE, lim[k], f"flow_lo_l{k}")
        else:
            add({"g": np.ones(ng), "shed": np.ones(nb), "spill": -np.ones(nb)},
                EQ, float(np.sum(d_bus)), "balance")
            if not self.copper_plate:
                B = self.ptdf.B
                lim = case.line_limits()
                BM = B @ M
                bd = B @ d_bus
                for k in range(case.n_lines):
                    add({"g": BM[k], "shed": B[k], "spill": -B[k]},
                        LE, lim[k] + bd[k], f"flow_hi_l{k}")
                    add({"g": -BM[k], "shed": -B[k], "spill": B[k]},
                        LE, lim[k] - bd[k], f"flow_lo_l{k}")
        col_names = [""] * n
        gids = [g.id for g in case.generators]
        bids = [bb.id for bb in case.buses]
        for nm, ids in (("g", gids), ("shed", bids), ("spill", bids)):
            sl = cols[nm]
            for k, eid in zip(range(sl.start, sl.stop), ids):
                col_names[k] = f"{nm}_{eid}"
        if "theta" in cols:
            sl = cols["theta"]
            for k, eid in zip(range(sl.start, sl.stop), bids):
                col_names[k] = f"theta_{eid}"
        return LinearProgram(c, np.array(rows), senses, np.array(b), lb=lb,
                             ub=ub, row_names=names, col_names=col_names)

    _laplacian = PlanningProblem._laplacian

    def rhs(self, d_bus):
        case = self.case
        b = []
        if self.nodal_balance and not self.copper_plate:
            b.extend(d_bus)
            lim = case.line_limits()
            for k in range(case.n_lines):
                b.extend((lim[k], lim[k]))
        else:
            b.append(float(np.sum(d_bus)))
            if not self.copper_plate:
                lim = case.line_limits()
                bd = self.ptdf.B @ d_bus
                for k in range(case.n_lines):
                    b.extend((lim[k] + bd[k], lim[k] - bd[k]))
        return np.array(b)

    def bounds(self, plan: DispatchPlan):
        cols, n = self._columns()
        lb = np.zeros(n)
        ub = np.full(n, np.inf)
        lb[cols["g"]] = np.maximum(plan.g - plan.r_dn, 0.0)
        ub[cols["g"]] = plan.g + plan.r_up
        if "theta" in cols:
            s = self.case.bus_index()[self.ptdf.slack]
            lb[cols["theta"]] = -np.inf
            ub[cols["theta"]] = np.inf
            lb[cols["theta"]][s] = ub[cols["theta"]][s] = 0.0
        return lb, ub

    def reserve_cost(self, plan: DispatchPlan) -> float:
        case = self.case
        return float(case.gen_p_up() @ plan.r_up + case.gen_p_dn() @ plan.r_dn)

    def lp(self, plan: DispatchPlan, d_bus) -> LinearProgram:
        lb, ub = self.bounds(plan)
        cols, _ = self._columns()
        lp = self._build_lp(lb[cols["g"]], ub[cols["g"]],
                            np.asarray(d_bus, float))
        lp.objective_constant = self.reserve_cost(plan)
        return lp

    def solve(self, plan: DispatchPlan, d_bus, warm=None,
              binding_report=False) -> AssessmentResult:
        lb, ub = self.bounds(plan)
        b = self.rhs(np.asarray(d_bus, float))
        x, obj, basis, _ = self.template.resolve(b, lb=lb, ub=ub, warm=warm)
        cols, _ = self._columns()
        binding = []
        if binding_report:
            lp = self.template.lp
            act = self.template.std.A[:, : lp.n_cols] @ x
            for i, nm in enumerate(lp.row_names):
                if abs(act[i] - b[i]) <= 1e-7 * (1.0 + abs(b[i])):
                    binding.append(nm)
        return AssessmentResult(
            g=x[cols["g"]].copy(),
            shed=x[cols["shed"]].copy(),
            spill=x[cols["spill"]].copy(),
            cost=obj + self.reserve_cost(plan),
            binding=binding,
            basis=basis,
        )


def build_planning_lp(case, ptdf, dhat_bus, rup, rdn, copper_plate=False,
                      nodal_balance=False) -> LinearProgram:
    prob = PlanningProblem(case, ptdf, copper_plate=copper_plate,
                           nodal_balance=nodal_balance)
    return prob.lp(dhat_bus, rup, rdn)


def build_assessment_lp(case, ptdf, plan, d_bus, copper_plate=False,
                        nodal_balance=False) -> LinearProgram:
    prob = AssessmentProblem(case, ptdf, copper_plate=copper_plate,
                             nodal_balance=nodal_balance)
    return prob.lp(plan, d_bus)


def perfect_information_cost(case, ptdf, d_bus, copper_plate=False) -> float:
    """Dispatch cost with the generation band relaxed to [0, G] and no
    reserve payment: a lower bound on any assessed cost for the same D."""
    prob = AssessmentProblem(case, ptdf, copper_plate=copper_plate)
    cols, n = prob._columns()
    lb = np.zeros(n)
    ub = np.full(n, np.inf)
    ub[cols["g"]] = case.gen_capacity()
    if "theta" in cols:
        s = case.bus_index()[prob.ptdf.slack]
        lb[cols["theta"]] = -np.inf
        lb[cols["theta"]][s] = ub[cols["theta"]][s] = 0.0
    _, obj, _, _ = prob.template.resolve(prob.rhs(np.asarray(d_bus, float)),
                                         lb=lb, ub=ub)
    return obj


class SamplePipeline:
    """Plan-then-assess evaluation over a whole dataset, with per-sample
    warm-start caches that persist across parameter iterations.

    The realized-demand side of every assessment is fixed, so its rhs is
    precomputed once; per parameter vector only the forecasts move.
    """

    def __init__(self, case: SystemCase, ptdf, spec, dataset,
                 copper_plate=False, nodal_balance=False, backend=None):
        self.case = case
        self.spec = spec
        self.dataset = dataset
        self.planning = PlanningProblem(case, ptdf, copper_plate=copper_plate,
                                        nodal_balance=nodal_balance,
                                        backend=backend)
        self.assessment = AssessmentProblem(case, ptdf,
                                            copper_plate=copper_plate,
                                            nodal_balance=nodal_balance,
                                            backend=backend)
        bi = case.bus_index()
        self._dem_pos = np.array([bi[b.key] for b in spec.demand], dtype=np.int64)
        self._data_pos = np.array([bi[b] for b in dataset.bus_ids], dtype=np.int64)
        self._p_up = case.gen_p_up()
        self._p_dn = case.gen_p_dn()
        T = dataset.T
        d_full = np.zeros((T, case.n_buses))
        d_full[:, self._data_pos] = dataset.demand
        self._assess_rhs = np.array(
            [self.assessment.rhs(d_full[t]) for t in range(T)]
        )
        self.warm_plan = [None] * T
        self.warm_assess = [None] * T
        self._gcols = self.planning._columns()[0]
        self._acols = self.assessment._columns()[0]

    def _dhat_full(self, dem):
        out = np.zeros((dem.shape[0], self.case.n_buses))
        out[:, self._dem_pos] = dem
        return out

    def _planning_rhs_batch(self, dhat_full, rup, rdn):
        T = dhat_full.shape[0]
        case = self.case
        p = self.planning
        parts = []
        if p.nodal_balance and not p.copper_plate:
            parts.append(dhat_full)
            lim = case.tilde_line_limits()
            net = np.empty((T, 2 * case.n_lines))
            net[:, 0::2] = lim
            net[:, 1::2] = lim
            parts.append(net)
        else:
            parts.append(dhat_full.sum(axis=1, keepdims=True))
            if not p.copper_plate:
                lim = case.tilde_line_limits()
                bd = dhat_full @ p.ptdf.B.T
                net = np.empty((T, 2 * case.n_lines))
                net[:, 0::2] = lim + bd
                net[:, 1::2] = lim - bd
                parts.append(net)
        parts.append(rup)
        parts.append(rdn)
        parts.append(np.tile(case.tilde_gen_capacity(), (T, 1)))
        parts.append(np.zeros((T, case.n_gens)))
        return np.concatenate(parts, axis=1)

    def evaluate_t(self, plan_rhs_t, t):
        """One sample: solve planning (warm), then assessment (warm);
        returns the assessed cost including the reserve payment."""
        xp, _, basis_p, _ = self.planning.template.resolve(
            plan_rhs_t, warm=self.warm_plan[t]
        )
        self.warm_plan[t] = basis_p
        gc = self._gcols
        g = xp[gc["g"]]
        r_up = xp[gc["r_up"]]
        r_dn = xp[gc["r_dn"]]
        ac = self._acols
        _, n_a = self.assessment._columns()
        lb = np.zeros(n_a)
        ub = np.full(n_a, np.inf)
        lb[ac["g"]] = np.maximum(g - r_dn, 0.0)
        ub[ac["g"]] = g + r_up
        if "theta" in ac:
            s = self.case.bus_index()[self.assessment.ptdf.slack]
            lb[ac["theta"]] = -np.inf
            lb[ac["theta"]][s] = ub[ac["theta"]][s] = 0.0
        _, obj, basis_a, _ = self.assessment.template.resolve(
            self._assess_rhs[t], lb=lb, ub=ub, warm=self.warm_assess[t]
        )
        self.warm_assess[t] = basis_a
        return obj + float(self._p_up @ r_up + self._p_dn @ r_dn)

    def per_sample_costs(self, theta, jobs: int = 1) -> np.ndarray:
        dem, rup, rdn = fc.predict_all(self.spec, theta, self.dataset)
        dhat_full = self._dhat_full(dem)
        plan_rhs = self._planning_rhs_batch(dhat_full, rup, rdn)
        T = self.dataset.T
        out = np.empty(T)
        if jobs <= 1:
            for t in range(T):
                out[t] = self.evaluate_t(plan_rhs[t], t)
            return out
        from concurrent.futures import ThreadPoolExecutor

        def run_chunk(lo, hi):
            for t in range(lo, hi):
                out[t] = self.evaluate_t(plan_rhs[t], t)

        step = (T + jobs - 1) // jobs
        chunks = [(lo, min(lo + step, T)) for lo in range(0, T, step)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(lambda c: run_chunk(*c), chunks))
        return out

    def mean_cost(self, theta, jobs: int = 1) -> float:
        costs = self.per_sample_costs(theta, jobs=jobs)
        return float(np.sum(costs) / len(costs))


def evaluate_sample(case, ptdf, spec, theta, x_t, d_t, warm=None,
                    copper_plate=False, nodal_balance=False):
    """One full plan-then-assess pass for a single observation.

    ``x_t`` is ``(lag1_vector, exog_or_None)`` with the lag vector aligned
    to the spec's demand blocks; ``d_t`` maps bus id -> realized demand (a
    scalar works for a single-bus case).  Returns
    ``(cost, DispatchPlan, AssessmentResult)``.
    """
    lag1, exog = x_t if isinstance(x_t, tuple) else (x_t, None)
    dem, rup, rdn = fc.predict(spec, theta, lag1, exog=exog)
    planning = PlanningProblem(case, ptdf, copper_plate=copper_plate,
                               nodal_balance=nodal_balance)
    assessment = AssessmentProblem(case, ptdf, copper_plate=copper_plate,
                                   nodal_balance=nodal_balance)
    dhat_full = _expand_to_buses(case, dem, [b.key for b in spec.demand])
    warm_p, warm_a = warm if warm is not None else (None, None)
    plan = planning.solve(dhat_full, rup, rdn, warm=warm_p)
    plan.validate(case, np.maximum(rup, 0.0), np.maximum(rdn, 0.0))
    if np.isscalar(d_t):
        d_bus = _expand_to_buses(case, [d_t], [case.buses[0].id])
    else:
        d_bus = _expand_to_buses(case, list(d_t.values()), list(d_t.keys()))
    result = assessment.solve(plan, d_bus, warm=warm_a, binding_report=True)
    return result.cost, plan, result
