"""System data model: buses, generators, lines, zones, penalties, and the
planning-side ("tilde") parameter overrides, plus the JSON case format and
the line-flow sensitivity (PTDF) computation.

Two parameter sets live side by side: the *actual* values used when
assessing realized operation, and the *planning* values the scheduling
problem sees.  Planning values default to the actual ones and can be
overridden per field through the ``tilde`` block.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np


class CaseError(Exception):
    """Schema violation or invariant failure in a system case."""


@dataclass(frozen=True)
class Bus:
    id: int
    name: str = ""
    load: float = 0.0  # nominal long-run average demand at this bus


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    capacity: float
    cost: float
    rbar_up: float
    rbar_dn: float
    p_up: float
    p_dn: float
    zone: int | None = None


@dataclass(frozen=True)
class Line:
    id: int
    from_bus: int
    to_bus: int
    reactance: float
    limit: float


@dataclass(frozen=True)
class Zone:
    id: int


@dataclass(frozen=True)
class Penalties:
    load_shed: float
    spill: float


@dataclass(frozen=True)
class TildeBlock:
    """Planning-side overrides keyed by element id; missing entries fall
    back to the actual values."""

    cost: dict = field(default_factory=dict)
    p_up: dict = field(default_factory=dict)
    p_dn: dict = field(default_factory=dict)
    capacity: dict = field(default_factory=dict)
    limit: dict = field(default_factory=dict)
    load_shed: float | None = None
    spill: float | None = None


@dataclass(frozen=True)
class SystemCase:
    buses: tuple
    generators: tuple
    lines: tuple
    zones: tuple
    penalties: Penalties
    tilde: TildeBlock = field(default_factory=TildeBlock)
    demand_scale: float = 1.0
    name: str = ""

    def __post_init__(self):
        _check_case(self)

    # --- index helpers -------------------------------------------------
    @property
    def n_buses(self):
        return len(self.buses)

    @property
    def n_gens(self):
        return len(self.generators)

    @property
    def n_lines(self):
        return len(self.lines)

    @property
    def n_zones(self):
        return len(self.zones)

    def bus_index(self):
        return {b.id: i for i, b in enumerate(self.buses)}

    def zone_index(self):
        return {z.id: i for i, z in enumerate(self.zones)}

    # --- actual-side vectors (index order = declaration order) ---------
    def gen_capacity(self):
        return np.array([g.capacity for g in self.generators])

    def gen_cost(self):
        return np.array([g.cost for g in self.generators])

    def gen_p_up(self):
        return np.array([g.p_up for g in self.generators])

    def gen_p_dn(self):
        return np.array([g.p_dn for g in self.generators])

    def gen_rbar_up(self):
        return np.array([g.rbar_up for g in self.generators])

    def gen_rbar_dn(self):
        return np.array([g.rbar_dn for g in self.generators])

    def line_limits(self):
        return np.array([ln.limit for ln in self.lines])

    def bus_loads(self):
        return np.array([b.load for b in self.buses]) * self.demand_scale

    # --- planning-side vectors ------------------------------------------
    def _tilde_vec(self, actual, overrides, ids):
        out = actual.copy()
        for i, eid in enumerate(ids):
            if eid in overrides:
                out[i] = overrides[eid]
        return out

    def tilde_gen_cost(self):
        ids = [g.id for g in self.generators]
        return self._tilde_vec(self.gen_cost(), self.tilde.cost, ids)

    def tilde_gen_p_up(self):
        ids = [g.id for g in self.generators]
        return self._tilde_vec(self.gen_p_up(), self.tilde.p_up, ids)

    def tilde_gen_p_dn(self):
        ids = [g.id for g in self.generators]
        return self._tilde_vec(self.gen_p_dn(), self.tilde.p_dn, ids)

    def tilde_gen_capacity(self):
        ids = [g.id for g in self.generators]
        return self._tilde_vec(self.gen_capacity(), self.tilde.capacity, ids)

    def tilde_line_limits(self):
        ids = [ln.id for ln in self.lines]
        return self._tilde_vec(self.line_limits(), self.tilde.limit, ids)

    @property
    def tilde_load_shed(self):
        v = self.tilde.load_shed
        return self.penalties.load_shed if v is None else v

    @property
    def tilde_spill(self):
        v = self.tilde.spill
        return self.penalties.spill if v is None else v


@dataclass(frozen=True)
class IncidenceMaps:
    """M: bus x generator membership; N: zone x generator membership."""

    M: np.ndarray
    N: np.ndarray


@dataclass(frozen=True)
class PtdfMatrix:
    """Line x bus sensitivity: flows = B @ nodal net injections, referenced
    to the slack bus (its column is identically zero)."""

    B: np.ndarray
    slack: int


def _check_case(case: SystemCase):
    bus_ids = [b.id for b in case.buses]
    if len(set(bus_ids)) != len(bus_ids):
        raise CaseError("duplicate bus ids")
    zone_ids = {z.id for z in case.zones}
    if len(zone_ids) != len(case.zones):
        raise CaseError("duplicate zone ids")
    bus_set = set(bus_ids)
    max_cost = 0.0
    for g in case.generators:
        if g.bus not in bus_set:
            raise CaseError(f"generator {g.id} references unknown bus {g.bus}")
        if g.zone is not None and g.zone not in zone_ids:
            raise CaseError(f"generator {g.id} references unknown zone {g.zone}")
        for fieldname in ("capacity", "cost", "rbar_up", "rbar_dn", "p_up", "p_dn"):
            if getattr(g, fieldname) < 0:
                raise CaseError(f"generator {g.id}: {fieldname} must be >= 0")
        max_cost = max(max_cost, g.cost)
    for ln in case.lines:
        if ln.from_bus == ln.to_bus:
            raise CaseError(f"line {ln.id} connects a bus to itself")
        if ln.from_bus not in bus_set or ln.to_bus not in bus_set:
            raise CaseError(f"line {ln.id} references an unknown bus")
        if ln.reactance <= 0:
            raise CaseError(f"line {ln.id}: reactance must be > 0")
    if not (case.penalties.load_shed > case.penalties.spill > max_cost):
        raise CaseError(
            "complete-recourse pricing requires load_shed > spill > max generator cost"
        )
    for b in case.buses:
        if b.load < 0:
            raise CaseError(f"bus {b.id}: load must be >= 0")
    if case.demand_scale <= 0:
        raise CaseError("demand_scale must be > 0")


def bus_zone_map(case: SystemCase) -> dict:
    """Zone assignment for buses, needed when per-bus statistics must be
    aggregated zonally (the exogenous reserve rule).  Zones formally
    contain generators, not buses, so a bus follows the plurality zone of
    its attached generators; ties and generator-less buses fall to the
    lowest zone id."""
    if not case.zones:
        raise CaseError("case has no zones")
    lowest = min(z.id for z in case.zones)
    votes: dict = {b.id: {} for b in case.buses}
    for g in case.generators:
        if g.zone is not None:
            votes[g.bus][g.zone] = votes[g.bus].get(g.zone, 0) + 1
    out = {}
    for b in case.buses:
        if votes[b.id]:
            best = max(votes[b.id].items(), key=lambda kv: (kv[1], -kv[0]))
            out[b.id] = best[0]
        else:
            out[b.id] = lowest
    return out


def incidence_maps(case: SystemCase) -> IncidenceMaps:
    bi = case.bus_index()
    zi = case.zone_index()
    M = np.zeros((case.n_buses, case.n_gens))
    N = np.zeros((case.n_zones, case.n_gens))
    for j, g in enumerate(case.generators):
        M[bi[g.bus], j] = 1.0
        if g.zone is not None:
            N[zi[g.zone], j] = 1.0
    return IncidenceMaps(M=M, N=N)


# ----------------------------------------------------------------------
# JSON case format


def case_to_dict(case: SystemCase) -> dict:
    d = {
        "name": case.name,
        "buses": [{"id": b.id, "name": b.name, "load": b.load} for b in case.buses],
        "generators": [
            {
                "id": g.id,
                "bus": g.bus,
                "capacity": g.capacity,
                "cost": g.cost,
                "rbar_up": g.rbar_up,
                "rbar_dn": g.rbar_dn,
                "p_up": g.p_up,
                "p_dn": g.p_dn,
                "zone": g.zone,
            }
            for g in case.generators
        ],
        "lines": [
            {
                "id": ln.id,
                "from": ln.from_bus,
                "to": ln.to_bus,
                "reactance": ln.reactance,
                "limit": ln.limit,
            }
            for ln in case.lines
        ],
        "zones": [{"id": z.id} for z in case.zones],
        "penalties": {
            "load_shed": case.penalties.load_shed,
            "spill": case.penalties.spill,
        },
        "demand_scale": case.demand_scale,
    }
    t = case.tilde
    tilde = {}
    for key in ("cost", "p_up", "p_dn", "capacity", "limit"):
        val = getattr(t, key)
        if val:
            tilde[key] = {str(k): v for k, v in val.items()}
    if t.load_shed is not None:
        tilde["load_shed"] = t.load_shed
    if t.spill is not None:
        tilde["spill"] = t.spill
    if tilde:
        d["tilde"] = tilde
    return d


def _require(d, key, path, typ=None):
    if key not in d:
        raise CaseError(f"{path}: missing field '{key}'")
    v = d[key]
    if typ is not None and not isinstance(v, typ):
        raise CaseError(f"{path}.{key}: expected {typ}, got {type(v).__name__}")
    return v


def case_from_dict(d: dict) -> SystemCase:
    buses = tuple(
        Bus(
            id=int(_require(bd, "id", f"buses[{i}]")),
            name=str(bd.get("name", "")),
            load=float(bd.get("load", 0.0)),
        )
        for i, bd in enumerate(_require(d, "buses", "case", list))
    )
    generators = tuple(
        Generator(
            id=int(_require(gd, "id", f"generators[{i}]")),
            bus=int(_require(gd, "bus", f"generators[{i}]")),
            capacity=float(_require(gd, "capacity", f"generators[{i}]")),
            cost=float(_require(gd, "cost", f"generators[{i}]")),
            rbar_up=float(_require(gd, "rbar_up", f"generators[{i}]")),
            rbar_dn=float(_require(gd, "rbar_dn", f"generators[{i}]")),
            p_up=float(_require(gd, "p_up", f"generators[{i}]")),
            p_dn=float(_require(gd, "p_dn", f"generators[{i}]")),
            zone=None if gd.get("zone") is None else int(gd["zone"]),
        )
        for i, gd in enumerate(_require(d, "generators", "case", list))
    )
    lines = tuple(
        Line(
            id=int(_require(ld, "id", f"lines[{i}]")),
            from_bus=int(_require(ld, "from", f"lines[{i}]")),
            to_bus=int(_require(ld, "to", f"lines[{i}]")),
            reactance=float(_require(ld, "reactance", f"lines[{i}]")),
            limit=float(_require(ld, "limit", f"lines[{i}]")),
        )
        for i, ld in enumerate(d.get("lines", []))
    )
    zones = tuple(Zone(id=int(_require(zd, "id", f"zones[{i}]")))
                  for i, zd in enumerate(d.get("zones", [])))
    pen = _require(d, "penalties", "case", dict)
    penalties = Penalties(
        load_shed=float(_require(pen, "load_shed", "penalties")),
        spill=float(_require(pen, "spill", "penalties")),
    )
    td = d.get("tilde", {})
    tilde = TildeBlock(
        cost={int(k): float(v) for k, v in td.get("cost", {}).items()},
        p_up={int(k): float(v) for k, v in td.get("p_up", {}).items()},
        p_dn={int(k): float(v) for k, v in td.get("p_dn", {}).items()},
        capacity={int(k): float(v) for k, v in td.get("capacity", {}).items()},
        limit={int(k): float(v) for k, v in td.get("limit", {}).items()},
        load_shed=td.get("load_shed"),
        spill=td.get("spill"),
    )
    return SystemCase(
        buses=buses,
        generators=generators,
        lines=lines,
        zones=zones,
        penalties=penalties,
        tilde=tilde,
        demand_scale=float(d.get("demand_scale", 1.0)),
        name=str(d.get("name", "")),
    )


def parse_case(path) -> SystemCase:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise CaseError(f"{path}: invalid JSON ({exc})") from exc
    return case_from_dict(d)


def save_case(case: SystemCase, path):
    with open(path, "w") as fh:
        json.dump(case_to_dict(case), fh, indent=1)
        fh.write("\n")


def apply_paper_transforms(
    case: SystemCase,
    flow_factor: float = 0.75,
    demand_factor: float = 1.0,
    reserve_cap_frac: float = 0.30,
    reserve_price_frac: float = 0.30,
) -> SystemCase:
    """Derive reserve capabilities and prices from energy data and stress
    the network: flow limits scaled by ``flow_factor``, reserve caps set to
    ``reserve_cap_frac`` of capacity, reserve prices to
    ``reserve_price_frac`` of the energy cost, and the demand multiplier
    recorded for data generation."""
    for factor, nm in (
        (flow_factor, "flow_factor"),
        (demand_factor, "demand_factor"),
        (reserve_cap_frac, "reserve_cap_frac"),
        (reserve_price_frac, "reserve_price_frac"),
    ):
        if not (0 < factor <= 10):
            raise CaseError(f"{nm} must lie in (0, 10], got {factor}")
    gens = tuple(
        replace(
            g,
            rbar_up=reserve_cap_frac * g.capacity,
            rbar_dn=reserve_cap_frac * g.capacity,
            p_up=reserve_price_frac * g.cost,
            p_dn=reserve_price_frac * g.cost,
        )
        for g in case.generators
    )
    lines = tuple(replace(ln, limit=flow_factor * ln.limit) for ln in case.lines)
    return replace(
        case,
        generators=gens,
        lines=lines,
        demand_scale=case.demand_scale * demand_factor,
    )


def compute_ptdf(case: SystemCase, slack: int | None = None) -> PtdfMatrix:
    """PTDF by reduced-Laplacian solve.

    B = diag(1/x) . A . (A^T diag(1/x) A)^{-1} with the slack row/column
    removed; the slack column is zero by construction.  Raises CaseError
    for a disconnected network (singular reduced Laplacian)."""
    nb, nl = case.n_buses, case.n_lines
    bi = case.bus_index()
    if slack is None:
        slack = min(b.id for b in case.buses)
    if slack not in bi:
        raise CaseError(f"slack bus {slack} not in case")
    if nl == 0:
        if nb > 1:
            raise CaseError("disconnected network: no lines but multiple buses")
        return PtdfMatrix(B=np.zeros((0, nb)), slack=slack)

    # connectivity check by traversal
    adj = {b.id: set() for b in case.buses}
    for ln in case.lines:
        adj[ln.from_bus].add(ln.to_bus)
        adj[ln.to_bus].add(ln.from_bus)
    seen = {slack}
    stack = [slack]
    while stack:
        for nxt in adj[stack.pop()]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    if len(seen) != nb:
        missing = sorted(set(bi) - seen)
        raise CaseError(f"disconnected network: buses {missing} unreachable from slack")

    A = np.zeros((nl, nb))
    w = np.zeros(nl)
    for k, ln in enumerate(case.lines):
        A[k, bi[ln.from_bus]] = 1.0
        A[k, bi[ln.to_bus]] = -1.0
        w[k] = 1.0 / ln.reactance
    L = A.T @ (w[:, None] * A)
    s = bi[slack]
    keep = [i for i in range(nb) if i != s]
    L_rr = L[np.ix_(keep, keep)]
    try:
        L_inv = np.linalg.inv(L_rr)
    except np.linalg.LinAlgError as exc:
        raise CaseError("singular reduced Laplacian") from exc
    B = np.zeros((nl, nb))
    B[:, keep] = (w[:, None] * A[:, keep]) @ L_inv
    return PtdfMatrix(B=B, slack=slack)
