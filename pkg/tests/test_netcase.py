"""Case parsing, invariants, paper transforms, and PTDF construction."""

import json

import numpy as np
import pytest

from adlearn.cases import case_path
from adlearn.netcase import (
    Bus,
    CaseError,
    Generator,
    Line,
    Penalties,
    SystemCase,
    Zone,
    apply_paper_transforms,
    case_from_dict,
    case_to_dict,
    compute_ptdf,
    incidence_maps,
    parse_case,
    save_case,
)


def tiny_case(lines=(), buses=None, loads=None):
    buses = buses or [1, 2]
    loads = loads or [1.0] * len(buses)
    return SystemCase(
        buses=tuple(Bus(id=b, load=l) for b, l in zip(buses, loads)),
        generators=(
            Generator(id=1, bus=buses[0], capacity=5.0, cost=2.0,
                      rbar_up=1.0, rbar_dn=1.0, p_up=0.5, p_dn=0.5, zone=1),
        ),
        lines=tuple(lines),
        zones=(Zone(id=1),),
        penalties=Penalties(load_shed=16.0, spill=6.0),
    )


class TestParse:
    def test_shipped_single_bus(self):
        case = parse_case(case_path("singlebus"))
        assert case.n_buses == 1
        assert case.n_lines == 0
        assert case.n_zones == 1
        assert [g.capacity for g in case.generators] == [5.0, 5.0, 2.5, 2.5]
        assert [g.cost for g in case.generators] == [1.0, 2.0, 4.0, 8.0]
        assert case.buses[0].load == 6.0

    def test_shipped_single_bus_penalties(self):
        # 8x and 3x the most expensive generator offer
        case = parse_case(case_path("singlebus"))
        assert case.penalties.load_shed == pytest.approx(64.0)
        assert case.penalties.spill == pytest.approx(24.0)

    def test_unknown_bus_names_generator(self):
        d = case_to_dict(tiny_case())
        d["generators"][0]["bus"] = 99
        with pytest.raises(CaseError, match="generator 1"):
            case_from_dict(d)

    def test_missing_field_reports_path(self):
        d = case_to_dict(tiny_case())
        del d["generators"][0]["capacity"]
        with pytest.raises(CaseError, match=r"generators\[0\]"):
            case_from_dict(d)

    def test_penalty_ordering_enforced(self):
        d = case_to_dict(tiny_case())
        d["penalties"] = {"load_shed": 5.0, "spill": 6.0}
        with pytest.raises(CaseError, match="complete-recourse"):
            case_from_dict(d)

    def test_bad_json(self, tmp_path):
        p = tmp_path / "broken.json"
        p.write_text("{not json")
        with pytest.raises(CaseError, match="invalid JSON"):
            parse_case(p)

    def test_round_trip_identity(self, tmp_path):
        for name in ("singlebus", "ieee24"):
            case = parse_case(case_path(name))
            p = tmp_path / f"{name}.json"
            save_case(case, p)
            again = parse_case(p)
            assert case_to_dict(again) == case_to_dict(case)


class TestTransforms:
    def test_reserve_rules(self):
        case = tiny_case()
        out = apply_paper_transforms(case, 0.75, 1.0, 0.30, 0.30)
        g = out.generators[0]
        assert g.rbar_up == pytest.approx(0.30 * 5.0)
        assert g.rbar_dn == pytest.approx(0.30 * 5.0)
        assert g.p_up == pytest.approx(0.30 * 2.0)
        assert g.p_dn == pytest.approx(0.30 * 2.0)

    def test_paper_values_example(self):
        # G=5, c=2 -> caps 1.5, prices 0.6
        case = tiny_case()
        out = apply_paper_transforms(case, 0.75, 1.0, 0.30, 0.30)
        assert out.generators[0].rbar_up == pytest.approx(1.5)
        assert out.generators[0].p_up == pytest.approx(0.6)

    def test_identity_factors(self):
        case = tiny_case(lines=[Line(id=1, from_bus=1, to_bus=2, reactance=0.1, limit=10.0)])
        base = apply_paper_transforms(case, 1.0, 1.0, 1.0, 1.0)
        # reserve caps/prices become exact copies of energy data at factor 1
        assert base.lines[0].limit == case.lines[0].limit
        assert base.demand_scale == case.demand_scale
        assert base.generators[0].rbar_up == pytest.approx(case.generators[0].capacity)

    def test_demand_factor_recorded(self):
        case = tiny_case()
        out = apply_paper_transforms(case, demand_factor=0.9)
        assert out.demand_scale == pytest.approx(0.9)
        assert out.bus_loads() == pytest.approx(0.9 * np.array([1.0, 1.0]))

    def test_factor_range_check(self):
        with pytest.raises(CaseError):
            apply_paper_transforms(tiny_case(), flow_factor=0.0)
        with pytest.raises(CaseError):
            apply_paper_transforms(tiny_case(), demand_factor=11.0)


class TestIncidence:
    def test_maps(self):
        case = parse_case(case_path("singlebus"))
        maps = incidence_maps(case)
        assert maps.M.shape == (1, 4)
        assert np.all(maps.M == 1.0)
        assert maps.N.shape == (1, 4)
        assert np.all(maps.M.sum(axis=0) == 1.0)
        assert np.all(maps.N.sum(axis=0) <= 1.0)


class TestPtdf:
    def test_two_bus_single_line(self):
        case = tiny_case(lines=[Line(id=1, from_bus=1, to_bus=2, reactance=0.5, limit=10.0)])
        ptdf = compute_ptdf(case, slack=1)
        assert ptdf.B.shape == (1, 2)
        assert ptdf.B[0, 0] == pytest.approx(0.0, abs=1e-12)
        # unit injection at bus 2 flows toward the slack, against the
        # line's from->to orientation
        assert ptdf.B[0, 1] == pytest.approx(-1.0)

    def test_triangle_splits_two_thirds(self):
        # hand solution of the 2x2 reduced Laplacian with equal reactances:
        # injection at bus 2 -> theta = x/3 * (2, 1) on buses (2, 3), so the
        # direct line 1-2 carries 2/3 (toward bus 1) and 1/3 goes around.
        lines = [
            Line(id=1, from_bus=1, to_bus=2, reactance=1.0, limit=10.0),
            Line(id=2, from_bus=2, to_bus=3, reactance=1.0, limit=10.0),
            Line(id=3, from_bus=1, to_bus=3, reactance=1.0, limit=10.0),
        ]
        case = tiny_case(lines=lines, buses=[1, 2, 3], loads=[1.0, 1.0, 1.0])
        ptdf = compute_ptdf(case, slack=1)
        col2 = ptdf.B[:, 1]
        assert col2[0] == pytest.approx(-2.0 / 3.0)
        assert col2[1] == pytest.approx(1.0 / 3.0)
        assert col2[2] == pytest.approx(-1.0 / 3.0)

    def test_zero_line_single_bus(self):
        case = parse_case(case_path("singlebus"))
        ptdf = compute_ptdf(case)
        assert ptdf.B.shape == (0, 1)

    def test_disconnected_raises(self):
        case = tiny_case(buses=[1, 2, 3], loads=[1.0, 0.0, 0.0],
                         lines=[Line(id=1, from_bus=1, to_bus=2, reactance=0.1, limit=5.0)])
        with pytest.raises(CaseError, match="disconnected"):
            compute_ptdf(case, slack=1)

    def test_slack_column_zero_and_uniform_balanced_conservation(self):
        case = parse_case(case_path("ieee24"))
        ptdf = compute_ptdf(case)
        bi = case.bus_index()
        assert np.max(np.abs(ptdf.B[:, bi[ptdf.slack]])) == 0.0
        # uniform balanced injection: +1 everywhere, slack absorbs the total;
        # the induced flows must conserve power at every bus
        inj = np.ones(case.n_buses)
        inj[bi[ptdf.slack]] = 1.0 - case.n_buses
        flows = ptdf.B @ inj
        A = np.zeros((case.n_lines, case.n_buses))
        for k, ln in enumerate(case.lines):
            A[k, bi[ln.from_bus]] = 1.0
            A[k, bi[ln.to_bus]] = -1.0
        residual = A.T @ flows - inj
        assert np.max(np.abs(residual)) < 1e-9 * case.n_buses

    def test_flow_conservation(self):
        # flows from a unit injection at bus k (withdrawn at slack) conserve
        # power at every intermediate bus
        case = parse_case(case_path("ieee24"))
        ptdf = compute_ptdf(case)
        bi = case.bus_index()
        A = np.zeros((case.n_lines, case.n_buses))
        for k, ln in enumerate(case.lines):
            A[k, bi[ln.from_bus]] = 1.0
            A[k, bi[ln.to_bus]] = -1.0
        for bus in (5, 14, 22):
            inj = np.zeros(case.n_buses)
            inj[bi[bus]] = 1.0
            flows = ptdf.B @ inj
            net = A.T @ flows  # outflow per bus
            expect = inj.copy()
            expect[bi[ptdf.slack]] -= 1.0
            assert net == pytest.approx(expect, abs=1e-9)
