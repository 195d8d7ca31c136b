"""Solver correctness: hand examples, duals, oracle equivalence, invariants."""

import numpy as np
import pytest

from adlearn.lp import (
    LE,
    EQ,
    GE,
    Basis,
    IterationLimitError,
    LinearProgram,
    LpFormatError,
    LpStatus,
    NotOptimalError,
    PerturbationPolicy,
    extract_duals,
    solve,
)

from oracles import enumerate_vertex_optimum, random_box_lp


def lp1(c, A, senses, b, **kw):
    return LinearProgram(np.array(c, float), np.array(A, float), senses, np.array(b, float), **kw)


class TestExamples:
    def test_single_variable_upper_bound(self):
        # min -x s.t. x <= 3, x >= 0
        sol = solve(lp1([-1.0], [[1.0]], [LE], [3.0]))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.x[0] == pytest.approx(3.0, abs=1e-9)
        assert sol.objective == pytest.approx(-3.0, abs=1e-9)

    def test_contradictory_rows(self):
        # min x s.t. x >= 1, x <= 0
        sol = solve(lp1([1.0], [[1.0], [1.0]], [GE, LE], [1.0, 0.0]))
        assert sol.status is LpStatus.INFEASIBLE

    def test_unbounded(self):
        sol = solve(lp1([-1.0], [[1.0]], [GE], [1.0]))
        assert sol.status is LpStatus.UNBOUNDED

    def test_equality_row(self):
        sol = solve(lp1([1.0, 2.0], [[1.0, 1.0]], [EQ], [4.0]))
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective == pytest.approx(4.0, abs=1e-9)
        assert sol.x == pytest.approx([4.0, 0.0], abs=1e-8)

    def test_negative_lower_bounds(self):
        lp = lp1(
            [1.0, 1.0],
            [[1.0, 2.0]],
            [GE],
            [-1.0],
            lb=np.array([-5.0, -5.0]),
            ub=np.array([5.0, 5.0]),
        )
        sol = solve(lp)
        assert sol.status is LpStatus.OPTIMAL
        # cheapest way to reach a >= -1 with both costs 1: x2 does the work
        assert sol.objective == pytest.approx(-5.0 + (-1.0 + 5.0) / 2.0, abs=1e-8)

    def test_free_variable(self):
        lp = lp1(
            [1.0],
            [[1.0]],
            [GE],
            [-7.5],
            lb=np.array([-np.inf]),
            ub=np.array([np.inf]),
        )
        sol = solve(lp)
        assert sol.status is LpStatus.OPTIMAL
        assert sol.objective == pytest.approx(-7.5, abs=1e-9)


class TestDuals:
    def test_shadow_price_of_binding_bound(self):
        sol = solve(lp1([1.0], [[1.0]], [GE], [1.0]))
        duals, _ = extract_duals(sol)
        assert duals[0] == pytest.approx(1.0, abs=1e-9)

    def test_shadow_price_scales_with_cost(self):
        sol = solve(lp1([2.0], [[1.0]], [GE], [3.0]))
        duals, _ = extract_duals(sol)
        assert duals[0] == pytest.approx(2.0, abs=1e-9)

    def test_sign_conventions(self):
        # binding >= row: pi >= 0; binding <= row on a pushed variable: pi <= 0
        sol = solve(lp1([1.0, -1.0], [[1.0, 0.0], [0.0, 1.0]], [GE, LE], [1.0, 2.0]))
        duals, _ = extract_duals(sol)
        assert duals[0] >= -1e-9
        assert duals[1] <= 1e-9

    def test_strong_duality_random(self):
        rng = np.random.default_rng(7)
        done = 0
        while done < 20:
            c, A, senses, b, lb, ub = random_box_lp(rng)
            senses = [{"<=": LE, ">=": GE, "==": EQ}[s] for s in senses]
            sol = solve(LinearProgram(c, A, senses, b, lb=lb, ub=ub))
            if sol.status is not LpStatus.OPTIMAL:
                continue
            duals, red = extract_duals(sol)
            # c.x = pi.b + d.x restricted to nonbasic columns; with d = c - A^T pi
            # the identity collapses to c.x - pi.b - d.x == 0 for ALL columns
            # because d vanishes on basic ones.
            gap = sol.objective - duals @ b - red @ sol.x
            assert abs(gap) <= 1e-6 * (1 + abs(sol.objective))
            done += 1

    def test_non_optimal_raises(self):
        sol = solve(lp1([1.0], [[1.0], [1.0]], [GE, LE], [1.0, 0.0]))
        with pytest.raises(NotOptimalError):
            extract_duals(sol)


class TestOracleEquivalence:
    def test_random_lps_match_vertex_enumeration(self):
        # spec-scale slice of acceptance criterion 1
        rng = np.random.default_rng(42)
        for _ in range(10):
            c = rng.normal(size=8)
            A = rng.normal(size=(5, 8))
            lb = rng.uniform(-1.5, 0.0, size=8)
            ub = lb + rng.uniform(0.5, 2.5, size=8)
            x0 = rng.uniform(lb, ub)
            b = A @ x0 + rng.uniform(-0.2, 0.8, size=5)
            senses = [LE] * 5
            status, ref = enumerate_vertex_optimum(c, A, ["<="] * 5, b, lb, ub)
            sol = solve(LinearProgram(c, A, senses, b, lb=lb, ub=ub))
            assert status == "optimal"
            assert sol.status is LpStatus.OPTIMAL
            assert sol.objective == pytest.approx(ref, abs=1e-8)

    def test_classification_agreement(self):
        rng = np.random.default_rng(3)
        n_inf = 0
        for _ in range(40):
            c, A, senses_o, b, lb, ub = random_box_lp(rng)
            senses = [{"<=": LE, ">=": GE, "==": EQ}[s] for s in senses_o]
            status, ref = enumerate_vertex_optimum(c, A, senses_o, b, lb, ub)
            sol = solve(LinearProgram(c, A, senses, b, lb=lb, ub=ub))
            if status == "infeasible":
                n_inf += 1
                assert sol.status is LpStatus.INFEASIBLE
            else:
                assert sol.status is LpStatus.OPTIMAL
                assert sol.objective == pytest.approx(ref, abs=1e-8)
        assert n_inf > 0  # generator exercised both classes

    def test_scipy_cross_check(self):
        from scipy.optimize import linprog

        rng = np.random.default_rng(11)
        for _ in range(15):
            c, A, senses_o, b, lb, ub = random_box_lp(rng)
            senses = [{"<=": LE, ">=": GE, "==": EQ}[s] for s in senses_o]
            sol = solve(LinearProgram(c, A, senses, b, lb=lb, ub=ub))
            au, bu, ae, be = [], [], [], []
            for i, s in enumerate(senses_o):
                if s == "<=":
                    au.append(A[i]); bu.append(b[i])
                elif s == ">=":
                    au.append(-A[i]); bu.append(-b[i])
                else:
                    ae.append(A[i]); be.append(b[i])
            ref = linprog(
                c,
                A_ub=np.array(au) if au else None,
                b_ub=np.array(bu) if bu else None,
                A_eq=np.array(ae) if ae else None,
                b_eq=np.array(be) if be else None,
                bounds=list(zip(lb, ub)),
                method="highs",
            )
            if sol.status is LpStatus.OPTIMAL:
                assert ref.status == 0
                assert sol.objective == pytest.approx(ref.fun, abs=1e-7)
            elif sol.status is LpStatus.INFEASIBLE:
                assert ref.status == 2


class TestInvariants:
    def _random_feasible(self, rng):
        while True:
            c, A, senses_o, b, lb, ub = random_box_lp(rng)
            senses = [{"<=": LE, ">=": GE, "==": EQ}[s] for s in senses_o]
            lp = LinearProgram(c, A, senses, b, lb=lb, ub=ub)
            if solve(lp).status is LpStatus.OPTIMAL:
                return lp

    def test_primal_residuals_and_complementarity(self):
        rng = np.random.default_rng(5)
        for _ in range(15):
            lp = self._random_feasible(rng)
            sol = solve(lp)
            r = lp.A @ sol.x
            for i, s in enumerate(lp.senses):
                if s == LE:
                    assert r[i] <= lp.b[i] + 1e-7
                elif s == GE:
                    assert r[i] >= lp.b[i] - 1e-7
                else:
                    assert abs(r[i] - lp.b[i]) <= 1e-7
            assert np.all(sol.x >= lp.lb - 1e-7)
            assert np.all(sol.x <= lp.ub + 1e-7)
            # complementary slackness: dual * row slack
            duals, _ = extract_duals(sol)
            slack = lp.b - r
            assert np.max(np.abs(duals * slack)) <= 1e-6 * (1 + abs(sol.objective))

    def test_determinism(self):
        rng = np.random.default_rng(9)
        lp = self._random_feasible(rng)
        for pol in (PerturbationPolicy.none(), PerturbationPolicy.deterministic(1e-7)):
            a = solve(lp, perturb=pol)
            bsol = solve(lp, perturb=pol)
            assert a.basis == bsol.basis
            assert np.array_equal(a.x, bsol.x)
            assert a.objective == bsol.objective

    def test_perturbed_objective_invariant_under_column_permutation(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            lp = self._random_feasible(rng)
            perm = rng.permutation(lp.n_cols)
            lp_p = LinearProgram(
                lp.c[perm], lp.A[:, perm], list(lp.senses), lp.b,
                lb=lp.lb[perm], ub=lp.ub[perm],
            )
            pol = PerturbationPolicy.deterministic(1e-7)
            a = solve(lp, perturb=pol)
            bsol = solve(lp_p, perturb=pol)
            assert a.objective == pytest.approx(bsol.objective, abs=1e-8)

    def test_warm_start_matches_cold_on_rhs_resolves(self):
        rng = np.random.default_rng(21)
        lp = self._random_feasible(rng)
        base = solve(lp)
        for _ in range(100):
            b2 = lp.b + rng.normal(scale=0.05, size=lp.n_rows)
            lp2 = LinearProgram(lp.c, lp.A, list(lp.senses), b2, lb=lp.lb, ub=lp.ub)
            cold = solve(lp2)
            warm = solve(lp2, warm=base.basis)
            assert warm.status is cold.status
            if cold.status is LpStatus.OPTIMAL:
                assert warm.objective == pytest.approx(cold.objective, abs=1e-8)

    def test_warm_start_reuses_optimal_basis(self):
        lp = lp1(
            [1.0, 2.0, 4.0],
            [[1.0, 1.0, 1.0]],
            [GE],
            [5.0],
            ub=np.array([3.0, 3.0, 3.0]),
        )
        first = solve(lp)
        again = solve(lp, warm=first.basis)
        assert again.iterations == 0
        assert again.basis == first.basis

    def test_iteration_limit(self):
        rng = np.random.default_rng(2)
        lp = self._random_feasible(rng)
        with pytest.raises(IterationLimitError):
            solve(lp, max_iters=0)

    def test_reported_objective_uses_unperturbed_costs(self):
        lp = lp1([1.0], [[1.0]], [GE], [2.0])
        a = solve(lp, perturb=PerturbationPolicy.none())
        bsol = solve(lp, perturb=PerturbationPolicy.deterministic(1e-4))
        assert bsol.objective == pytest.approx(a.objective, abs=1e-12)
        assert bsol.objective == pytest.approx(lp.c @ bsol.x, abs=1e-12)


class TestValidation:
    def test_shape_mismatch(self):
        with pytest.raises(LpFormatError):
            lp1([1.0, 2.0], [[1.0]], [LE], [1.0])

    def test_bad_sense(self):
        with pytest.raises(LpFormatError):
            lp1([1.0], [[1.0]], ["<"], [1.0])

    def test_crossed_bounds(self):
        with pytest.raises(LpFormatError):
            lp1([1.0], [[1.0]], [LE], [1.0], lb=np.array([2.0]), ub=np.array([1.0]))

    def test_nonfinite_rhs(self):
        with pytest.raises(LpFormatError):
            lp1([1.0], [[1.0]], [LE], [np.inf])


class TestBackends:
    def test_backends_agree_on_objective(self):
        from adlearn.lp import simplex

        if simplex.cython_backend_available():
            backends = ("python", "cython")
        else:
            backends = ("python",)
            pytest.skip("compiled core not built")
        rng = np.random.default_rng(17)
        for _ in range(20):
            c, A, senses_o, b, lb, ub = random_box_lp(rng)
            senses = [{"<=": LE, ">=": GE, "==": EQ}[s] for s in senses_o]
            lp = LinearProgram(c, A, senses, b, lb=lb, ub=ub)
            res = {bk: solve(lp, backend=bk) for bk in backends}
            stats = {r.status for r in res.values()}
            assert len(stats) == 1
            if res["python"].status is LpStatus.OPTIMAL:
                assert res["python"].objective == pytest.approx(
                    res["cython"].objective, abs=1e-8
                )
