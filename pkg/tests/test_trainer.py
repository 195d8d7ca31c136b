"""Search behavior, training guarantees, and the cost operation."""

import numpy as np
import pytest

from adlearn.cases import case_path
from adlearn.datagen import ArProcessConfig, generate
from adlearn.forecast import ThetaVector, spec_for_case
from adlearn.netcase import case_from_dict, case_to_dict, parse_case
from adlearn.trainer import (
    TrainConfig,
    TrainerError,
    baseline_theta,
    cost,
    nelder_mead,
    simplex_init,
    train,
)


@pytest.fixture(scope="module")
def case():
    return parse_case(case_path("singlebus"))


def dataset(seed, T, cv=0.4):
    cfg = ArProcessConfig(phi0=np.array([0.6]), phi1=np.array([0.9]),
                          cv_target=cv, seed=seed)
    return generate(cfg, T=T)


class TestSimplexInit:
    def test_rule_arithmetic(self):
        verts = simplex_init(np.array([0.6, 0.9]))
        assert verts[0] == pytest.approx([0.6, 0.9])
        assert verts[1] == pytest.approx([0.63, 0.9])
        assert verts[2] == pytest.approx([0.6, 0.945])

    def test_floor_rule_at_zero(self):
        verts = simplex_init(np.zeros(3))
        steps = verts[1:] - verts[0]
        assert np.allclose(np.diag(steps), 0.01)

    def test_one_dimension_two_vertices(self):
        assert simplex_init(np.array([2.0])).shape == (2, 1)

    def test_empty_rejected(self):
        with pytest.raises(TrainerError):
            simplex_init(np.zeros(0))


class TestNelderMead:
    def test_quadratic_hook(self, case):
        spec = spec_for_case(case, "ls-opt")  # two trainable coefficients
        hook = lambda th: float((th.trainable_values()[0] - 1.0) ** 2
                                + (th.trainable_values()[1] + 2.0) ** 2)
        cfg = TrainConfig(init="zeros", max_iterations=500)
        res = train(cfg, spec, case, None, dataset(1, 16), cost_fn=hook)
        assert res.theta.trainable_values() == pytest.approx([1.0, -2.0], abs=1e-4)
        assert res.termination == "decrease"

    def test_trajectory_monotone_nonincreasing(self):
        f = lambda x: float((x[0] - 3.0) ** 2 + x[1] ** 2 + 0.1 * abs(x[0]))
        _, _, traj, _, _, _ = nelder_mead(f, np.array([10.0, -7.0]), TrainConfig())
        assert np.all(np.diff(traj) <= 1e-12)

    def test_projection_keeps_iterates_in_box(self):
        seen = []
        f = lambda x: float(-x[0]) if seen.append(x.copy()) is None else 0.0
        cfg = TrainConfig(max_iterations=50, theta_box=5.0)
        x, _, _, _, _, _ = nelder_mead(f, np.array([4.9]), cfg)
        assert all(abs(v[0]) <= 5.0 for v in seen)
        assert x[0] == pytest.approx(5.0)

    def test_budget_termination(self):
        f = lambda x: float(np.sum(x**2))
        _, _, _, iters, _, term = nelder_mead(
            f, np.array([1.0, 1.0]), TrainConfig(max_iterations=3)
        )
        assert iters == 3 and term == "budget"


class TestCostOperation:
    def test_noiseless_population_theta(self, case):
        ds = generate(ArProcessConfig(phi0=np.array([0.6]), phi1=np.array([0.9]),
                                      sigma=np.array([0.0]), seed=0), T=12)
        spec = spec_for_case(case, "opt-opt")
        theta = ThetaVector.unpack(spec, {
            "demand_bus1": [0.6, 0.9], "rup_zone1": [1.0], "rdn_zone1": [1.0],
        })
        # perfect forecast of the constant 6: energy 7.0, reserves 0.6+0.3
        assert cost(theta, case, None, spec, ds) == pytest.approx(7.9, abs=1e-8)

    def test_no_trainable_blocks_equals_baseline_pipeline(self, case):
        ds = dataset(3, 50)
        spec = spec_for_case(case, "ls-ex")
        res = train(TrainConfig(), spec, case, None, ds)
        assert res.iterations == 0
        assert res.termination == "no-trainable"
        assert res.in_sample_cost == res.ls_cost
        assert np.array_equal(res.theta.values, res.ls_theta.values)

    def test_doubling_shed_price_never_cheaper(self, case):
        ds = dataset(5, 40)
        spec = spec_for_case(case, "opt-opt")
        theta = baseline_theta(spec, case, ds)
        base = cost(theta, case, None, spec, ds)
        d = case_to_dict(case)
        d["penalties"]["load_shed"] = 128.0
        dear = case_from_dict(d)
        assert cost(theta, dear, None, spec, ds) >= base - 1e-9


class TestTrain:
    def test_in_sample_dominance(self, case):
        ds = dataset(7, 50)
        for variant in ("opt-opt", "ls-opt"):
            spec = spec_for_case(case, variant)
            res = train(TrainConfig(max_iterations=150), spec, case, None, ds)
            assert res.in_sample_cost <= res.ls_cost + 1e-9
            assert np.all(np.diff(res.trajectory) <= 1e-12)
            assert res.trajectory[-1] <= res.trajectory[0] + 1e-12

    def test_fixed_blocks_never_move(self, case):
        ds = dataset(9, 40)
        spec = spec_for_case(case, "opt-ex")  # reserves stay exogenous
        res = train(TrainConfig(max_iterations=60), spec, case, None, ds)
        for name in ("rup_zone1", "rdn_zone1"):
            assert np.array_equal(res.theta.block(name), res.ls_theta.block(name))
        assert not np.array_equal(res.theta.block("demand_bus1"),
                                  res.ls_theta.block("demand_bus1"))

    def test_determinism(self, case):
        ds = dataset(11, 30)
        spec = spec_for_case(case, "opt-opt")
        cfg = TrainConfig(max_iterations=40)
        a = train(cfg, spec, case, None, ds)
        b = train(cfg, spec, case, None, ds)
        assert np.array_equal(a.theta.values, b.theta.values)
        assert np.array_equal(a.trajectory, b.trajectory)
        assert a.iterations == b.iterations

    def test_threaded_cost_matches_serial(self, case):
        ds = dataset(13, 60)
        spec = spec_for_case(case, "opt-opt")
        theta = baseline_theta(spec, case, ds)
        assert cost(theta, case, None, spec, ds, jobs=4) == pytest.approx(
            cost(theta, case, None, spec, ds, jobs=1), abs=0.0
        )

    def test_budget_and_time_termination_reasons(self, case):
        ds = dataset(15, 20)
        spec = spec_for_case(case, "opt-opt")
        res = train(TrainConfig(max_iterations=2), spec, case, None, ds)
        assert res.termination == "budget"
        res = train(TrainConfig(time_limit=1e-9), spec, case, None, ds)
        assert res.termination == "time"

    def test_upward_steady_state_bias_majority(self, case):
        # with shed priced far above spill the trained forecast's long-run
        # level should sit above the least-squares one on most seeds
        up = 0
        seeds = (1, 2, 3, 4, 5, 6)
        for seed in seeds:
            ds = dataset(seed, 100)
            spec = spec_for_case(case, "opt-opt")
            res = train(TrainConfig(max_iterations=120), spec, case, None, ds)
            c = res.theta.block("demand_bus1")
            ls = res.ls_theta.block("demand_bus1")
            ss_opt = c[0] / (1.0 - c[1])
            ss_ls = ls[0] / (1.0 - ls[1])
            up += ss_opt >= ss_ls
        assert up >= len(seeds) // 2 + 1

    def test_invalid_config(self):
        with pytest.raises(TrainerError):
            TrainConfig(reflection=-1.0)
        with pytest.raises(TrainerError):
            TrainConfig(init="magic")
