"""Closed-loop training: minimize the mean assessed dispatch cost over the
trainable forecast coefficients with a Nelder-Mead search.

The search starts from the open-loop baseline (least-squares demand fit
plus the z-sigma exogenous reserve rule) unless told otherwise, so the
best vertex can never end up above the open-loop in-sample cost.  Fixed
blocks are excluded from the simplex dimension entirely; the box
|theta_i| <= theta_box is enforced by projection before every evaluation.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .dispatch import SamplePipeline
from .forecast import (
    ForecastSpec,
    ThetaVector,
    exogenous_theta,
    fit_least_squares,
    trainable_mask,
)
from .netcase import bus_zone_map


class TrainerError(Exception):
    pass


@dataclass
class TrainConfig:
    init: str = "least_squares"  # least_squares | given | zeros
    init_theta: ThetaVector | None = None
    z: float = 1.96
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    min_decrease: float = 1e-7
    diameter_tol: float = 1e-6
    max_iterations: int = 400
    time_limit: float | None = None
    jobs: int = 1
    seed: int = 0
    theta_box: float = 1e3
    copper_plate: bool = False
    nodal_balance: bool = False

    def __post_init__(self):
        for nm in ("reflection", "expansion", "contraction", "shrink"):
            if getattr(self, nm) <= 0:
                raise TrainerError(f"{nm} coefficient must be positive")
        if self.max_iterations <= 0 or (self.time_limit is not None
                                        and self.time_limit <= 0):
            raise TrainerError("iteration/time budgets must be positive")
        if self.init not in ("least_squares", "given", "zeros"):
            raise TrainerError(f"unknown init mode {self.init!r}")


@dataclass
class TrainResult:
    theta: ThetaVector
    in_sample_cost: float
    trajectory: np.ndarray
    iterations: int
    evaluations: int
    solves: int
    termination: str
    ls_theta: ThetaVector
    ls_cost: float
    wall_time: float = 0.0

    def to_dict(self):
        return {
            "theta": self.theta.pack(),
            "in_sample_cost": self.in_sample_cost,
            "trajectory": self.trajectory.tolist(),
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "solves": self.solves,
            "termination": self.termination,
            "ls_theta": self.ls_theta.pack(),
            "ls_cost": self.ls_cost,
            "wall_time": self.wall_time,
        }


def simplex_init(theta0: np.ndarray, rel_step: float = 0.05,
                 floor: float = 0.01) -> np.ndarray:
    """Initial simplex: vertex 0 is the start; vertex i offsets coordinate
    i-1 by max(rel_step*|x_i|, floor)."""
    theta0 = np.asarray(theta0, float)
    dim = theta0.shape[0]
    if dim < 1:
        raise TrainerError("need at least one trainable coefficient")
    verts = np.tile(theta0, (dim + 1, 1))
    for i in range(dim):
        verts[i + 1, i] += max(rel_step * abs(theta0[i]), floor)
    return verts


def nelder_mead(f, x0, config: TrainConfig):
    """Minimize ``f`` from ``x0``; returns (x_best, f_best, trajectory,
    iterations, evaluations, termination_reason).

    The trajectory records the best-vertex objective after every
    iteration, starting with the initial simplex's best.  Convergence is
    declared when one iteration improves the best vertex by less than
    ``min_decrease`` while the simplex diameter is below ``diameter_tol``.
    """
    lo, hi = -config.theta_box, config.theta_box
    proj = lambda x: np.clip(x, lo, hi)
    start = time.monotonic()
    n_eval = 0

    def ev(x):
        nonlocal n_eval
        n_eval += 1
        return f(x)

    verts = np.array([proj(v) for v in simplex_init(proj(np.asarray(x0, float)))])
    vals = np.array([ev(v) for v in verts])
    order = np.argsort(vals, kind="stable")
    verts, vals = verts[order], vals[order]
    trajectory = [float(vals[0])]
    termination = "budget"
    it = 0
    while it < config.max_iterations:
        if config.time_limit is not None and time.monotonic() - start > config.time_limit:
            termination = "time"
            break
        it += 1
        prev_best = vals[0]
        centroid = verts[:-1].mean(axis=0)
        xr = proj(centroid + config.reflection * (centroid - verts[-1]))
        fr = ev(xr)
        if fr < vals[0]:
            xe = proj(centroid + config.expansion * (xr - centroid))
            fe = ev(xe)
            if fe < fr:
                verts[-1], vals[-1] = xe, fe
            else:
                verts[-1], vals[-1] = xr, fr
        elif fr < vals[-2]:
            verts[-1], vals[-1] = xr, fr
        else:
            if fr < vals[-1]:
                xc = proj(centroid + config.contraction * (xr - centroid))
            else:
                xc = proj(centroid - config.contraction * (centroid - verts[-1]))
            fco = ev(xc)
            if fco < min(fr, vals[-1]):
                verts[-1], vals[-1] = xc, fco
            else:
                for i in range(1, len(verts)):
                    verts[i] = proj(verts[0] + config.shrink * (verts[i] - verts[0]))
                    vals[i] = ev(verts[i])
        order = np.argsort(vals, kind="stable")
        verts, vals = verts[order], vals[order]
        trajectory.append(float(vals[0]))
        diameter = float(np.max(np.linalg.norm(verts[1:] - verts[0], axis=1)))
        if prev_best - vals[0] < config.min_decrease and diameter < config.diameter_tol:
            termination = "decrease"
            break
    return verts[0], float(vals[0]), np.array(trajectory), it, n_eval, termination


def baseline_theta(spec: ForecastSpec, case, dataset, z: float = 1.96) -> ThetaVector:
    """Open-loop parameters: least-squares demand coefficients plus the
    z-sigma exogenous reserve constants."""
    theta, resid = fit_least_squares(spec, dataset)
    return exogenous_theta(spec, theta, resid, bus_zone_map(case), z=z)


def cost(theta: ThetaVector, case, ptdf, spec: ForecastSpec, dataset,
         jobs: int = 1, pipeline: SamplePipeline | None = None,
         copper_plate: bool = False, nodal_balance: bool = False) -> float:
    """Mean assessed cost of the plan-then-assess pipeline under theta."""
    if pipeline is None:
        pipeline = SamplePipeline(case, ptdf, spec, dataset,
                                  copper_plate=copper_plate,
                                  nodal_balance=nodal_balance)
    return pipeline.mean_cost(theta, jobs=jobs)


def train(config: TrainConfig, spec: ForecastSpec, case, ptdf, dataset,
          cost_fn=None) -> TrainResult:
    """Run the estimation loop; see the module docstring.

    ``cost_fn``, when given, replaces the dispatch objective with an
    arbitrary ``f(ThetaVector) -> float`` (used to validate the search in
    isolation)."""
    t0 = time.monotonic()
    pipeline = None
    if cost_fn is None:
        pipeline = SamplePipeline(case, ptdf, spec, dataset,
                                  copper_plate=config.copper_plate,
                                  nodal_balance=config.nodal_balance)
        cost_fn = lambda th: pipeline.mean_cost(th, jobs=config.jobs)

    ls_full = baseline_theta(spec, case, dataset, z=config.z)
    ls_cost = cost_fn(ls_full)

    if config.init == "given":
        if config.init_theta is None:
            raise TrainerError("init='given' needs init_theta")
        theta0 = config.init_theta
    elif config.init == "zeros":
        theta0 = ls_full.with_trainable(np.zeros(spec.trainable_dim))
    else:
        theta0 = ls_full

    mask = trainable_mask(spec)
    solves_per_eval = 2 * dataset.T
    if not mask.any():
        # nothing to optimize: the result is the baseline itself
        return TrainResult(
            theta=theta0, in_sample_cost=ls_cost,
            trajectory=np.array([ls_cost]), iterations=0, evaluations=1,
            solves=solves_per_eval, termination="no-trainable",
            ls_theta=ls_full, ls_cost=ls_cost,
            wall_time=time.monotonic() - t0,
        )

    def sub_cost(sub):
        return cost_fn(theta0.with_trainable(sub))

    x_best, f_best, traj, iters, evals, term = nelder_mead(
        sub_cost, theta0.trainable_values(), config
    )
    theta_hat = theta0.with_trainable(x_best)
    return TrainResult(
        theta=theta_hat,
        in_sample_cost=f_best,
        trajectory=traj,
        iterations=iters,
        evaluations=evals + 1,
        solves=(evals + 1) * solves_per_eval,
        termination=term,
        ls_theta=ls_full,
        ls_cost=ls_cost,
        wall_time=time.monotonic() - t0,
    )
