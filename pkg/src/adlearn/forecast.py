"""Affine forecast models for demand and zonal reserve requirements.

A model is a list of blocks, one per bus (demand) or zone (up/down
reserves); each block is an affine function of named features and carries
a trainable flag.  The four study variants differ only in which blocks are
trainable:

* ``ls-ex``   demand fixed to least squares, reserves fixed to the
              z-sigma exogenous rule (the open-loop benchmark);
* ``ls-opt``  reserves trainable;
* ``opt-ex``  demand trainable;
* ``opt-opt`` everything trainable.

Demand predictions are passed through unclamped (planning stays feasible
through its slack columns, and clamping would add a kink the estimation
problem never sees); reserve predictions are clamped at zero because the
planning problem requires nonnegative requirements.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .datagen import Dataset

VARIANTS = ("ls-ex", "ls-opt", "opt-ex", "opt-opt")

FEATURES = ("const", "lag1", "exog")


class ForecastError(Exception):
    pass


class RankError(ForecastError):
    """Singular normal equations in the least-squares fit."""


@dataclass(frozen=True)
class BlockSpec:
    name: str
    kind: str  # "demand" | "rup" | "rdn"
    key: int  # bus id for demand, zone id for reserves
    features: tuple
    trainable: bool

    def __post_init__(self):
        for f in self.features:
            if f not in FEATURES:
                raise ForecastError(f"block {self.name}: unknown feature {f!r}")
        if not self.features:
            raise ForecastError(f"block {self.name}: needs at least one feature")

    @property
    def size(self):
        return len(self.features)


@dataclass(frozen=True)
class ForecastSpec:
    demand: tuple
    rup: tuple
    rdn: tuple

    @property
    def blocks(self):
        return self.demand + self.rup + self.rdn

    @property
    def dim(self):
        return sum(b.size for b in self.blocks)

    @property
    def trainable_dim(self):
        return sum(b.size for b in self.blocks if b.trainable)

    def offsets(self):
        out = {}
        k = 0
        for b in self.blocks:
            out[b.name] = (k, k + b.size)
            k += b.size
        return out

    def validate_against(self, ds: Dataset):
        bus_set = set(ds.bus_ids)
        for b in self.demand:
            if b.key not in bus_set:
                raise ForecastError(f"block {b.name}: bus {b.key} not in dataset")
        for b in self.blocks:
            if "exog" in b.features and ds.exog is None:
                raise ForecastError(f"block {b.name}: dataset has no exogenous feature")


def spec_for_case(case, variant: str, demand_features=("const", "lag1"),
                  reserve_features=("const",)) -> ForecastSpec:
    """Per-bus demand blocks and per-zone reserve blocks for a variant."""
    if variant not in VARIANTS:
        raise ForecastError(f"unknown variant {variant!r}; pick one of {VARIANTS}")
    train_d = variant in ("opt-ex", "opt-opt")
    train_r = variant in ("ls-opt", "opt-opt")
    demand = tuple(
        BlockSpec(f"demand_bus{b.id}", "demand", b.id, tuple(demand_features), train_d)
        for b in case.buses
        if b.load > 0
    )
    rup = tuple(
        BlockSpec(f"rup_zone{z.id}", "rup", z.id, tuple(reserve_features), train_r)
        for z in case.zones
    )
    rdn = tuple(
        BlockSpec(f"rdn_zone{z.id}", "rdn", z.id, tuple(reserve_features), train_r)
        for z in case.zones
    )
    return ForecastSpec(demand=demand, rup=rup, rdn=rdn)


@dataclass
class ThetaVector:
    spec: ForecastSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, float)
        if self.values.shape != (self.spec.dim,):
            raise ForecastError(
                f"theta length {self.values.shape} != spec dim {self.spec.dim}"
            )

    def block(self, name: str) -> np.ndarray:
        lo, hi = self.spec.offsets()[name]
        return self.values[lo:hi]

    def replace_block(self, name: str, coeffs) -> "ThetaVector":
        lo, hi = self.spec.offsets()[name]
        vals = self.values.copy()
        vals[lo:hi] = coeffs
        return ThetaVector(self.spec, vals)

    def pack(self) -> dict:
        return {b.name: self.block(b.name).tolist() for b in self.spec.blocks}

    @classmethod
    def unpack(cls, spec: ForecastSpec, blocks: dict) -> "ThetaVector":
        vals = np.empty(spec.dim)
        off = spec.offsets()
        for b in spec.blocks:
            if b.name not in blocks:
                raise ForecastError(f"missing block {b.name}")
            lo, hi = off[b.name]
            coeffs = np.asarray(blocks[b.name], float)
            if coeffs.shape != (b.size,):
                raise ForecastError(f"block {b.name}: wrong coefficient count")
            vals[lo:hi] = coeffs
        return cls(spec, vals)

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.pack(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def from_json(cls, spec: ForecastSpec, path) -> "ThetaVector":
        with open(path) as fh:
            return cls.unpack(spec, json.load(fh))

    def trainable_values(self) -> np.ndarray:
        mask = trainable_mask(self.spec)
        return self.values[mask]

    def with_trainable(self, sub: np.ndarray) -> "ThetaVector":
        mask = trainable_mask(self.spec)
        vals = self.values.copy()
        vals[mask] = sub
        return ThetaVector(self.spec, vals)


def trainable_mask(spec: ForecastSpec) -> np.ndarray:
    mask = np.zeros(spec.dim, dtype=bool)
    off = spec.offsets()
    for b in spec.blocks:
        if b.trainable:
            lo, hi = off[b.name]
            mask[lo:hi] = True
    return mask


def _feature_columns(block: BlockSpec, ds: Dataset, bus_pos: dict) -> np.ndarray:
    cols = []
    for f in block.features:
        if f == "const":
            cols.append(np.ones(ds.T))
        elif f == "lag1":
            if block.kind != "demand":
                raise ForecastError(f"block {block.name}: lag1 is a demand feature")
            cols.append(ds.lag1[:, bus_pos[block.key]])
        elif f == "exog":
            cols.append(ds.exog)
    return np.column_stack(cols)


def design_matrices(spec: ForecastSpec, ds: Dataset) -> dict:
    """Per-block (T, k) feature matrices; shared by prediction, the
    least-squares fit and the exact estimator's forecast-equality rows."""
    spec.validate_against(ds)
    bus_pos = {b: i for i, b in enumerate(ds.bus_ids)}
    return {b.name: _feature_columns(b, ds, bus_pos) for b in spec.blocks}


def predict_all(spec: ForecastSpec, theta: ThetaVector, ds: Dataset):
    """Forecast the whole dataset: (D_hat (T,n_dem), R_up (T,n_zone),
    R_dn (T,n_zone)); reserves clamped at zero, demand left free."""
    X = design_matrices(spec, ds)
    dem = np.column_stack([X[b.name] @ theta.block(b.name) for b in spec.demand])
    rup = np.column_stack([X[b.name] @ theta.block(b.name) for b in spec.rup])
    rdn = np.column_stack([X[b.name] @ theta.block(b.name) for b in spec.rdn])
    return dem, np.maximum(rup, 0.0), np.maximum(rdn, 0.0)


def predict(spec: ForecastSpec, theta: ThetaVector, lag1, exog=None):
    """Single-period forecast from a lag vector (one entry per demand
    block, in block order) and the optional exogenous value."""
    lag1 = np.atleast_1d(np.asarray(lag1, float))
    if lag1.shape != (len(spec.demand),):
        raise ForecastError("lag vector length must match demand blocks")

    def run(block, lag_val):
        coeffs = theta.block(block.name)
        val = 0.0
        for f, c in zip(block.features, coeffs):
            if f == "const":
                val += c
            elif f == "lag1":
                val += c * lag_val
            elif f == "exog":
                if exog is None:
                    raise ForecastError(f"block {block.name} needs the exogenous value")
                val += c * exog
        return val

    dem = np.array([run(b, lag1[i]) for i, b in enumerate(spec.demand)])
    rup = np.array([run(b, 0.0) for b in spec.rup])
    rdn = np.array([run(b, 0.0) for b in spec.rdn])
    return dem, np.maximum(rup, 0.0), np.maximum(rdn, 0.0)


def fit_least_squares(spec: ForecastSpec, ds: Dataset):
    """Independent per-bus ordinary least squares via QR.

    Returns ``(theta, resid_std)`` where the reserve blocks of theta are
    zero (they have no statistical target; see exogenous_reserve_rule) and
    ``resid_std`` maps bus id -> residual standard deviation.
    """
    X = design_matrices(spec, ds)
    bus_pos = {b: i for i, b in enumerate(ds.bus_ids)}
    vals = np.zeros(spec.dim)
    off = spec.offsets()
    resid_std = {}
    for b in spec.demand:
        M = X[b.name]
        if ds.T <= M.shape[1]:
            raise ForecastError(f"block {b.name}: need T > {M.shape[1]} samples")
        y = ds.demand[:, bus_pos[b.key]]
        q, r = np.linalg.qr(M)
        diag = np.abs(np.diag(r))
        if np.min(diag) < 1e-10 * max(1.0, np.max(diag)):
            raise RankError(f"block {b.name}: collinear features")
        coef = np.linalg.solve(r, q.T @ y)
        lo, hi = off[b.name]
        vals[lo:hi] = coef
        resid = y - M @ coef
        dof = max(ds.T - M.shape[1], 1)
        resid_std[b.key] = float(np.sqrt(resid @ resid / dof))
    return ThetaVector(spec, vals), resid_std


def exogenous_reserve_rule(resid_std: dict, bus_zone: dict, zone_ids, z: float = 1.96):
    """z-sigma zonal reserve requirements from per-bus residual spreads.

    Buses are aggregated root-sum-square within each zone (independent
    errors); both directions get the same margin.  Returns
    ``(R_up, R_dn)`` as arrays aligned with ``zone_ids``.
    """
    if z <= 0:
        raise ForecastError("z must be > 0")
    var = {zid: 0.0 for zid in zone_ids}
    for bus, sd in resid_std.items():
        if sd < 0:
            raise ForecastError("negative residual std")
        zid = bus_zone[bus]
        var[zid] += sd * sd
    sig = np.array([np.sqrt(var[zid]) for zid in zone_ids])
    return z * sig, z * sig


def exogenous_theta(spec: ForecastSpec, theta: ThetaVector, resid_std: dict,
                    bus_zone: dict, z: float = 1.96) -> ThetaVector:
    """Write the z-sigma rule into the constant term of every reserve
    block (other reserve coefficients zeroed)."""
    zone_ids = [b.key for b in spec.rup]
    rup, rdn = exogenous_reserve_rule(resid_std, bus_zone, zone_ids, z)
    out = theta
    for blocks, vals in ((spec.rup, rup), (spec.rdn, rdn)):
        for b, v in zip(blocks, vals):
            coeffs = np.zeros(b.size)
            coeffs[b.features.index("const")] = v
            out = out.replace_block(b.name, coeffs)
    return out
