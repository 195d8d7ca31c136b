"""Synthetic demand processes and dataset persistence.

Per-bus demands follow independent AR(1) recursions
``D_t = phi0 + phi1 * D_{t-1} + eps_t`` with Gaussian noise, truncated at
zero.  The heteroscedastic variant drives the noise standard deviation
with an exogenous AR(1) signal ``E_t``, which is also exposed as a feature
for dynamic reserve models.

Datasets are stored as a CSV (``t,bus_<id>...,feat_<name>...``) next to a
JSON manifest recording seed and generator configuration.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np


class DataError(Exception):
    pass


@dataclass(frozen=True)
class ExogenousVariance:
    """AR(1) driver for the demand noise scale: sigma_t = max(E_t, 0)."""

    psi0: float = 0.2
    psi1: float = 0.8
    sigma_e: float = 0.3

    def __post_init__(self):
        if abs(self.psi1) >= 1:
            raise DataError("|psi1| must be < 1")
        if self.sigma_e < 0:
            raise DataError("sigma_e must be >= 0")


@dataclass(frozen=True)
class ArProcessConfig:
    """Per-bus AR(1) demand generator settings.

    ``sigma`` may be given directly (one value per bus) or derived from
    ``cv_target``: the untruncated stationary coefficient of variation,
    giving sigma = cv * mean * sqrt(1 - phi1^2).  Truncation at zero biases
    the realized CV slightly below the target; the tests budget for it.
    """

    phi0: np.ndarray
    phi1: np.ndarray
    sigma: np.ndarray | None = None
    cv_target: float | None = None
    seed: int = 0
    burn_in: int = 200
    exogenous: ExogenousVariance | None = None
    bus_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "phi0", np.atleast_1d(np.asarray(self.phi0, float)))
        object.__setattr__(self, "phi1", np.atleast_1d(np.asarray(self.phi1, float)))
        if self.sigma is not None:
            object.__setattr__(self, "sigma", np.atleast_1d(np.asarray(self.sigma, float)))
        if self.phi0.shape != self.phi1.shape:
            raise DataError("phi0/phi1 shape mismatch")
        if np.any(np.abs(self.phi1) >= 1):
            raise DataError("|phi1| must be < 1 for a stationary process")
        if self.burn_in < 0:
            raise DataError("burn_in must be >= 0")
        if self.sigma is None and self.cv_target is None:
            raise DataError("give either sigma or cv_target")
        if self.sigma is not None and np.any(self.sigma < 0):
            raise DataError("sigma must be >= 0")
        if not self.bus_ids:
            object.__setattr__(self, "bus_ids", tuple(range(1, len(self.phi0) + 1)))

    @property
    def n_buses(self):
        return len(self.phi0)

    @property
    def means(self):
        return self.phi0 / (1.0 - self.phi1)

    def noise_std(self):
        if self.sigma is not None:
            return self.sigma
        return self.cv_target * self.means * np.sqrt(1.0 - self.phi1**2)

    @classmethod
    def for_case_loads(cls, loads, bus_ids, phi1=0.9, cv_target=0.4, seed=0,
                       exogenous=None):
        """Coefficients hitting the given long-run averages: phi0 so the
        stationary mean equals each bus load."""
        loads = np.asarray(loads, float)
        phi1v = np.full(loads.shape, float(phi1))
        phi0 = loads * (1.0 - phi1v)
        return cls(phi0=phi0, phi1=phi1v, cv_target=cv_target, seed=seed,
                   exogenous=exogenous, bus_ids=tuple(int(b) for b in bus_ids))


@dataclass
class Dataset:
    """Aligned observations: demand[t] is forecast from features[t], which
    carry the previous-step demand lags (and E_t when present)."""

    demand: np.ndarray  # (T, n_buses)
    lag1: np.ndarray  # (T, n_buses): demand at t-1
    exog: np.ndarray | None  # (T,) E_t, or None
    bus_ids: tuple
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.demand = np.asarray(self.demand, float)
        self.lag1 = np.asarray(self.lag1, float)
        if self.demand.ndim != 2:
            raise DataError("demand must be T x n_buses")
        if self.demand.shape != self.lag1.shape:
            raise DataError("lag features must align 1:1 with demand rows")
        if self.demand.shape[0] < 2:
            raise DataError("need T >= 2")
        if np.any(self.demand < 0) or np.any(self.lag1 < 0):
            raise DataError("negative demand in dataset")
        if self.exog is not None:
            self.exog = np.asarray(self.exog, float)
            if self.exog.shape != (self.demand.shape[0],):
                raise DataError("exogenous feature length mismatch")
        if len(self.bus_ids) != self.demand.shape[1]:
            raise DataError("bus id count mismatch")
        self.bus_ids = tuple(int(b) for b in self.bus_ids)

    @property
    def T(self):
        return self.demand.shape[0]

    @property
    def n_buses(self):
        return self.demand.shape[1]

    def slice(self, start, stop):
        return Dataset(
            demand=self.demand[start:stop],
            lag1=self.lag1[start:stop],
            exog=None if self.exog is None else self.exog[start:stop],
            bus_ids=self.bus_ids,
            provenance=dict(self.provenance, sliced=[int(start), int(stop)]),
        )


def generate(config: ArProcessConfig, T: int) -> Dataset:
    """Simulate the demand process; reproducible for a fixed seed."""
    if T < 2:
        raise DataError("need T >= 2")
    nb = config.n_buses
    rng = np.random.default_rng(np.random.Philox(config.seed))
    sigma = config.noise_std()
    total = config.burn_in + T + 1
    exog_series = None
    if config.exogenous is not None:
        ex = config.exogenous
        e = np.empty(total)
        e[0] = ex.psi0 / (1.0 - ex.psi1) if ex.psi1 != 1.0 else ex.psi0
        shocks = rng.normal(0.0, ex.sigma_e, size=total)
        for t in range(1, total):
            e[t] = ex.psi0 + ex.psi1 * e[t - 1] + shocks[t]
        exog_series = e
    d = np.empty((total, nb))
    d[0] = config.means
    noise = rng.normal(0.0, 1.0, size=(total, nb))
    for t in range(1, total):
        if exog_series is None:
            scale = sigma
        else:
            scale = np.maximum(exog_series[t], 0.0) * np.ones(nb)
        step = config.phi0 + config.phi1 * d[t - 1] + scale * noise[t]
        d[t] = np.maximum(step, 0.0)
    start = config.burn_in + 1
    demand = d[start : start + T]
    lag1 = d[start - 1 : start + T - 1]
    exog = None if exog_series is None else exog_series[start : start + T]
    prov = {
        "seed": int(config.seed),
        "burn_in": int(config.burn_in),
        "phi0": config.phi0.tolist(),
        "phi1": config.phi1.tolist(),
        "sigma": config.noise_std().tolist(),
        "cv_target": config.cv_target,
        "T": int(T),
        "bus_ids": list(config.bus_ids),
        "exogenous": None
        if config.exogenous is None
        else {
            "psi0": config.exogenous.psi0,
            "psi1": config.exogenous.psi1,
            "sigma_e": config.exogenous.sigma_e,
        },
    }
    return Dataset(demand=demand, lag1=lag1, exog=exog,
                   bus_ids=config.bus_ids, provenance=prov)


def save(ds: Dataset, path):
    """CSV with a JSON sidecar manifest at ``<path>.manifest.json``."""
    path = str(path)
    header = (
        ["t"]
        + [f"bus_{b}" for b in ds.bus_ids]
        + [f"feat_lag1_{b}" for b in ds.bus_ids]
        + (["feat_exog"] if ds.exog is not None else [])
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(ds.T):
            row = [t] + list(ds.demand[t]) + list(ds.lag1[t])
            if ds.exog is not None:
                row.append(ds.exog[t])
            w.writerow(row)
    with open(path + ".manifest.json", "w") as fh:
        json.dump(ds.provenance, fh, indent=1)
        fh.write("\n")


def load(path) -> Dataset:
    path = str(path)
    with open(path, newline="") as fh:
        rdr = csv.reader(fh)
        try:
            header = next(rdr)
        except StopIteration:
            raise DataError(f"{path}: empty dataset file") from None
        rows = list(rdr)
    bus_cols = [h for h in header if h.startswith("bus_")]
    lag_cols = [h for h in header if h.startswith("feat_lag1_")]
    has_exog = "feat_exog" in header
    if not bus_cols or len(bus_cols) != len(lag_cols) or header[0] != "t":
        raise DataError(f"{path}: malformed header {header!r}")
    bus_ids = tuple(int(h.split("_", 1)[1]) for h in bus_cols)
    idx = {h: i for i, h in enumerate(header)}
    try:
        data = np.array([[float(v) for v in row] for row in rows])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric cell ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise DataError(f"{path}: ragged or truncated rows")
    demand = data[:, [idx[h] for h in bus_cols]]
    lag1 = data[:, [idx[h] for h in lag_cols]]
    exog = data[:, idx["feat_exog"]] if has_exog else None
    prov = {}
    try:
        with open(path + ".manifest.json") as fh:
            prov = json.load(fh)
    except FileNotFoundError:
        pass
    return Dataset(demand=demand, lag1=lag1, exog=exog, bus_ids=bus_ids,
                   provenance=prov)
