"""One-time construction of the shipped JSON case files.

Run from the repository root:

    python tools/make_cases.py

* ``singlebus``: the four-generator illustrative system.
* ``ieee24``: reconstruction of the single-area 24-bus reliability test
  system (RTS-79 loads, units and branch data) with the standard stress
  transforms applied (flow limits 75%, demand factor 0.9, reserve caps and
  prices at 30% of energy figures, shed/spill penalties at 8x/3x the most
  expensive unit).  The four-zone split is an approximation documented in
  the README.
* ``ieee118`` / ``ieee300``: structural stand-ins with the element counts
  of the original systems (buses/lines/generators/loads/zones) and
  plausible engineering values, generated deterministically.  The original
  network parameters are not redistributable from here; these files keep
  the multi-bus pipeline exercisable at desk scale.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from adlearn.netcase import (  # noqa: E402
    Bus,
    Generator,
    Line,
    Penalties,
    SystemCase,
    Zone,
    apply_paper_transforms,
    save_case,
)

OUT = os.path.join(os.path.dirname(__file__), "..", "src", "adlearn", "cases")


def single_bus():
    gens = []
    caps = [5.0, 5.0, 2.5, 2.5]
    costs = [1.0, 2.0, 4.0, 8.0]
    for i, (cap, cost) in enumerate(zip(caps, costs), start=1):
        gens.append(
            Generator(
                id=i, bus=1, capacity=cap, cost=cost,
                rbar_up=0.30 * cap, rbar_dn=0.30 * cap,
                p_up=0.30 * cost, p_dn=0.30 * cost, zone=1,
            )
        )
    return SystemCase(
        buses=(Bus(id=1, name="hub", load=6.0),),
        generators=tuple(gens),
        lines=(),
        zones=(Zone(id=1),),
        penalties=Penalties(load_shed=8 * 8.0, spill=3 * 8.0),
        name="singlebus",
    )


# RTS-79 bus loads (MW), 17 load buses totaling 2850 MW
RTS_LOADS = {
    1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175,
    10: 195, 13: 265, 14: 194, 15: 317, 16: 100, 18: 333, 19: 181, 20: 128,
}

# (from, to, X pu, rating MW)
RTS_LINES = [
    (1, 2, 0.0139, 175), (1, 3, 0.2112, 175), (1, 5, 0.0845, 175),
    (2, 4, 0.1267, 175), (2, 6, 0.1920, 175), (3, 9, 0.1190, 175),
    (3, 24, 0.0839, 400), (4, 9, 0.1037, 175), (5, 10, 0.0883, 175),
    (6, 10, 0.0605, 175), (7, 8, 0.0614, 175), (8, 9, 0.1651, 175),
    (8, 10, 0.1651, 175), (9, 11, 0.0839, 400), (9, 12, 0.0839, 400),
    (10, 11, 0.0839, 400), (10, 12, 0.0839, 400), (11, 13, 0.0476, 500),
    (11, 14, 0.0418, 500), (12, 13, 0.0476, 500), (12, 23, 0.0966, 500),
    (13, 23, 0.0865, 500), (14, 16, 0.0389, 500), (15, 16, 0.0173, 500),
    (15, 21, 0.0490, 500), (15, 21, 0.0490, 500), (15, 24, 0.0519, 500),
    (16, 17, 0.0259, 500), (16, 19, 0.0231, 500), (17, 18, 0.0144, 500),
    (17, 22, 0.1053, 500), (18, 21, 0.0259, 500), (18, 21, 0.0259, 500),
    (19, 20, 0.0396, 500), (19, 20, 0.0396, 500), (20, 23, 0.0216, 500),
    (20, 23, 0.0216, 500), (21, 22, 0.0678, 500),
]

# (bus, unit MW, linear cost $/MWh, count); cost = fuel linear term
RTS_UNITS = [
    (1, 20.0, 130.0, 2), (1, 76.0, 13.32, 2),
    (2, 20.0, 130.0, 2), (2, 76.0, 13.32, 2),
    (7, 100.0, 20.70, 3),
    (13, 197.0, 20.93, 3),
    (14, 0.0, 0.0, 1),  # synchronous condenser
    (15, 12.0, 56.56, 5), (15, 155.0, 10.52, 1),
    (16, 155.0, 10.52, 1),
    (18, 400.0, 5.47, 1),
    (21, 400.0, 5.47, 1),
    (22, 50.0, 0.01, 6),
    (23, 155.0, 10.52, 2), (23, 350.0, 11.85, 1),
]

RTS_ZONE_OF_GEN_BUS = {
    1: 1, 2: 1,
    7: 2, 13: 2, 14: 2,
    15: 3, 16: 3, 18: 3,
    21: 4, 22: 4, 23: 4,
}


def ieee24():
    buses = tuple(
        Bus(id=i, name=f"bus{i}", load=float(RTS_LOADS.get(i, 0.0)))
        for i in range(1, 25)
    )
    gens = []
    gid = 0
    for bus, cap, cost, count in RTS_UNITS:
        for _ in range(count):
            gid += 1
            gens.append(
                Generator(
                    id=gid, bus=bus, capacity=cap, cost=cost,
                    rbar_up=0.0, rbar_dn=0.0, p_up=0.0, p_dn=0.0,
                    zone=RTS_ZONE_OF_GEN_BUS[bus],
                )
            )
    lines = tuple(
        Line(id=k + 1, from_bus=f, to_bus=t, reactance=x, limit=float(r))
        for k, (f, t, x, r) in enumerate(RTS_LINES)
    )
    max_cost = max(g.cost for g in gens)
    case = SystemCase(
        buses=buses,
        generators=tuple(gens),
        lines=lines,
        zones=tuple(Zone(id=z) for z in (1, 2, 3, 4)),
        penalties=Penalties(load_shed=8 * max_cost, spill=3 * max_cost),
        name="ieee24",
    )
    return apply_paper_transforms(
        case, flow_factor=0.75, demand_factor=0.9,
        reserve_cap_frac=0.30, reserve_price_frac=0.30,
    )


def synthetic_grid(name, n_bus, n_line, n_gen, n_load, n_zone, demand_factor, seed):
    rng = np.random.default_rng(np.random.Philox(seed))
    load_buses = sorted(rng.choice(np.arange(1, n_bus + 1), size=n_load, replace=False))
    gen_buses = sorted(rng.choice(np.arange(1, n_bus + 1), size=n_gen, replace=True))
    unit_classes = [(60.0, 22.0), (120.0, 14.0), (250.0, 9.0), (400.0, 6.0), (30.0, 55.0)]
    gens = []
    zone_of_bus = lambda b: 1 + (b - 1) * n_zone // n_bus
    for i, b in enumerate(gen_buses, start=1):
        cap, cost = unit_classes[int(rng.integers(0, len(unit_classes)))]
        cap *= float(rng.uniform(0.8, 1.2))
        cost *= float(rng.uniform(0.85, 1.15))
        gens.append(
            Generator(id=i, bus=int(b), capacity=round(cap, 2), cost=round(cost, 3),
                      rbar_up=0.0, rbar_dn=0.0, p_up=0.0, p_dn=0.0,
                      zone=zone_of_bus(int(b))),
        )
    total_cap = sum(g.capacity for g in gens)
    raw = rng.lognormal(mean=0.0, sigma=0.6, size=n_load)
    target_total = 0.62 * total_cap
    load_vals = raw / raw.sum() * target_total
    load_map = {int(b): round(float(v), 2) for b, v in zip(load_buses, load_vals)}
    buses = tuple(Bus(id=i, name=f"bus{i}", load=load_map.get(i, 0.0))
                  for i in range(1, n_bus + 1))
    lines = []
    # ring backbone keeps the network connected; chords add meshing
    for i in range(1, n_bus + 1):
        j = i % n_bus + 1
        lines.append((i, j))
    existing = {tuple(sorted(l)) for l in lines}
    while len(lines) < n_line:
        a = int(rng.integers(1, n_bus + 1))
        span = int(rng.integers(2, max(3, n_bus // 8)))
        b = (a + span - 1) % n_bus + 1
        key = tuple(sorted((a, b)))
        if a != b and key not in existing:
            existing.add(key)
            lines.append((a, b))
    line_objs = []
    for k, (f, t) in enumerate(lines, start=1):
        x = round(float(rng.uniform(0.02, 0.2)), 4)
        cap = round(float(rng.uniform(120.0, 500.0)), 1)
        line_objs.append(Line(id=k, from_bus=f, to_bus=t, reactance=x, limit=cap))
    max_cost = max(g.cost for g in gens)
    case = SystemCase(
        buses=buses,
        generators=tuple(gens),
        lines=tuple(line_objs),
        zones=tuple(Zone(id=z) for z in range(1, n_zone + 1)),
        penalties=Penalties(load_shed=8 * max_cost, spill=3 * max_cost),
        name=name,
    )
    return apply_paper_transforms(
        case, flow_factor=0.75, demand_factor=demand_factor,
        reserve_cap_frac=0.30, reserve_price_frac=0.30,
    )


def main():
    os.makedirs(OUT, exist_ok=True)
    save_case(single_bus(), os.path.join(OUT, "singlebus.json"))
    save_case(ieee24(), os.path.join(OUT, "ieee24.json"))
    save_case(
        synthetic_grid("ieee118", 118, 186, 54, 99, 7, demand_factor=1.3, seed=118),
        os.path.join(OUT, "ieee118.json"),
    )
    save_case(
        synthetic_grid("ieee300", 300, 411, 69, 191, 10, demand_factor=0.9, seed=300),
        os.path.join(OUT, "ieee300.json"),
    )
    print(f"cases written to {OUT}")


if __name__ == "__main__":
    main()
