"""Generate the 118-bus-shaped fixture ``cases/synthetic_118.yaml``.

NOT the IEEE 118-bus system. The network is a ring with seeded random
chords, 30 units are online and the total load is 86.3 % of their
capacity. AGC constants and penalty costs are invented. The file exists to
exercise the loader and assembly at realistic size; the exact subproblem
is far beyond desk scale for it.

    python tools/make_synthetic_118.py [--seed 118] [--out PATH]
"""

import argparse
from pathlib import Path

import numpy as np
import yaml

N_BUS, N_GEN, N_BRANCH = 118, 30, 186
LOAD_SHARE = 0.863


def build(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    bus_ids = [f"b{k + 1}" for k in range(N_BUS)]
    gen_buses = sorted(rng.choice(N_BUS, size=N_GEN, replace=False))
    p_max = rng.choice([50, 100, 150, 200, 300, 400], size=N_GEN)
    weights = rng.uniform(0.2, 1.0, size=N_BUS)
    loads = LOAD_SHARE * p_max.sum() * weights / weights.sum()
    gens = []
    for n, b in enumerate(gen_buses):
        pm = float(p_max[n])
        slope = float(rng.uniform(15, 45))
        gens.append({
            "id": f"g{n + 1}", "bus": bus_ids[b],
            "p_min": round(0.1 * pm, 1), "p_max": pm,
            "reg_up_cap": round(0.05 * pm, 1), "reg_dn_cap": round(0.05 * pm, 1),
            "sr_cap": round(0.1 * pm, 1),
            "rur": round(0.02 * pm, 2), "rdr": round(0.02 * pm, 2),
            "cost": [[0, round(slope, 2)], [round(0.6 * pm, 1), round(1.3 * slope, 2)]],
            "cp": round(float(rng.uniform(80, 150)), 1),
            "t_ch": round(float(rng.uniform(4, 7)), 2), "t_g": 2.0,
            "droop": round(float(rng.uniform(1.0, 2.0)), 2),
        })
    edges = {(k, (k + 1) % N_BUS) for k in range(N_BUS)}
    while len(edges) < N_BRANCH:
        i, j = sorted(int(v) for v in rng.choice(N_BUS, size=2, replace=False))
        if (i, j) not in edges and (j, i) not in edges:
            edges.add((i, j))
    lines = [{"id": f"l{k + 1}", "from": bus_ids[i], "to": bus_ids[j],
              "reactance": round(float(rng.uniform(0.02, 0.2)), 4), "capacity": 500.0}
             for k, (i, j) in enumerate(sorted(edges))]
    total = float(p_max.sum())
    return {
        "schema_version": 1,
        "name": "synthetic-118 (non-authoritative)",
        "budget": {"nominal_scale": 1.05},
        "buses": [{"id": bid, "d_bar": round(float(d), 3)} for bid, d in zip(bus_ids, loads)],
        "generators": gens,
        "lines": lines,
        "network": {"slack": bus_ids[gen_buses[0]]},
        "reserves": {"sr_min": round(0.05 * total, 1), "reg_min_up": round(0.01 * total, 1),
                     "reg_min_dn": round(0.01 * total, 1)},
        "uncertainty": {"d_hat_fraction": 0.05, "delta_d_bar": 0.0, "delta_d_hat": 5.0},
        "agc": {"n_sub_intervals": 10, "dt": 4.0, "freq_min": -0.2, "freq_max": 0.2,
                "model": "continuous", "inertia": 600, "damping": 40},
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=118)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parents[1] / "src/flexgauge/cases/synthetic_118.yaml")
    args = ap.parse_args()
    header = ("# NON-AUTHORITATIVE 118-bus-shaped fixture generated by tools/make_synthetic_118.py.\n"
              "# It is not the IEEE 118-bus system: topology, costs and AGC constants are synthetic.\n"
              "# 30 units online, load 86.3 % of online capacity.\n")
    args.out.write_text(header + yaml.safe_dump(build(args.seed), sort_keys=False), encoding="utf-8")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
