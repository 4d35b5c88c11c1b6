#!/usr/bin/env python3
"""Regenerate the JSON network fixtures.

Topology, generator limits and default loads of the 9- and 39-bus cases come
from the MATPOWER data shipped with PYPOWER (`pip install pypower`). Costs are
linear and chosen by hand; line susceptances are 1/x.

In both cases the strategic unit is the most expensive one, so every bid in
the grid leaves the rivals' merit order unchanged and the unit only earns
money when the rest of the fleet cannot cover the load. The 9-bus units are
derated to 70% so that this happens inside the sampled load range; the
39-bus line ratings are raised by 25% to keep congestion patterns few enough
to learn from a few thousand samples.

Minimum outputs are set to zero. A must-run strategic unit can be forced to
sell below its cost, and then even honest bidding loses money.

Defaults can be overridden with a JSON object as the first argument, e.g.
`make_fixtures.py '{"s39": 1.0}'`.
"""

import json
import pathlib
import sys

OUT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def from_matpower(ppc, costs, strategic=0, rating_scale=1.0, gen_scale=1.0, default_rating=None):
    bus_ids = [int(b) for b in ppc["bus"][:, 0]]
    index = {b: i for i, b in enumerate(bus_ids)}
    lines = []
    for br in ppc["branch"]:
        rating = float(br[5]) or default_rating
        lines.append({
            "from": index[int(br[0])],
            "to": index[int(br[1])],
            "susceptance": round(1.0 / float(br[3]), 6),
            "flow_limit": round(rating * rating_scale, 3),
        })
    gens = []
    for g, cost in zip(ppc["gen"], costs):
        gens.append({
            "bus": index[int(g[0])],
            "cost": cost,
            "p_min": 0.0,
            "p_max": round(float(g[8]) * gen_scale, 3),
        })
    return {
        "buses": list(range(len(bus_ids))),
        "lines": lines,
        "generators": gens,
        "loads": [max(float(pd), 0.0) for pd in ppc["bus"][:, 2]],
        "ref_bus": index[int(ppc["gen"][0][0])],
        "strategic_gen": strategic,
    }


def toy3():
    return {
        "buses": [0, 1, 2],
        "lines": [
            {"from": 0, "to": 1, "susceptance": 10.0, "flow_limit": 60.0},
            {"from": 1, "to": 2, "susceptance": 10.0, "flow_limit": 60.0},
            {"from": 0, "to": 2, "susceptance": 10.0, "flow_limit": 60.0},
        ],
        "generators": [
            {"bus": 0, "cost": 12.0, "p_min": 0.0, "p_max": 150.0},
            {"bus": 1, "cost": 20.0, "p_min": 0.0, "p_max": 150.0},
        ],
        "loads": [0.0, 40.0, 70.0],
        "ref_bus": 0,
        "strategic_gen": 0,
    }


ARGS = json.loads(sys.argv[1]) if len(sys.argv) > 1 else {}
C9 = ARGS.get("c9", [31.7, 12.3, 19.1])
G9 = ARGS.get("g9", 0.7)
S9 = ARGS.get("s9", 1.0)
C39 = ARGS.get("c39", [14.1, 22.3, 18.7, 31.9, 26.3, 16.9, 35.3, 24.1, 29.7, 38.3])
K39 = ARGS.get("k39", 9)
S39 = ARGS.get("s39", 1.25)
G39 = ARGS.get("g39", 1.0)


def main():
    from pypower.case9 import case9
    from pypower.case39 import case39

    cases = {
        "toy3.json": toy3(),
        "case9.json": from_matpower(case9(), C9, rating_scale=S9, gen_scale=G9),
        "case39.json": from_matpower(case39(), C39, strategic=K39, rating_scale=S39, gen_scale=G39),
    }
    OUT.mkdir(exist_ok=True)
    for name, case in cases.items():
        (OUT / name).write_text(json.dumps(case, indent=2) + "\n")
        print(f"wrote {name}: {len(case['buses'])} buses, "
              f"{len(case['generators'])} generators, {len(case['lines'])} lines")


if __name__ == "__main__":
    main()
