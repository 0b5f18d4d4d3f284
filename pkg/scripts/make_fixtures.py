#!/usr/bin/env python3
"""Regenerate the bundled toy scenario fixtures (deterministic, no RNG).

Run from the repo root:  python scripts/make_fixtures.py
"""

import json
import math
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "riskfield" / "fixtures" / "data"

CAR = {"kind": "car", "length": 4.6, "width": 1.8, "mass": 1500.0}
PED = {"kind": "pedestrian", "length": 0.6, "width": 0.6}


def agent(aid, x, y, heading, speed, base=CAR):
    rec = {"id": aid, "x": round(x, 6), "y": round(y, 6), "heading": round(heading, 6), "speed": speed}
    rec.update(base)
    return rec


def frames(n, dt, builder):
    out = []
    for i in range(n):
        t = round(i * dt, 3)
        ego, agents, risky = builder(t)
        out.append({"t": t, "ego": ego, "agents": agents, "gt_risky": risky})
    return out


def rect(x0, y0, x1, y1):
    return [[x0, y0], [x1, y0], [x1, y1], [x0, y1]]


def cut_in():
    lanes = [
        {"id": "lane_ego", "direction": "same", "points": [[-60.0, 0.0], [160.0, 0.0]]},
        {"id": "lane_left", "direction": "same", "points": [[-60.0, 3.5], [160.0, 3.5]]},
        {"id": "lane_opp", "direction": "opposite", "points": [[160.0, -3.5], [-60.0, -3.5]]},
    ]

    def build(t):
        ego = agent("ego", -10.0 + 10.0 * t, 0.0, 0.0, 10.0)
        merge = min(max(t - 1.0, 0.0) * 1.2, 3.2)
        cut_y = 3.5 - merge
        cut_heading = math.atan2(-1.2, 9.0) if 0.0 < merge < 3.2 else 0.0
        cutter = agent("cutter", 15.0 + 9.0 * t, cut_y, cut_heading, 9.0)
        oncomer = agent("oncomer", 70.0 - 2.0 * t, -3.5, math.pi, 2.0)
        return ego, [cutter, oncomer], ["cutter"]

    return {
        "meta": {"name": "cut_in"},
        "map": {
            "ego_lane_id": "lane_ego",
            "lanes": lanes,
            "drivable": [rect(-60.0, -5.25, 160.0, 5.25)],
        },
        "frames": frames(40, 0.1, build),
    }


def intersection():
    lanes = [
        {"id": "lane_ego", "direction": "same", "points": [[-50.0, 0.0], [50.0, 0.0]]},
        {"id": "lane_opp", "direction": "opposite", "points": [[50.0, 3.5], [-50.0, 3.5]]},
        {"id": "lane_cross_s", "direction": "opposite", "points": [[1.75, 50.0], [1.75, -50.0]]},
        {"id": "lane_cross_n", "direction": "same", "points": [[-1.75, -50.0], [-1.75, 50.0]]},
    ]

    def build(t):
        ego = agent("ego", -20.0 + 6.0 * t, 0.0, 0.0, 6.0)
        conflict = agent("conflict", 1.75, 20.0 - 8.0 * t, -math.pi / 2.0, 8.0)
        stopped = agent("stopped", 12.0, 3.5, math.pi, 0.0)
        return ego, [conflict, stopped], ["conflict"]

    return {
        "meta": {
            "name": "intersection",
            "collision_frame": 25,
            "same_count": 1,
            "opposite_count": 2,
        },
        "map": {
            "ego_lane_id": "lane_ego",
            "lanes": lanes,
            "drivable": [rect(-50.0, -50.0, 50.0, 50.0)],
        },
        "frames": frames(30, 0.1, build),
    }


def ped_crossing():
    lanes = [
        {"id": "lane_ego", "direction": "same", "points": [[-40.0, 0.0], [80.0, 0.0]]},
        {"id": "lane_opp", "direction": "opposite", "points": [[80.0, 3.5], [-40.0, 3.5]]},
    ]

    def build(t):
        ego = agent("ego", 8.0 * t, 0.0, 0.0, 8.0)
        walker = agent("walker", 25.0, -4.5 + 1.4 * t, math.pi / 2.0, 1.4, base=PED)
        parked = agent("parked", 35.0, 3.2, math.pi, 0.0)
        return ego, [walker, parked], ["walker"]

    return {
        "meta": {"name": "ped_crossing"},
        "map": {
            "ego_lane_id": "lane_ego",
            "lanes": lanes,
            "drivable": [rect(-40.0, -6.0, 80.0, 6.0)],
        },
        "frames": frames(30, 0.1, build),
    }


def straight_road():
    lanes = [
        {"id": "lane_ego", "direction": "same", "points": [[-30.0, 0.0], [90.0, 0.0]]},
        {"id": "lane_left", "direction": "same", "points": [[-30.0, 3.5], [90.0, 3.5]]},
        {"id": "lane_opp", "direction": "opposite", "points": [[90.0, -3.5], [-30.0, -3.5]]},
    ]

    def build(t):
        ego = agent("ego", 10.0 * t, 0.0, 0.0, 10.0)
        return ego, [], []

    return {
        "meta": {"name": "straight_road"},
        "map": {
            "ego_lane_id": "lane_ego",
            "lanes": lanes,
            "drivable": [rect(-30.0, -5.25, 90.0, 5.25)],
        },
        "frames": frames(5, 0.1, build),
    }


def wall():
    # Drivable area framed around a 4 m x 4 m non-drivable block at
    # [10, 14] x [6, 10]; the hidden car sits on the ray through the block.
    drivable = [
        rect(-40.0, -40.0, 10.0, 40.0),
        rect(14.0, -40.0, 40.0, 40.0),
        rect(10.0, -40.0, 14.0, 6.0),
        rect(10.0, 10.0, 14.0, 40.0),
    ]
    lanes = [{"id": "lane_ego", "direction": "same", "points": [[-40.0, 0.0], [40.0, 0.0]]}]

    def build(t):
        ego = agent("ego", 0.0, 0.0, 0.0, 0.0)
        hidden = agent("hidden", 21.0, 14.0, math.pi / 2.0, 5.0)
        near = agent("near", 8.0, -3.0, 0.0, 3.0)
        return ego, [hidden, near], ["hidden"]

    return {
        "meta": {"name": "wall", "wall_bounds": [10.0, 6.0, 14.0, 10.0]},
        "map": {"ego_lane_id": "lane_ego", "lanes": lanes, "drivable": drivable},
        "frames": frames(5, 0.1, build),
    }


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    for builder in (cut_in, intersection, ped_crossing, straight_road, wall):
        doc = builder()
        path = OUT / f"{doc['meta']['name']}.json"
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=1)
            fh.write("\n")
        print(f"wrote {path} ({len(doc['frames'])} frames)")


if __name__ == "__main__":
    main()
