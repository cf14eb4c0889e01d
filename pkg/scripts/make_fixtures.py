"""Regenerate the bundled data fixtures: test map, disturbance presets, example matrix.

The map is a stand-in track at 1:18 scale: a stadium-shaped closed loop
(two straights joined by semicircular arcs) with a straight lane crossing
it at mid height, producing two intersections on the loop.
"""
from __future__ import annotations

import json
import math
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "src" / "motionlab" / "data"

LANE_WIDTH = 0.30
HALF = LANE_WIDTH / 2.0
RADIUS = 1.0  # centerline radius of the loop arcs
LEFT_CENTER = (1.0, 1.4)
RIGHT_CENTER = (3.0, 1.4)
ARC_POINTS = 49  # per semicircle, ~3.75 deg steps


def _round(values):
    return [[round(float(x), 10), round(float(y), 10)] for x, y in values]


def straight(p0, p1, n=2):
    t = np.linspace(0.0, 1.0, n)[:, None]
    return np.asarray(p0) + t * (np.asarray(p1) - np.asarray(p0))


def arc(center, radius, a0, a1, n=ARC_POINTS):
    th = np.linspace(a0, a1, n)
    return np.c_[center[0] + radius * np.cos(th), center[1] + radius * np.sin(th)]


def lanelet(lid, center_pts, successors):
    """Offset boundaries from the centerline by the local normal."""
    pts = np.asarray(center_pts)
    d = np.gradient(pts, axis=0)
    norm = np.hypot(d[:, 0], d[:, 1])
    tangent = d / norm[:, None]
    normal = np.c_[-tangent[:, 1], tangent[:, 0]]  # left of travel
    return {
        "id": lid,
        "left": _round(pts + HALF * normal),
        "right": _round(pts - HALF * normal),
        "center": _round(pts),
        "successors": successors,
    }


def build_map() -> dict:
    y_bot, y_top = LEFT_CENTER[1] - RADIUS, LEFT_CENTER[1] + RADIUS
    x_l, x_r = LEFT_CENTER[0], RIGHT_CENTER[0]
    lanelets = [
        lanelet("loop_bottom", straight((x_l, y_bot), (x_r, y_bot)), ["loop_right"]),
        lanelet("loop_right", arc(RIGHT_CENTER, RADIUS, -math.pi / 2, math.pi / 2), ["loop_top"]),
        lanelet("loop_top", straight((x_r, y_top), (x_l, y_top)), ["loop_left"]),
        lanelet("loop_left", arc(LEFT_CENTER, RADIUS, math.pi / 2, 3 * math.pi / 2), ["loop_bottom"]),
        lanelet("cross", straight((-0.6, LEFT_CENTER[1]), (4.6, LEFT_CENTER[1])), []),
    ]
    return {
        "lanelets": lanelets,
        "reference_paths": [
            {"name": "loop", "lanelets": ["loop_bottom", "loop_right", "loop_top", "loop_left"]},
            {"name": "cross", "lanelets": ["cross"]},
        ],
    }


def loop_placements(map_doc, offsets, speed=0.75):
    """Poses on the loop centerline at the given arc offsets (meters)."""
    sys.path.insert(0, str(ROOT / "src"))
    from motionlab.maps import map_from_doc

    model = map_from_doc(map_doc)
    path = model.reference_paths["loop"]
    out = []
    for s in offsets:
        x, y = path.point_at(s)
        out.append(
            {
                "x": round(x, 10),
                "y": round(y, 10),
                "yaw": round(path.heading_at(s), 10),
                "speed": speed,
                "path": "loop",
            }
        )
    return out


def build_matrix(map_doc) -> dict:
    placements = [
        loop_placements(map_doc, (0.0, 3.4, 6.8)),
        loop_placements(map_doc, (1.2, 4.6, 8.0)),
        loop_placements(map_doc, (2.4, 5.8, 9.2)),
    ]
    return {
        "master_seed": 2024,
        "policy": {"name": "pursuit", "target_speed": 0.75, "lookahead": 0.25},
        "policy_seeds": [0, 1, 2],
        "repetitions": 3,
        "placements": placements,
        "environments": [
            {"name": "sim", "config": {"mode": "direct", "disturbance": "sim"}},
            {"name": "twin", "config": {"mode": "follow", "disturbance": "twin"}},
            {
                "name": "lab",
                "config": {"mode": "follow", "disturbance": "lab", "reset_on_collision": True},
            },
        ],
    }


PRESET_DOCS = {
    "sim": {},
    "twin": {"obs_position_noise_std": 0.002, "actuation_delay": 1},
    "lab": {
        "obs_position_noise_std": 0.005,
        "obs_yaw_noise_std": "0.5 deg",
        "actuation_delay": 2,
        "localization_latency": 1,
    },
}


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    (DATA / "presets").mkdir(exist_ok=True)
    map_doc = build_map()
    (DATA / "loop_intersection.json").write_text(json.dumps(map_doc, indent=1) + "\n")
    (DATA / "matrix_example.json").write_text(json.dumps(build_matrix(map_doc), indent=1) + "\n")
    for name, doc in PRESET_DOCS.items():
        (DATA / "presets" / f"{name}.json").write_text(json.dumps(doc, indent=1) + "\n")
    print(f"fixtures written to {DATA}")


if __name__ == "__main__":
    main()
