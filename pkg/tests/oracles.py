"""Independent reference implementations used to validate the library.

Everything here is deliberately written without using the implementations
under test: brute-force scans, Monte-Carlo sampling, run-length encoding,
and plain ray casting.
"""
from __future__ import annotations

import math

import numpy as np


def mc_boxes_overlap(box_a, box_b, rng, samples: int = 100_000) -> bool:
    """Monte-Carlo overlap test: sample points of one box, test membership in the other."""

    def sample_points(box, n):
        xs = rng.uniform(-box.half_length, box.half_length, n)
        ys = rng.uniform(-box.half_width, box.half_width, n)
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        return box.cx + xs * c - ys * s, box.cy + xs * s + ys * c

    def inside(box, px, py):
        dx = px - box.cx
        dy = py - box.cy
        c, s = math.cos(box.yaw), math.sin(box.yaw)
        lx = dx * c + dy * s
        ly = -dx * s + dy * c
        return (np.abs(lx) <= box.half_length) & (np.abs(ly) <= box.half_width)

    ax, ay = sample_points(box_a, samples)
    if bool(np.any(inside(box_b, ax, ay))):
        return True
    bx, by = sample_points(box_b, samples)
    return bool(np.any(inside(box_a, bx, by)))


def brute_force_polyline_distance(point, polyline_points) -> float:
    """Minimum point-to-segment distance by scanning every segment."""
    px, py = float(point[0]), float(point[1])
    best = math.inf
    pts = [(float(x), float(y)) for x, y in polyline_points]
    for (ax, ay), (bx, by) in zip(pts[:-1], pts[1:]):
        vx, vy = bx - ax, by - ay
        norm2 = vx * vx + vy * vy
        if norm2 == 0.0:
            d = math.hypot(px - ax, py - ay)
        else:
            t = ((px - ax) * vx + (py - ay) * vy) / norm2
            t = min(max(t, 0.0), 1.0)
            d = math.hypot(px - (ax + t * vx), py - (ay + t * vy))
        best = min(best, d)
    return best


def _segments_properly_intersect(p1, p2, p3, p4) -> bool:
    def orient(a, b, c):
        return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])

    def on_segment(a, b, c):
        return (
            min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
            and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12
        )

    d1 = orient(p3, p4, p1)
    d2 = orient(p3, p4, p2)
    d3 = orient(p1, p2, p3)
    d4 = orient(p1, p2, p4)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)):
        return True
    for d, (a, b, c) in (
        (d1, (p3, p4, p1)),
        (d2, (p3, p4, p2)),
        (d3, (p1, p2, p3)),
        (d4, (p1, p2, p4)),
    ):
        if d == 0 and on_segment(a, b, c):
            return True
    return False


def ring_is_simple(points) -> bool:
    """O(n^2) self-intersection scan over a closed ring's segments."""
    pts = [(float(x), float(y)) for x, y in points]
    if math.hypot(pts[0][0] - pts[-1][0], pts[0][1] - pts[-1][1]) > 1e-12:
        pts.append(pts[0])
    n = len(pts) - 1
    for i in range(n):
        for j in range(i + 1, n):
            adjacent = j == i + 1 or (i == 0 and j == n - 1)
            if adjacent:
                continue
            if _segments_properly_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1]):
                return False
    return True


def point_in_rings(px: float, py: float, rings) -> bool:
    """Even-odd ray casting over a list of closed coordinate rings."""
    inside = False
    for ring in rings:
        pts = [(float(x), float(y)) for x, y in ring]
        n = len(pts)
        for k in range(n - 1):
            x1, y1 = pts[k]
            x2, y2 = pts[k + 1]
            if (y1 > py) != (y2 > py):
                x_cross = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
                if x_cross > px:
                    inside = not inside
    return inside


def distance_to_rings(px: float, py: float, rings) -> float:
    best = math.inf
    for ring in rings:
        best = min(best, brute_force_polyline_distance((px, py), ring))
    return best


def polygon_rings(geom):
    """Coordinate rings (exterior + holes) of a shapely (multi)polygon, as data."""
    polys = getattr(geom, "geoms", [geom])
    rings = []
    for poly in polys:
        rings.append(np.asarray(poly.exterior.coords, dtype=float))
        for interior in poly.interiors:
            rings.append(np.asarray(interior.coords, dtype=float))
    return rings


def sampled_exit_depth(corners, rings, resolution: float = 0.001) -> float:
    """Max distance outside the ringed area over perimeter samples."""
    depth = 0.0
    for k in range(4):
        ax, ay = corners[k]
        bx, by = corners[(k + 1) % 4]
        n = max(1, int(math.ceil(math.hypot(bx - ax, by - ay) / resolution)))
        for t in np.arange(n) / n:
            px = ax + t * (bx - ax)
            py = ay + t * (by - ay)
            if not point_in_rings(px, py, rings):
                depth = max(depth, distance_to_rings(px, py, rings))
    return depth


def runlength_events(flags, start_persist: int = 3, end_clear: int = 5):
    """Event extraction by run-length encoding and forward gap merging."""
    runs = []  # (value, start, length)
    for t, flag in enumerate(flags):
        flag = bool(flag)
        if runs and runs[-1][0] == flag:
            runs[-1][2] += 1
        else:
            runs.append([flag, t, 1])
    events = []
    i = 0
    while i < len(runs):
        value, start, length = runs[i]
        if not value or length < start_persist:
            i += 1
            continue
        end = start + length - 1
        j = i + 1
        while (
            j + 1 < len(runs)
            and runs[j][0] is False
            and runs[j][2] < end_clear
            and runs[j + 1][0] is True
        ):
            end = runs[j + 1][1] + runs[j + 1][2] - 1
            j += 2
        events.append((start, end))
        i = j
    return events
