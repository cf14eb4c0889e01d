"""Planar geometry kernel: oriented boxes, separation tests, polylines, lane containment.

Everything here is a pure function over immutable inputs and safe to use
from multiple threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import shapely

if TYPE_CHECKING:
    from .core import SigmaState, VehicleParams


def wrap_angle(angle: float) -> float:
    """Wrap an angle to [-pi, pi] without disturbing its sine/cosine."""
    return math.remainder(angle, math.tau)


@dataclass(frozen=True)
class OrientedBox:
    """Rectangle with center (cx, cy), heading ``yaw`` and half extents."""

    cx: float
    cy: float
    yaw: float
    half_length: float
    half_width: float

    def __post_init__(self):
        if not (self.half_length > 0.0 and self.half_width > 0.0):
            raise ValueError("box half extents must be positive")

    def corners(self) -> list[tuple[float, float]]:
        """Corners in CCW order starting at front-left."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        hl, hw = self.half_length, self.half_width
        return [
            (self.cx + dx * c - dy * s, self.cy + dx * s + dy * c)
            for dx, dy in ((hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw))
        ]

    def axes(self) -> list[tuple[float, float]]:
        """Unit face normals (heading and its perpendicular)."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return [(c, s), (-s, c)]

    def polygon(self) -> shapely.Polygon:
        return shapely.Polygon(self.corners())


def footprint(state: "SigmaState", params: "VehicleParams") -> OrientedBox:
    """Vehicle body rectangle centered at the state's position."""
    return OrientedBox(state.x, state.y, state.yaw, params.length / 2.0, params.width / 2.0)


def _project_interval(corners, ax: float, ay: float) -> tuple[float, float]:
    lo = hi = corners[0][0] * ax + corners[0][1] * ay
    for x, y in corners[1:]:
        d = x * ax + y * ay
        if d < lo:
            lo = d
        elif d > hi:
            hi = d
    return lo, hi


def signed_separation(a: OrientedBox, b: OrientedBox) -> float:
    """Scalar separation between two rectangles, <= 0 iff they overlap.

    Overlapping boxes return minus the minimum translation distance.
    Disjoint boxes return the largest projection gap over the four face
    normals, which lower-bounds the true clearance; only the sign is
    load-bearing for collision tests.
    """
    ca, cb = a.corners(), b.corners()
    min_depth = math.inf
    for ax, ay in (*a.axes(), *b.axes()):
        lo_a, hi_a = _project_interval(ca, ax, ay)
        lo_b, hi_b = _project_interval(cb, ax, ay)
        depth = min(hi_a, hi_b) - max(lo_a, lo_b)
        if depth < min_depth:
            min_depth = depth
    return -min_depth


@dataclass(frozen=True)
class PolylineProjection:
    """Closest-point query result: arc length, unsigned offset, and side."""

    arc_length: float
    lateral_offset: float
    side: str  # "left", "right" or "on"
    segment_index: int


class Polyline:
    """Piecewise-linear curve with arc-length parametrization.

    Endpoints closer than 1e-9 mark the curve as closed, in which case
    arc-length queries wrap around.
    """

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise ValueError("polyline needs at least two 2-D points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("polyline has non-finite coordinates")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        total = float(seg_len.sum())
        if total <= 0.0:
            raise ValueError("degenerate polyline: zero total length")
        self.points = pts
        self.length = total
        self.closed = bool(math.hypot(pts[0, 0] - pts[-1, 0], pts[0, 1] - pts[-1, 1]) < 1e-9)
        self._seg = seg
        self._seg_len = seg_len
        # guard zero-length segments (repeated vertices) against 0/0
        self._len2 = np.maximum(seg_len * seg_len, 1e-300)
        self._cum = np.concatenate(([0.0], np.cumsum(seg_len)))

    def project(self, x: float, y: float) -> PolylineProjection:
        """Closest point on the curve; ties resolve toward smaller arc length."""
        px = x - self.points[:-1, 0]
        py = y - self.points[:-1, 1]
        t = np.clip((px * self._seg[:, 0] + py * self._seg[:, 1]) / self._len2, 0.0, 1.0)
        dx = px - t * self._seg[:, 0]
        dy = py - t * self._seg[:, 1]
        d2 = dx * dx + dy * dy
        i = int(np.argmin(d2))  # argmin returns the first minimum
        d = math.sqrt(float(d2[i]))
        s = float(self._cum[i] + t[i] * self._seg_len[i])
        cross = float(self._seg[i, 0] * dy[i] - self._seg[i, 1] * dx[i])
        if cross == 0.0 or d < 1e-12:
            side = "on"
        elif cross > 0.0:
            side = "left"
        else:
            side = "right"
        return PolylineProjection(arc_length=s, lateral_offset=d, side=side, segment_index=i)

    def _clamp_s(self, s: float) -> float:
        if self.closed:
            s = s % self.length
        return min(max(s, 0.0), self.length)

    def _locate(self, s: float) -> tuple[int, float]:
        s = self._clamp_s(s)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg) - 1)
        return i, (s - float(self._cum[i])) / float(self._seg_len[i])

    def point_at(self, s: float) -> tuple[float, float]:
        """Point at arc length ``s`` (wrapped when closed, clamped otherwise)."""
        i, t = self._locate(s)
        return (
            float(self.points[i, 0] + t * self._seg[i, 0]),
            float(self.points[i, 1] + t * self._seg[i, 1]),
        )

    def tangent_at(self, s: float) -> tuple[float, float]:
        """Unit tangent of the segment containing arc length ``s``."""
        i, _ = self._locate(s)
        ln = float(self._seg_len[i])
        return float(self._seg[i, 0] / ln), float(self._seg[i, 1] / ln)

    def heading_at(self, s: float) -> float:
        tx, ty = self.tangent_at(s)
        return math.atan2(ty, tx)


def path_length(points) -> float:
    """Sum of consecutive point distances; 0.0 for a single point."""
    pts = np.asarray(points, dtype=float)
    if pts.size == 0:
        raise ValueError("path_length needs at least one point")
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if len(pts) == 1:
        return 0.0
    d = np.diff(pts, axis=0)
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def _perimeter_samples(corners, resolution: float) -> tuple[np.ndarray, np.ndarray]:
    xs: list[np.ndarray] = []
    ys: list[np.ndarray] = []
    for k in range(4):
        ax, ay = corners[k]
        bx, by = corners[(k + 1) % 4]
        n = max(1, int(math.ceil(math.hypot(bx - ax, by - ay) / resolution)))
        t = np.arange(n) / n  # endpoint of each edge is the next edge's start
        xs.append(ax + t * (bx - ax))
        ys.append(ay + t * (by - ay))
    return np.concatenate(xs), np.concatenate(ys)


def lane_violation_depth(box: OrientedBox, area, *, resolution: float = 0.001) -> float:
    """Largest distance by which the box perimeter exits ``area``.

    ``area`` is a shapely polygon (holes allowed). Returns 0.0 when the box
    is fully contained. Exit depth is probed by sampling the box perimeter
    at ``resolution`` spacing; points inside the area contribute zero.
    """
    corners = box.corners()
    if area.contains(shapely.Polygon(corners)):
        return 0.0
    xs, ys = _perimeter_samples(corners, resolution)
    d = shapely.distance(shapely.points(xs, ys), area)
    return float(d.max())
