"""Reference-path handling from the map document delivered in the handshake."""
from __future__ import annotations

import math

import numpy as np


class TrackError(ValueError):
    pass


class Polyline:
    """Arc-length parametrized polyline (closed when the endpoints coincide)."""

    def __init__(self, points):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
            raise TrackError("polyline needs at least two 2-D points")
        seg = np.diff(pts, axis=0)
        seg_len = np.hypot(seg[:, 0], seg[:, 1])
        total = float(seg_len.sum())
        if total <= 0.0:
            raise TrackError("degenerate polyline")
        self.points = pts
        self.length = total
        self.closed = bool(math.hypot(pts[0, 0] - pts[-1, 0], pts[0, 1] - pts[-1, 1]) < 1e-9)
        self._seg = seg
        self._seg_len = seg_len
        self._len2 = np.maximum(seg_len * seg_len, 1e-300)
        self._cum = np.concatenate(([0.0], np.cumsum(seg_len)))

    def project(self, x: float, y: float) -> tuple[float, float]:
        """(arc length, unsigned distance) of the closest curve point."""
        px = x - self.points[:-1, 0]
        py = y - self.points[:-1, 1]
        t = np.clip((px * self._seg[:, 0] + py * self._seg[:, 1]) / self._len2, 0.0, 1.0)
        dx = px - t * self._seg[:, 0]
        dy = py - t * self._seg[:, 1]
        d2 = dx * dx + dy * dy
        i = int(np.argmin(d2))
        s = float(self._cum[i] + t[i] * self._seg_len[i])
        return s, math.sqrt(float(d2[i]))

    def point_at(self, s: float) -> tuple[float, float]:
        if self.closed:
            s = s % self.length
        s = min(max(s, 0.0), self.length)
        i = int(np.searchsorted(self._cum, s, side="right")) - 1
        i = min(max(i, 0), len(self._seg) - 1)
        t = (s - float(self._cum[i])) / float(self._seg_len[i])
        return (
            float(self.points[i, 0] + t * self._seg[i, 0]),
            float(self.points[i, 1] + t * self._seg[i, 1]),
        )


def reference_paths(map_doc: dict) -> dict[str, Polyline]:
    """Build named centerline paths from a handshake map document."""
    try:
        lanelets = {str(l["id"]): np.asarray(l["center"], dtype=float) for l in map_doc["lanelets"]}
        path_entries = map_doc.get("reference_paths", [])
    except (KeyError, TypeError) as exc:
        raise TrackError(f"bad map document: {exc}") from None
    paths: dict[str, Polyline] = {}
    for entry in path_entries:
        name = str(entry["name"])
        pts: list[np.ndarray] = []
        for lid in entry["lanelets"]:
            if str(lid) not in lanelets:
                raise TrackError(f"reference path {name!r}: unknown lanelet {lid!r}")
            center = lanelets[str(lid)]
            if pts:
                gap = float(np.hypot(*(center[0] - pts[-1][-1])))
                if gap > 1e-6:
                    raise TrackError(f"reference path {name!r}: disconnected at {lid!r}")
                center = center[1:] if gap == 0.0 else center
            pts.append(center)
        paths[name] = Polyline(np.concatenate(pts))
    return paths


def nearest_path(paths: dict[str, Polyline], x: float, y: float) -> str:
    """Route assignment rule: the closest reference path, ties by name order."""
    if not paths:
        raise TrackError("map carries no reference paths")
    return min(sorted(paths), key=lambda name: paths[name].project(x, y)[1])
