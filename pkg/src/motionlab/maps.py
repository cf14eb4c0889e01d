"""Lanelet-style map model: lane polygons, centerlines, and reference paths."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np
import shapely

from .core import canonical_dumps
from .geometry import Polyline

JOIN_TOL = 1e-6  # max gap between consecutive centerlines of a reference path


class MapError(ValueError):
    pass


class MapFormatError(MapError):
    """Document does not parse or misses required structure."""


class MapValidationError(MapError):
    """Document parses but violates a geometric or referential invariant."""


@dataclass(frozen=True)
class Lanelet:
    """One lane segment bounded by left/right polylines with a centerline."""

    id: str
    left: np.ndarray
    right: np.ndarray
    center: np.ndarray
    successors: tuple[str, ...] = ()

    def polygon(self) -> shapely.Polygon:
        """Lane surface: left boundary followed by the reversed right boundary."""
        return shapely.Polygon(np.concatenate([self.left, self.right[::-1]]))


def _as_polyline_array(raw, what: str) -> np.ndarray:
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise MapFormatError(f"{what}: not a coordinate list") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or len(arr) < 2:
        raise MapValidationError(f"{what}: needs at least two [x, y] points")
    if not np.all(np.isfinite(arr)):
        raise MapValidationError(f"{what}: non-finite coordinate")
    return arr


def _validate_lanelet(lanelet: Lanelet) -> shapely.Polygon:
    poly = lanelet.polygon()
    if not poly.is_valid or poly.area <= 0.0:
        raise MapValidationError(f"lanelet {lanelet.id!r}: boundary polygon is not simple")
    center_line = shapely.LineString(lanelet.center)
    # small buffer tolerates centerline endpoints sitting on the lane edges
    if not poly.buffer(1e-9).covers(center_line):
        raise MapValidationError(f"lanelet {lanelet.id!r}: centerline exits the lane polygon")
    return poly


class MapModel:
    """Validated, immutable map: lanelets, drivable area, and reference paths."""

    def __init__(self, lanelets: list[Lanelet], reference_paths: dict[str, list[str]]):
        self.lanelets: tuple[Lanelet, ...] = tuple(lanelets)
        self.by_id: dict[str, Lanelet] = {l.id: l for l in self.lanelets}
        if len(self.by_id) != len(self.lanelets):
            raise MapValidationError("duplicate lanelet ids")
        polys = {}
        for lanelet in self.lanelets:
            for succ in lanelet.successors:
                if succ not in self.by_id:
                    raise MapValidationError(
                        f"lanelet {lanelet.id!r}: dangling successor {succ!r}"
                    )
            polys[lanelet.id] = _validate_lanelet(lanelet)
        self.lane_polygons = polys
        self.drivable_area = shapely.union_all(list(polys.values()))
        shapely.prepare(self.drivable_area)
        self._path_lanelets = dict(reference_paths)
        self.reference_paths: dict[str, Polyline] = {
            name: self._build_path(name, ids) for name, ids in reference_paths.items()
        }

    def _build_path(self, name: str, lanelet_ids: list[str]) -> Polyline:
        if not lanelet_ids:
            raise MapValidationError(f"reference path {name!r} lists no lanelets")
        pts: list[np.ndarray] = []
        for lid in lanelet_ids:
            if lid not in self.by_id:
                raise MapValidationError(f"reference path {name!r}: unknown lanelet {lid!r}")
            center = self.by_id[lid].center
            if pts:
                gap = float(np.hypot(*(center[0] - pts[-1][-1])))
                if gap > JOIN_TOL:
                    raise MapValidationError(
                        f"reference path {name!r}: gap of {gap:.2g} m before {lid!r}"
                    )
                center = center[1:] if gap == 0.0 else center
            pts.append(center)
        return Polyline(np.concatenate(pts))

    def path_for(self, name: str) -> Polyline:
        try:
            return self.reference_paths[name]
        except KeyError:
            raise MapError(f"unknown reference path {name!r}") from None

    def to_doc(self) -> dict:
        return {
            "lanelets": [
                {
                    "id": l.id,
                    "left": [[float(x), float(y)] for x, y in l.left],
                    "right": [[float(x), float(y)] for x, y in l.right],
                    "center": [[float(x), float(y)] for x, y in l.center],
                    "successors": list(l.successors),
                }
                for l in self.lanelets
            ],
            "reference_paths": [
                {"name": name, "lanelets": list(ids)}
                for name, ids in self._path_lanelets.items()
            ],
        }

    def __eq__(self, other) -> bool:
        if not isinstance(other, MapModel):
            return NotImplemented
        return self.to_doc() == other.to_doc()


def map_from_doc(doc: dict) -> MapModel:
    if not isinstance(doc, dict):
        raise MapFormatError("map document must be a JSON object")
    unknown = set(doc) - {"lanelets", "reference_paths"}
    if unknown:
        raise MapFormatError(f"unknown map keys: {sorted(unknown)}")
    lanelets_doc = doc.get("lanelets")
    if not isinstance(lanelets_doc, list) or not lanelets_doc:
        raise MapFormatError("map needs a non-empty 'lanelets' list")
    lanelets = []
    for i, entry in enumerate(lanelets_doc):
        if not isinstance(entry, dict):
            raise MapFormatError(f"lanelets[{i}] must be an object")
        unknown = set(entry) - {"id", "left", "right", "center", "successors"}
        if unknown:
            raise MapFormatError(f"lanelets[{i}]: unknown keys {sorted(unknown)}")
        try:
            lid = str(entry["id"])
            left = _as_polyline_array(entry["left"], f"lanelets[{i}].left")
            right = _as_polyline_array(entry["right"], f"lanelets[{i}].right")
            center = _as_polyline_array(entry["center"], f"lanelets[{i}].center")
        except KeyError as exc:
            raise MapFormatError(f"lanelets[{i}] missing key {exc}") from None
        successors = entry.get("successors", [])
        if not isinstance(successors, list):
            raise MapFormatError(f"lanelets[{i}].successors must be a list")
        lanelets.append(
            Lanelet(lid, left, right, center, tuple(str(s) for s in successors))
        )
    paths_doc = doc.get("reference_paths", [])
    if not isinstance(paths_doc, list):
        raise MapFormatError("'reference_paths' must be a list")
    paths: dict[str, list[str]] = {}
    for i, entry in enumerate(paths_doc):
        if not isinstance(entry, dict) or set(entry) - {"name", "lanelets"}:
            raise MapFormatError(f"reference_paths[{i}] must have 'name' and 'lanelets'")
        try:
            name = str(entry["name"])
            ids = [str(x) for x in entry["lanelets"]]
        except KeyError as exc:
            raise MapFormatError(f"reference_paths[{i}] missing key {exc}") from None
        if name in paths:
            raise MapValidationError(f"duplicate reference path name {name!r}")
        paths[name] = ids
    return MapModel(lanelets, paths)


def load_map(source) -> MapModel:
    """Load and validate a map from a dict, JSON text, or file path."""
    if isinstance(source, MapModel):
        return source
    if isinstance(source, dict):
        return map_from_doc(source)
    path = Path(source)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise MapFormatError(f"cannot read map {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise MapFormatError(f"map {path} is not valid JSON: {exc}") from None
    return map_from_doc(doc)


def save_map(model: MapModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_doc(), indent=1))


def map_hash(doc: dict) -> str:
    """Stable identity of a map document used in the wire protocol."""
    return hashlib.sha256(canonical_dumps(doc).encode()).hexdigest()


def bundled_map_doc(name: str = "loop_intersection") -> dict:
    data = resources.files("motionlab").joinpath("data", f"{name}.json").read_text()
    return json.loads(data)


def bundled_map(name: str = "loop_intersection") -> MapModel:
    return map_from_doc(bundled_map_doc(name))
