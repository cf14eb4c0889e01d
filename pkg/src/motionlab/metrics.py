"""Safety and performance metrics over episode records.

Four quantities per run: agent-agent collision rate (events per 100 m of
aggregate travel, debounced by a start/stop hysteresis), lane-violation
distance rate (meters outside the lane beyond a width-relative slack, per
100 m), mean centerline deviation, and mean speed. All of them evaluate the
noise-free ground-truth log.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .geometry import footprint, lane_violation_depth, signed_separation

if TYPE_CHECKING:
    from .core import VehicleParams
    from .executor import RunRecord
    from .maps import MapModel

START_PERSIST = 3  # consecutive overlapping steps required to open an event
END_CLEAR = 5  # consecutive clear steps required to close it


class MetricsError(ValueError):
    pass


class HysteresisFilter:
    """Streaming debouncer: open after START_PERSIST trues, close after END_CLEAR falses.

    While an event is open, any overlap extends it, so gaps shorter than
    END_CLEAR merge into a single event. update() returns True exactly when
    a new event opens.
    """

    def __init__(self, start_persist: int = START_PERSIST, end_clear: int = END_CLEAR):
        self.start_persist = start_persist
        self.end_clear = end_clear
        self.active = False
        self._true_run = 0
        self._false_run = 0

    def update(self, flag: bool) -> bool:
        if self.active:
            if flag:
                self._false_run = 0
            else:
                self._false_run += 1
                if self._false_run >= self.end_clear:
                    self.active = False
                    self._true_run = 0
                    self._false_run = 0
            return False
        if flag:
            self._true_run += 1
            if self._true_run >= self.start_persist:
                self.active = True
                self._false_run = 0
                return True
        else:
            self._true_run = 0
        return False


def hysteresis_events(
    flags: Sequence[bool], start_persist: int = START_PERSIST, end_clear: int = END_CLEAR
) -> list[tuple[int, int]]:
    """(start, end) index pairs of debounced events over a boolean series.

    An event starts at the first step of its opening run and ends at its
    last true step (a trailing open event ends at the series' last true).
    """
    filt = HysteresisFilter(start_persist, end_clear)
    events: list[tuple[int, int]] = []
    start = last_true = -1
    for t, flag in enumerate(flags):
        was_active = filt.active
        opened = filt.update(flag)
        if flag:
            last_true = t
        if opened:
            start = t - (start_persist - 1)
        elif was_active and not filt.active:
            events.append((start, last_true))
    if filt.active:
        events.append((start, last_true))
    return events


@dataclass(frozen=True)
class CollisionEvent:
    """One debounced overlap episode between an unordered agent pair."""

    agents: tuple[int, int]
    start_step: int
    end_step: int

    def to_doc(self) -> dict:
        return {
            "agents": list(self.agents),
            "start_step": self.start_step,
            "end_step": self.end_step,
        }


@dataclass(frozen=True)
class RunMetrics:
    cra_a: float
    cra_l: float
    cd: float
    avg_speed: float
    total_distance: float
    events: tuple[CollisionEvent, ...] = ()

    def to_doc(self) -> dict:
        return {
            "cra_a": self.cra_a,
            "cra_l": self.cra_l,
            "cd": self.cd,
            "as": self.avg_speed,
            "total_distance": self.total_distance,
            "events": [e.to_doc() for e in self.events],
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "RunMetrics":
        return cls(
            cra_a=float(doc["cra_a"]),
            cra_l=float(doc["cra_l"]),
            cd=float(doc["cd"]),
            avg_speed=float(doc["as"]),
            total_distance=float(doc["total_distance"]),
            events=tuple(
                CollisionEvent(
                    agents=tuple(e["agents"]),  # type: ignore[arg-type]
                    start_step=int(e["start_step"]),
                    end_step=int(e["end_step"]),
                )
                for e in doc.get("events", [])
            ),
        )


def detect_collision_events(record: "RunRecord", params: "VehicleParams") -> list[CollisionEvent]:
    """Debounced pairwise overlap events over the whole log."""
    n = record.n_agent
    events: list[CollisionEvent] = []
    for i in range(n):
        for j in range(i + 1, n):
            flags = [
                signed_separation(footprint(row[i], params), footprint(row[j], params)) <= 0.0
                for row in record.states
            ]
            for start, end in hysteresis_events(flags):
                events.append(CollisionEvent(agents=(i, j), start_step=start, end_step=end))
    events.sort(key=lambda e: (e.start_step, e.agents))
    return events


def _excluded_samples(record: "RunRecord", include_resets: bool) -> list[set[int]]:
    """Per-agent log steps whose arrival was a respawn teleport, not driving."""
    excluded: list[set[int]] = [set() for _ in range(record.n_agent)]
    if include_resets:
        return excluded
    for event in record.resets:
        for agent in event.agents:
            excluded[agent].add(event.step)
    return excluded


def _step_distances(record: "RunRecord", excluded: list[set[int]]) -> list[list[float]]:
    """Distance traveled into each log step per agent; teleport steps are 0."""
    import math

    out: list[list[float]] = []
    for i in range(record.n_agent):
        dists = [0.0]
        for t in range(1, len(record.states)):
            if t in excluded[i]:
                dists.append(0.0)
                continue
            a = record.states[t - 1][i]
            b = record.states[t][i]
            dists.append(math.hypot(b.x - a.x, b.y - a.y))
        out.append(dists)
    return out


def total_distance(record: "RunRecord", include_resets: bool = False) -> float:
    excluded = _excluded_samples(record, include_resets)
    return sum(sum(d) for d in _step_distances(record, excluded))


def cra_a(record: "RunRecord", params: "VehicleParams", include_resets: bool = False) -> float:
    """Collision events per 100 m of aggregate agent travel."""
    dist = total_distance(record, include_resets)
    if dist <= 0.0:
        raise MetricsError("total distance is zero; collision rate undefined")
    return 100.0 * len(detect_collision_events(record, params)) / dist


def cra_l(
    record: "RunRecord",
    map_model: "MapModel",
    params: "VehicleParams",
    slack: float | None = None,
    include_resets: bool = False,
) -> float:
    """Meters traveled outside the drivable area (beyond slack) per 100 m.

    The default slack is 10 % of the vehicle width, so grazing contact with
    a boundary does not count as a violation.
    """
    if slack is None:
        slack = 0.1 * params.width
    excluded = _excluded_samples(record, include_resets)
    dists = _step_distances(record, excluded)
    total = sum(sum(d) for d in dists)
    if total <= 0.0:
        raise MetricsError("total distance is zero; lane-violation rate undefined")
    area = map_model.drivable_area
    violating = 0.0
    for i in range(record.n_agent):
        for t in range(1, len(record.states)):
            if dists[i][t] == 0.0:
                continue
            depth = lane_violation_depth(footprint(record.states[t][i], params), area)
            if depth > slack:
                violating += dists[i][t]
    return 100.0 * violating / total


def centerline_deviation(
    record: "RunRecord", map_model: "MapModel", include_resets: bool = False
) -> float:
    """Mean lateral distance between agent centers and their reference paths."""
    if record.config.placements is None:
        raise MetricsError("record carries no placements; reference paths unknown")
    excluded = _excluded_samples(record, include_resets)
    total = 0.0
    count = 0
    for i, placement in enumerate(record.config.placements):
        if not placement.path:
            raise MetricsError(f"agent {i} has no assigned reference path")
        path = map_model.path_for(placement.path)
        for t, row in enumerate(record.states):
            if t in excluded[i]:
                continue
            total += path.project(row[i].x, row[i].y).lateral_offset
            count += 1
    return total / count if count else 0.0


def average_speed(record: "RunRecord", include_resets: bool = False) -> float:
    """Mean forward speed over all agents and steps."""
    excluded = _excluded_samples(record, include_resets)
    total = 0.0
    count = 0
    for t, row in enumerate(record.states):
        for i, state in enumerate(row):
            if t in excluded[i]:
                continue
            total += state.speed
            count += 1
    return total / count if count else 0.0


def compute_metrics(
    record: "RunRecord",
    map_model: "MapModel",
    params: "VehicleParams",
    include_resets: bool = False,
) -> RunMetrics:
    events = detect_collision_events(record, params)
    dist = total_distance(record, include_resets)
    if dist <= 0.0:
        raise MetricsError("total distance is zero; rates undefined")
    return RunMetrics(
        cra_a=100.0 * len(events) / dist,
        cra_l=cra_l(record, map_model, params, include_resets=include_resets),
        cd=centerline_deviation(record, map_model, include_resets=include_resets),
        avg_speed=average_speed(record, include_resets=include_resets),
        total_distance=dist,
        events=tuple(events),
    )
