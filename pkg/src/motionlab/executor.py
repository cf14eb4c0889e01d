"""Tick-synchronized episode execution in three realism tiers.

The loop is lockstep: wall-clock timing, wire latency, and host load never
influence the result; only the configuration and its seeds do. Observation
noise and localization latency affect what the planner sees, while the
ground-truth log stays noise-free, mirroring evaluation through an external
camera.
"""
from __future__ import annotations

import json
import math
import time as _time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    ActionCmd,
    ConfigError,
    CpmState,
    DEFAULT_PARAMS,
    Placement,
    RunConfig,
    SigmaState,
    VehicleParams,
    canonical_dumps,
    config_from_doc,
    config_to_doc,
    with_placements,
)
from .dynamics import clamp, map_cpm_to_sigma, map_sigma_to_cpm, step_bicycle
from .geometry import OrientedBox, Polyline, footprint, signed_separation, wrap_angle
from .maps import MapModel, map_hash
from .metrics import HysteresisFilter
from .planner import TrajectoryView, generate_trajectory, hold_trajectory
from .policies import PathExhausted, Policy
from .wire import check_version, expect_type, hello_message, tick_message, validate_plan

RECORD_FORMAT = 1
_MASK64 = (1 << 64) - 1
_PURPOSES = {"policy": 0, "obs_pos": 1, "obs_yaw": 2}


class EpisodeError(RuntimeError):
    """Episode could not run to completion."""


class TrajectoryExpired(EpisodeError):
    """Follower asked for a time outside the trajectory's span."""


class RngStreams:
    """Per-agent, per-purpose counter-based random streams from one master seed.

    Streams are independent, so enabling one disturbance never perturbs the
    draws of another.
    """

    def __init__(self, master_seed: int):
        self._master = int(master_seed) & _MASK64

    def stream(self, purpose: str, agent: int) -> np.random.Generator:
        entropy = (self._master, _PURPOSES[purpose], int(agent))
        return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class ResetEvent:
    """Agents respawned at the given log step after a confirmed collision."""

    step: int
    agents: tuple[int, ...]


@dataclass(frozen=True)
class RunRecord:
    """Ground-truth log of one episode plus its configuration snapshot."""

    config: RunConfig
    map_hash: str
    states: tuple[tuple[CpmState, ...], ...]
    actions: tuple[tuple[ActionCmd, ...], ...]
    resets: tuple[ResetEvent, ...] = ()
    wall_seconds: float = field(default=0.0, compare=False)

    @property
    def n_steps(self) -> int:
        return len(self.states) - 1

    @property
    def n_agent(self) -> int:
        return len(self.states[0])

    def to_jsonl(self) -> str:
        resets_by_step: dict[int, tuple[int, ...]] = {e.step: e.agents for e in self.resets}
        lines = [
            canonical_dumps(
                {
                    "type": "header",
                    "format": RECORD_FORMAT,
                    "map_hash": self.map_hash,
                    "config": config_to_doc(self.config),
                }
            )
        ]
        for t, row in enumerate(self.states):
            acts = self.actions[t] if t < len(self.actions) else None
            agents = []
            for i, s in enumerate(row):
                a = acts[i] if acts is not None else None
                agents.append(
                    {
                        "id": i,
                        "x": s.x,
                        "y": s.y,
                        "yaw": s.yaw,
                        "speed": s.speed,
                        "steer_norm": s.steer_norm,
                        "u_v": None if a is None else a.speed,
                        "u_sigma": None if a is None else a.steer,
                    }
                )
            record: dict = {"step": t, "agents": agents}
            if t in resets_by_step:
                record["resets"] = list(resets_by_step[t])
            lines.append(canonical_dumps(record))
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "RunRecord":
        lines = [line for line in text.splitlines() if line.strip()]
        if not lines:
            raise EpisodeError("empty run record")
        header = json.loads(lines[0])
        if header.get("type") != "header" or header.get("format") != RECORD_FORMAT:
            raise EpisodeError("not a run record: bad header line")
        cfg = config_from_doc(header["config"])
        states: list[tuple[CpmState, ...]] = []
        actions: list[tuple[ActionCmd, ...]] = []
        resets: list[ResetEvent] = []
        for line in lines[1:]:
            rec = json.loads(line)
            row = []
            acts = []
            for a in rec["agents"]:
                row.append(
                    CpmState(
                        x=a["x"], y=a["y"], yaw=a["yaw"], speed=a["speed"], steer_norm=a["steer_norm"]
                    )
                )
                if a["u_v"] is not None:
                    acts.append(ActionCmd(speed=a["u_v"], steer=a["u_sigma"]))
            states.append(tuple(row))
            if acts:
                actions.append(tuple(acts))
            if "resets" in rec:
                resets.append(ResetEvent(step=rec["step"], agents=tuple(rec["resets"])))
        return cls(
            config=cfg,
            map_hash=header["map_hash"],
            states=tuple(states),
            actions=tuple(actions),
            resets=tuple(resets),
        )

    @classmethod
    def load(cls, path) -> "RunRecord":
        return cls.from_jsonl(Path(path).read_text())


def _interp_sample(view: TrajectoryView, u: float) -> tuple[float, float, float, float, float]:
    """Sample the trajectory at fractional step ``u``, clamped to its span."""
    n = view.horizon
    k = int(math.floor(u))
    frac = u - k
    if frac < 1e-9:
        frac = 0.0
    elif frac > 1.0 - 1e-9:
        k += 1
        frac = 0.0
    k = min(max(k, 0), n)
    if frac == 0.0 or k >= n:
        return view.xs[k], view.ys[k], view.yaws[k], view.speeds[k], view.steers[k]
    x = view.xs[k] + frac * (view.xs[k + 1] - view.xs[k])
    y = view.ys[k] + frac * (view.ys[k + 1] - view.ys[k])
    yaw = wrap_angle(view.yaws[k] + frac * wrap_angle(view.yaws[k + 1] - view.yaws[k]))
    speed = view.speeds[k] + frac * (view.speeds[k + 1] - view.speeds[k])
    steer = view.steers[k] + frac * (view.steers[k + 1] - view.steers[k])
    return x, y, yaw, speed, steer


def _pursuit_angle(x: float, y: float, yaw: float, ax: float, ay: float, wheelbase: float) -> float:
    dist = math.hypot(ax - x, ay - y)
    if dist < 1e-9:
        return 0.0
    alpha = wrap_angle(math.atan2(ay - y, ax - x) - yaw)
    return math.atan(2.0 * wheelbase * math.sin(alpha) / dist)


def follow_step(
    measured: SigmaState,
    view: TrajectoryView,
    now: float,
    params: VehicleParams,
    gains,
) -> ActionCmd:
    """Mid-level tracking command: feedforward reference plus error feedback.

    The speed command targets the next reference sample corrected by the
    speed error; the steering command is the next reference steering plus a
    pure-pursuit correction toward the lookahead reference point. Both
    corrections vanish when the measured state sits exactly on the
    trajectory, so undisturbed tracking reproduces the planner's own
    prediction.
    """
    u = (now - view.t0) / view.dt
    if u < -1e-9 or u > view.horizon + 1e-9:
        raise TrajectoryExpired(
            f"time {now} outside trajectory [{view.t0}, {view.t0 + view.horizon * view.dt}]"
        )
    u = min(max(u, 0.0), float(view.horizon))
    rx, ry, ryaw, rspeed, _ = _interp_sample(view, u)
    _, _, _, next_speed, next_steer = _interp_sample(view, u + 1.0)
    ax, ay, _, _, _ = _interp_sample(view, u + gains.lookahead_time / view.dt)

    correction = _pursuit_angle(measured.x, measured.y, measured.yaw, ax, ay, params.wheelbase) - _pursuit_angle(
        rx, ry, ryaw, ax, ay, params.wheelbase
    )
    steer = clamp(next_steer + correction, -params.max_steering, params.max_steering)
    speed = next_speed + gains.k_s * (rspeed - math.hypot(measured.vx, measured.vy))
    speed = clamp(speed, 0.0, params.max_speed)
    return ActionCmd(speed=speed, steer=steer)


class InProcessPlanner:
    """Planner binding that rolls out a policy object inside the executor."""

    def __init__(self, policy: Policy):
        self.policy = policy
        self._cfg: RunConfig | None = None

    def prepare(self, cfg: RunConfig, map_model: MapModel, params: VehicleParams) -> None:
        self._cfg = cfg
        self._map = map_model
        self._params = params
        streams = RngStreams(cfg.seed)
        self._rngs = [streams.stream("policy", i) for i in range(cfg.n_agent)]
        self._paths: list[Polyline | None] = []
        assert cfg.placements is not None
        for p in cfg.placements:
            self._paths.append(map_model.path_for(p.path) if p.path else None)

    def plan(self, step: int, now: float, observed: list[CpmState]) -> list[TrajectoryView]:
        cfg = self._cfg
        sigma = [map_cpm_to_sigma(s, self._params) for s in observed]
        views = []
        for i in range(cfg.n_agent):
            try:
                traj = generate_trajectory(
                    self.policy,
                    i,
                    sigma,
                    self._map,
                    cfg,
                    self._params,
                    reference_path=self._paths[i],
                    rng=self._rngs[i],
                    now=now,
                )
            except PathExhausted:
                traj = hold_trajectory(sigma[i], cfg, now=now)
            views.append(traj.view())
        return views

    def close(self) -> None:
        pass


class WirePlanner:
    """Planner binding that forwards ticks to an external planner process."""

    def __init__(self, channel, deadline: float | None = None):
        self._channel = channel
        self._deadline_override = deadline

    def prepare(self, cfg: RunConfig, map_model: MapModel, params: VehicleParams) -> None:
        self._cfg = cfg
        doc = map_model.to_doc()
        self._map_hash = map_hash(doc)
        self._deadline = (
            self._deadline_override if self._deadline_override is not None else 2.0 * cfg.dt
        )
        self._channel.send_obj(hello_message(cfg.dt, cfg.H_c, cfg.H_p, doc))
        ack = self._channel.recv_obj(timeout=self._deadline)
        expect_type(ack, "hello")
        check_version(ack)

    def plan(self, step: int, now: float, observed: list[CpmState]) -> list[TrajectoryView]:
        cfg = self._cfg
        agents = [
            {"id": i, "x": s.x, "y": s.y, "yaw": s.yaw, "speed": s.speed, "steer_norm": s.steer_norm}
            for i, s in enumerate(observed)
        ]
        self._channel.send_obj(tick_message(step, now, agents, self._map_hash))
        msg = self._channel.recv_obj(timeout=self._deadline)
        by_id = validate_plan(msg, step, cfg.n_agent, cfg.H_p)
        return [TrajectoryView.from_doc(by_id[i]) for i in range(cfg.n_agent)]

    def close(self) -> None:
        self._channel.close()


def auto_placements(cfg: RunConfig, map_model: MapModel) -> tuple[Placement, ...]:
    """Spread agents evenly along the map's first reference path, at rest."""
    if not map_model.reference_paths:
        raise ConfigError("map has no reference paths; explicit placements required")
    name = next(iter(map_model.reference_paths))
    path = map_model.reference_paths[name]
    out = []
    for k in range(cfg.n_agent):
        s = path.length * k / cfg.n_agent
        x, y = path.point_at(s)
        out.append(Placement(x=x, y=y, yaw=path.heading_at(s), speed=0.0, path=name))
    return tuple(out)


def _initial_state(p: Placement) -> SigmaState:
    return SigmaState(
        x=p.x,
        y=p.y,
        yaw=p.yaw,
        vx=p.speed * math.cos(p.yaw),
        vy=p.speed * math.sin(p.yaw),
        steering=0.0,
    )


def _respawn_pose(
    base: SigmaState,
    others: list[OrientedBox],
    map_model: MapModel,
    params: VehicleParams,
    path: Polyline | None,
) -> SigmaState:
    def clear(state: SigmaState) -> bool:
        fp = footprint(state, params)
        if any(signed_separation(fp, other) <= 0.0 for other in others):
            return False
        return map_model.drivable_area.contains(fp.polygon())

    candidate = SigmaState(x=base.x, y=base.y, yaw=base.yaw, vx=0.0, vy=0.0, steering=0.0)
    if clear(candidate) or path is None:
        return candidate
    s0 = path.project(base.x, base.y).arc_length
    for k in range(1, 201):  # walk back along the path in 0.1 m increments
        s = s0 - 0.1 * k
        if not path.closed and s < 0.0:
            break
        x, y = path.point_at(s)
        shifted = SigmaState(x=x, y=y, yaw=path.heading_at(s), vx=0.0, vy=0.0, steering=0.0)
        if clear(shifted):
            return shifted
    return candidate


def run_episode(
    cfg: RunConfig,
    map_model: MapModel,
    binding,
    params: VehicleParams = DEFAULT_PARAMS,
) -> RunRecord:
    """Execute one lockstep episode and return its ground-truth record."""
    started = _time.perf_counter()
    if cfg.placements is None:
        cfg = with_placements(cfg, auto_placements(cfg, map_model))
    n = cfg.n_agent
    dist = cfg.disturbance
    noise_streams = RngStreams(dist.noise_seed if dist.noise_seed is not None else cfg.seed)
    pos_rngs = [noise_streams.stream("obs_pos", i) for i in range(n)]
    yaw_rngs = [noise_streams.stream("obs_yaw", i) for i in range(n)]
    paths: list[Polyline | None] = [
        map_model.path_for(p.path) if p.path else None for p in cfg.placements
    ]

    truth = [_initial_state(p) for p in cfg.placements]
    stop = ActionCmd(0.0, 0.0)
    queues = [
        deque([ActionCmd(speed=p.speed, steer=0.0)] * dist.actuation_delay)
        for p in cfg.placements
    ]
    watches = {
        (i, j): HysteresisFilter() for i in range(n) for j in range(i + 1, n)
    }
    last_clear = list(truth)
    to_reset: set[int] = set()
    # holds the newest localization_latency + 1 observations; index 0 is the aged one
    observed_history: deque[list[CpmState]] = deque(maxlen=dist.localization_latency + 1)
    state_log: list[tuple[CpmState, ...]] = [tuple(map_sigma_to_cpm(s, params) for s in truth)]
    action_log: list[tuple[ActionCmd, ...]] = []
    resets: list[ResetEvent] = []

    def observe(state: SigmaState, i: int) -> CpmState:
        cpm = map_sigma_to_cpm(state, params)
        x, y, yaw = cpm.x, cpm.y, cpm.yaw
        if dist.position_noise > 0.0:
            dx, dy = pos_rngs[i].normal(0.0, dist.position_noise, 2)
            x += dx
            y += dy
        if dist.yaw_noise > 0.0:
            yaw = wrap_angle(yaw + yaw_rngs[i].normal(0.0, dist.yaw_noise))
        return CpmState(x=x, y=y, yaw=yaw, speed=cpm.speed, steer_norm=cpm.steer_norm)

    binding.prepare(cfg, map_model, params)
    try:
        for t in range(cfg.steps):
            observed_history.append([observe(s, i) for i, s in enumerate(truth)])
            aged_step = t - (len(observed_history) - 1)
            views = binding.plan(t, aged_step * cfg.dt, observed_history[0])

            new_truth: list[SigmaState | None] = [None] * n
            applied: list[ActionCmd] = []
            for i in range(n):
                if i in to_reset:
                    queues[i].clear()
                    queues[i].extend([stop] * dist.actuation_delay)
                    applied.append(stop)
                    continue
                if cfg.mode == "direct":
                    commanded = views[i].actions[0]
                else:
                    # the vehicles have no onboard localization: the follower works
                    # from this tick's camera observation, not from ground truth
                    measured = map_cpm_to_sigma(observed_history[-1][i], params)
                    # the command issued now acts only after the queued ones; the
                    # follower predicts through its own queue to the effect time
                    for queued in queues[i]:
                        measured = step_bicycle(measured, queued, cfg.dt, params)
                    commanded = follow_step(
                        measured,
                        views[i],
                        (t + dist.actuation_delay) * cfg.dt,
                        params,
                        cfg.follower,
                    )
                queues[i].append(commanded)
                effective = queues[i].popleft()
                applied.append(effective)
                new_truth[i] = step_bicycle(truth[i], effective, cfg.dt, params)

            for i in sorted(to_reset):
                others = [
                    footprint(s, params) for k, s in enumerate(new_truth) if s is not None and k != i
                ]
                new_truth[i] = _respawn_pose(last_clear[i], others, map_model, params, paths[i])
            if to_reset:
                resets.append(ResetEvent(step=t + 1, agents=tuple(sorted(to_reset))))
                to_reset = set()
            truth = new_truth  # type: ignore[assignment]

            boxes = [footprint(s, params) for s in truth]
            overlapping = [False] * n
            for (i, j), watch in watches.items():
                hit = signed_separation(boxes[i], boxes[j]) <= 0.0
                if hit:
                    overlapping[i] = overlapping[j] = True
                if watch.update(hit) and cfg.reset_on_collision:
                    to_reset.update((i, j))
            for i in range(n):
                if not overlapping[i]:
                    last_clear[i] = truth[i]

            state_log.append(tuple(map_sigma_to_cpm(s, params) for s in truth))
            action_log.append(tuple(applied))
    finally:
        binding.close()

    return RunRecord(
        config=cfg,
        map_hash=map_hash(map_model.to_doc()),
        states=tuple(state_log),
        actions=tuple(action_log),
        resets=tuple(resets),
        wall_seconds=_time.perf_counter() - started,
    )


def serve_episode(
    cfg: RunConfig,
    map_model: MapModel,
    host: str = "127.0.0.1",
    port: int = 0,
    params: VehicleParams = DEFAULT_PARAMS,
    deadline: float | None = None,
    on_listening=None,
    accept_timeout: float | None = None,
) -> RunRecord:
    """Run one episode as the lab-style tick server for an external planner."""
    import socket

    with socket.create_server((host, port)) as server:
        bound_port = server.getsockname()[1]
        if on_listening is not None:
            on_listening(host, bound_port)
        server.settimeout(accept_timeout)
        try:
            conn, _ = server.accept()
        except socket.timeout:
            raise EpisodeError("no planner connected before the accept timeout") from None
        from .wire import LineChannel

        channel = LineChannel(conn)
        planner = WirePlanner(channel, deadline=deadline)
        return run_episode(cfg, map_model, planner, params)
