"""Tick-protocol session: handshake, route assignment, and the plan loop."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .kinematics import DEFAULT_PARAMS, VehicleParams, state_from_wire
from .protocol import ProtocolError, ServerClosed, WIRE_VERSION, map_hash
from .rollout import PathExhausted, generate_trajectory, hold_trajectory
from .track import Polyline, nearest_path, reference_paths

log = logging.getLogger("tickclient")


@dataclass
class ClientSession:
    """State of one connection to a tick server."""

    channel: object
    policy: object
    params: VehicleParams = DEFAULT_PARAMS
    dt: float = field(init=False, default=0.0)
    H_c: int = field(init=False, default=0)
    H_p: int = field(init=False, default=0)
    map_doc: dict = field(init=False, default_factory=dict)
    ticks_served: int = field(init=False, default=0)

    def __post_init__(self):
        self._paths: dict[str, Polyline] = {}
        self._routes: dict[int, str] = {}
        self._map_hash = ""
        self._last_step: int | None = None

    def handshake(self) -> None:
        msg = self.channel.recv_obj()
        if msg.get("type") != "hello":
            raise ProtocolError(f"expected hello, got {msg.get('type')!r}")
        version = msg.get("version")
        if version != WIRE_VERSION:
            raise ProtocolError(
                f"version mismatch: server speaks {version!r}, client speaks {WIRE_VERSION}"
            )
        try:
            self.dt = float(msg["dt"])
            self.H_c = int(msg["H_c"])
            self.H_p = int(msg["H_p"])
            self.map_doc = msg["map"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad hello: {exc}") from None
        if not (self.dt > 0.0 and 1 <= self.H_c <= self.H_p):
            raise ProtocolError(f"bad horizons in hello: dt={self.dt} H_c={self.H_c} H_p={self.H_p}")
        self._paths = reference_paths(self.map_doc)
        self._map_hash = map_hash(self.map_doc)
        self.channel.send_obj({"type": "hello", "version": WIRE_VERSION})
        log.info("handshake complete: dt=%s H_c=%d H_p=%d", self.dt, self.H_c, self.H_p)

    def _route(self, agent_id: int, x: float, y: float) -> Polyline:
        # routes are planner-owned: assign the nearest reference path on first sight
        if agent_id not in self._routes:
            name = nearest_path(self._paths, x, y)
            self._routes[agent_id] = name
            log.info("agent %d assigned to path %r", agent_id, name)
        return self._paths[self._routes[agent_id]]

    def serve_tick(self, msg: dict) -> None:
        if msg.get("type") != "tick":
            raise ProtocolError(f"expected tick, got {msg.get('type')!r}")
        try:
            step = int(msg["step"])
            now = float(msg["time"])
            agents = msg["agents"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad tick: {exc}") from None
        if self._last_step is not None and step <= self._last_step:
            raise ProtocolError(f"tick steps not increasing: {step} after {self._last_step}")
        self._last_step = step
        if msg.get("map_hash") != self._map_hash:
            raise ProtocolError("tick references a different map than the handshake")
        if not isinstance(agents, list) or not agents:
            raise ProtocolError("tick without agents")
        states = []
        ids = []
        for entry in agents:
            try:
                ids.append(int(entry["id"]))
                states.append(state_from_wire(entry, self.params))
            except (KeyError, TypeError, ValueError) as exc:
                raise ProtocolError(f"bad agent entry: {exc}") from None
        trajectories = []
        for i, agent_id in enumerate(ids):
            path = self._route(agent_id, states[i].x, states[i].y)
            try:
                doc = generate_trajectory(
                    self.policy, i, states, path, now, self.dt, self.H_c, self.H_p, self.params
                )
            except PathExhausted:
                doc = hold_trajectory(states[i], now, self.dt, self.H_p)
            doc["id"] = agent_id
            trajectories.append(doc)
        self.channel.send_obj({"type": "plan", "step": step, "trajectories": trajectories})
        self.ticks_served += 1

    def run(self) -> int:
        """Serve until the server closes the stream; returns ticks served."""
        self.handshake()
        while True:
            try:
                msg = self.channel.recv_obj()
            except ServerClosed:
                log.info("server closed the stream after %d ticks", self.ticks_served)
                return self.ticks_served
            self.serve_tick(msg)


def serve_policy(channel, policy, params: VehicleParams = DEFAULT_PARAMS) -> int:
    """Run a full session on an open channel; returns the number of ticks served."""
    return ClientSession(channel=channel, policy=policy, params=params).run()
