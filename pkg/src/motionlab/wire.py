"""Tick wire protocol: newline-delimited JSON over TCP or stdio.

Message flow (the executor side initiates):

    hello  ->   {"type": "hello", "version": 1, "dt", "H_c", "H_p", "map": {...}}
    hello  <-   {"type": "hello", "version": 1}
    tick   ->   {"type": "tick", "step", "time", "agents": [...], "map_hash"}
    plan   <-   {"type": "plan", "step", "trajectories": [...]}
    ... one tick/plan pair per step, then the executor closes the stream.

All floats are emitted with full round-trip precision. Trajectories carry
both the predicted points and the commanded actions so direct-control
execution over the wire matches in-process execution exactly.
"""
from __future__ import annotations

import json
import select
import socket
import sys

from .core import canonical_dumps

WIRE_VERSION = 1


class ProtocolError(RuntimeError):
    """Peer violated the wire protocol (schema, ordering, or version)."""


class WireTimeout(ProtocolError):
    """Peer did not answer within the deadline."""


class WireClosed(ProtocolError):
    """Stream ended while a message was expected."""


class InvalidTrajectory(ProtocolError):
    """Planner answered with a trajectory of the wrong shape."""


class LineChannel:
    """One JSON object per line over a connected socket."""

    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = b""

    def send_obj(self, obj: dict) -> None:
        try:
            self._sock.sendall((canonical_dumps(obj) + "\n").encode())
        except OSError as exc:
            raise WireClosed(f"send failed: {exc}") from None

    def recv_obj(self, timeout: float | None = None) -> dict:
        while b"\n" not in self._buf:
            self._sock.settimeout(timeout)
            try:
                chunk = self._sock.recv(65536)
            except socket.timeout:
                raise WireTimeout(f"no message within {timeout} s") from None
            except OSError as exc:
                raise WireClosed(f"recv failed: {exc}") from None
            if not chunk:
                raise WireClosed("peer closed the connection")
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return _parse_line(line)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class StdioChannel:
    """Same framing over stdin/stdout for pipe-spawned peers."""

    def __init__(self, infile=None, outfile=None):
        self._in = infile if infile is not None else sys.stdin
        self._out = outfile if outfile is not None else sys.stdout

    def send_obj(self, obj: dict) -> None:
        self._out.write(canonical_dumps(obj) + "\n")
        self._out.flush()

    def recv_obj(self, timeout: float | None = None) -> dict:
        if timeout is not None:
            ready, _, _ = select.select([self._in], [], [], timeout)
            if not ready:
                raise WireTimeout(f"no message within {timeout} s")
        line = self._in.readline()
        if not line:
            raise WireClosed("peer closed the stream")
        return _parse_line(line.encode() if isinstance(line, str) else line)

    def close(self) -> None:
        pass


def _parse_line(line: bytes) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed message: {exc}") from None
    if not isinstance(msg, dict):
        raise ProtocolError("malformed message: expected a JSON object")
    return msg


def expect_type(msg: dict, expected: str) -> dict:
    kind = msg.get("type")
    if kind != expected:
        raise ProtocolError(f"expected {expected!r} message, got {kind!r}")
    return msg


def check_version(msg: dict) -> None:
    version = msg.get("version")
    if version != WIRE_VERSION:
        raise ProtocolError(f"version mismatch: peer speaks {version!r}, expected {WIRE_VERSION}")


def hello_message(dt: float, H_c: int, H_p: int, map_doc: dict) -> dict:
    return {
        "type": "hello",
        "version": WIRE_VERSION,
        "dt": dt,
        "H_c": H_c,
        "H_p": H_p,
        "map": map_doc,
    }


def hello_ack() -> dict:
    return {"type": "hello", "version": WIRE_VERSION}


def tick_message(step: int, time: float, agents: list[dict], map_hash_hex: str) -> dict:
    return {
        "type": "tick",
        "step": step,
        "time": time,
        "agents": agents,
        "map_hash": map_hash_hex,
    }


_POINT_KEYS = ("x", "y", "yaw", "speed", "steer")
_ACTION_KEYS = ("u_v", "u_sigma")


def _require_number(obj: dict, key: str, what: str) -> float:
    value = obj.get(key)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ProtocolError(f"{what}: field {key!r} must be a number")
    return float(value)


def validate_plan(msg: dict, step: int, n_agent: int, horizon: int) -> dict[int, dict]:
    """Check a plan response and return trajectory docs keyed by agent id."""
    expect_type(msg, "plan")
    if msg.get("step") != step:
        raise ProtocolError(f"plan for step {msg.get('step')!r}, expected {step}")
    trajs = msg.get("trajectories")
    if not isinstance(trajs, list):
        raise ProtocolError("plan is missing the 'trajectories' list")
    by_id: dict[int, dict] = {}
    for entry in trajs:
        if not isinstance(entry, dict) or "id" not in entry:
            raise ProtocolError("trajectory entry without an agent id")
        agent = entry["id"]
        if not isinstance(agent, int) or agent in by_id:
            raise ProtocolError(f"bad or duplicate agent id {agent!r}")
        by_id[agent] = entry
    expected = set(range(n_agent))
    if set(by_id) != expected:
        raise ProtocolError(
            f"plan covers agents {sorted(by_id)}, expected {sorted(expected)}"
        )
    for agent, entry in by_id.items():
        points = entry.get("points")
        if not isinstance(points, list) or len(points) != horizon + 1:
            got = len(points) if isinstance(points, list) else "none"
            raise InvalidTrajectory(
                f"agent {agent}: trajectory has {got} points, expected {horizon + 1}"
            )
        actions = entry.get("actions")
        if not isinstance(actions, list) or len(actions) != horizon:
            raise InvalidTrajectory(f"agent {agent}: trajectory needs {horizon} actions")
        _require_number(entry, "t0", f"agent {agent}")
        _require_number(entry, "dt", f"agent {agent}")
        for p in points:
            if not isinstance(p, dict):
                raise ProtocolError(f"agent {agent}: point must be an object")
            for key in _POINT_KEYS:
                _require_number(p, key, f"agent {agent} point")
        for a in actions:
            if not isinstance(a, dict):
                raise ProtocolError(f"agent {agent}: action must be an object")
            for key in _ACTION_KEYS:
                _require_number(a, key, f"agent {agent} action")
    return by_id
