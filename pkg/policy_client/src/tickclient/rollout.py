"""Client-side trajectory generation: policy over the control horizon, then a
linear steering taper to zero across the remaining prediction horizon."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .kinematics import (
    AgentState,
    VehicleParams,
    clip_raw,
    rescale_action,
    step_bicycle,
    wrap_angle,
)
from .track import Polyline


class PathExhausted(Exception):
    """Ego ran past the end of an open reference path."""


@dataclass(frozen=True)
class PursuitPolicy:
    """Pure-pursuit lane following at a fixed target speed."""

    lookahead: float = 0.25
    target_speed: float = 0.75

    def act(self, states, ego_index: int, path: Polyline | None, params: VehicleParams):
        if path is None:
            raise ValueError("pursuit policy needs a reference path")
        ego = states[ego_index]
        s, _ = path.project(ego.x, ego.y)
        target_s = s + self.lookahead
        if not path.closed and target_s > path.length:
            raise PathExhausted(f"path ends at s={path.length:.3f}")
        tx, ty = path.point_at(target_s)
        dist = math.hypot(tx - ego.x, ty - ego.y)
        if dist < 1e-9:
            steer = 0.0
        else:
            alpha = wrap_angle(math.atan2(ty - ego.y, tx - ego.x) - ego.yaw)
            steer = math.atan(2.0 * params.wheelbase * math.sin(alpha) / dist)
        steer = min(max(steer, -params.max_steering), params.max_steering)
        raw_speed = clip_raw(2.0 * self.target_speed / params.max_speed - 1.0)
        raw_steer = clip_raw(steer / params.max_steering)
        return raw_speed, raw_steer


@dataclass(frozen=True)
class ConstantPolicy:
    speed_frac: float = 0.75
    steer_frac: float = 0.0

    def act(self, states, ego_index, path, params):
        return clip_raw(2.0 * self.speed_frac - 1.0), clip_raw(self.steer_frac)


def make_policy(name: str, **kwargs):
    if name == "pursuit":
        return PursuitPolicy(**kwargs)
    if name == "constant":
        return ConstantPolicy(**kwargs)
    raise ValueError(f"unknown policy {name!r}")


def taper_steering(u_last: float, j: int, H_c: int, H_p: int) -> float:
    return u_last * ((H_p - 1 - j) / (H_p - H_c))


def _advance_peer(state: AgentState, dt: float) -> AgentState:
    return AgentState(
        x=state.x + state.vx * dt,
        y=state.y + state.vy * dt,
        yaw=state.yaw,
        vx=state.vx,
        vy=state.vy,
        steering=state.steering,
    )


def _point(state: AgentState) -> dict:
    return {
        "x": state.x,
        "y": state.y,
        "yaw": state.yaw,
        "speed": math.hypot(state.vx, state.vy),
        "steer": state.steering,
    }


def hold_trajectory(state: AgentState, t0: float, dt: float, H_p: int) -> dict:
    still = AgentState(x=state.x, y=state.y, yaw=state.yaw, vx=0.0, vy=0.0, steering=0.0)
    return {
        "t0": t0,
        "dt": dt,
        "points": [_point(still) for _ in range(H_p + 1)],
        "actions": [{"u_v": 0.0, "u_sigma": 0.0} for _ in range(H_p)],
    }


def generate_trajectory(
    policy,
    ego_index: int,
    states,
    path: Polyline | None,
    t0: float,
    dt: float,
    H_c: int,
    H_p: int,
    params: VehicleParams,
) -> dict:
    """Roll the policy out and serialize the trajectory for the wire."""
    predicted = list(states)
    ego_states = [predicted[ego_index]]
    actions: list[tuple[float, float]] = []
    for _ in range(H_c):
        raw_speed, raw_steer = policy.act(predicted, ego_index, path, params)
        cmd = rescale_action(raw_speed, raw_steer, params)
        actions.append(cmd)
        nxt = step_bicycle(ego_states[-1], cmd[0], cmd[1], dt, params)
        ego_states.append(nxt)
        predicted = [
            nxt if k == ego_index else _advance_peer(st, dt) for k, st in enumerate(predicted)
        ]
    if H_p > H_c:
        hold_speed = actions[H_c - 1][0]
        last_steer = actions[H_c - 1][1]
        for j in range(H_c, H_p):
            cmd = (hold_speed, taper_steering(last_steer, j, H_c, H_p))
            actions.append(cmd)
            ego_states.append(step_bicycle(ego_states[-1], cmd[0], cmd[1], dt, params))
    return {
        "t0": t0,
        "dt": dt,
        "points": [_point(s) for s in ego_states],
        "actions": [{"u_v": a[0], "u_sigma": a[1]} for a in actions],
    }
