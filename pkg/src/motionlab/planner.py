"""Receding-horizon trajectory generation from per-step policy decisions.

The leading control-horizon steps take their commands from the policy,
re-queried at every predicted step; the remaining prediction-horizon steps
hold the last commanded speed and taper the steering command linearly to
exactly zero at the final step. All predicted states come from the same
integrator the executor uses, so re-simulating the actions reproduces the
states bit for bit.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

from .core import ActionCmd, RunConfig, SigmaState, VehicleParams
from .dynamics import rescale_action, step_bicycle
from .policies import Policy, PolicyInput

if TYPE_CHECKING:
    import numpy as np

    from .geometry import Polyline
    from .maps import MapModel


def taper_steering(u_last: float, j: int, H_c: int, H_p: int) -> float:
    """Steering command for rules-based step ``j``: linear ramp from u_last to 0."""
    if not H_c <= j < H_p:
        raise ValueError(f"taper step {j} outside [{H_c}, {H_p})")
    return u_last * ((H_p - 1 - j) / (H_p - H_c))


@dataclass(frozen=True)
class Trajectory:
    """Reference trajectory: H_p actions and the H_p + 1 states they produce."""

    t0: float
    dt: float
    states: tuple[SigmaState, ...]
    actions: tuple[ActionCmd, ...]

    def __post_init__(self):
        if len(self.states) != len(self.actions) + 1:
            raise ValueError("trajectory needs exactly one more state than actions")

    @property
    def horizon(self) -> int:
        return len(self.actions)

    def to_doc(self) -> dict:
        return {
            "t0": self.t0,
            "dt": self.dt,
            "points": [
                {
                    "x": s.x,
                    "y": s.y,
                    "yaw": s.yaw,
                    "speed": math.hypot(s.vx, s.vy),
                    "steer": s.steering,
                }
                for s in self.states
            ],
            "actions": [{"u_v": a.speed, "u_sigma": a.steer} for a in self.actions],
        }

    def view(self) -> "TrajectoryView":
        return TrajectoryView.from_doc(self.to_doc())


@dataclass(frozen=True)
class TrajectoryView:
    """Flat (x, y, yaw, speed, steer) samples plus the commanded actions.

    Both the in-process planner and the wire protocol reduce to this form, so
    the executor consumes identical numbers regardless of the binding.
    """

    t0: float
    dt: float
    xs: tuple[float, ...]
    ys: tuple[float, ...]
    yaws: tuple[float, ...]
    speeds: tuple[float, ...]
    steers: tuple[float, ...]
    actions: tuple[ActionCmd, ...]

    @property
    def horizon(self) -> int:
        return len(self.xs) - 1

    @classmethod
    def from_doc(cls, doc: dict) -> "TrajectoryView":
        points = doc["points"]
        actions = tuple(
            ActionCmd(speed=float(a["u_v"]), steer=float(a["u_sigma"]))
            for a in doc.get("actions", [])
        )
        return cls(
            t0=float(doc["t0"]),
            dt=float(doc["dt"]),
            xs=tuple(float(p["x"]) for p in points),
            ys=tuple(float(p["y"]) for p in points),
            yaws=tuple(float(p["yaw"]) for p in points),
            speeds=tuple(float(p["speed"]) for p in points),
            steers=tuple(float(p["steer"]) for p in points),
            actions=actions,
        )


def _advance_peer(state: SigmaState, dt: float, mode: str) -> SigmaState:
    if mode == "frozen":
        return state
    # constant-velocity: straight-line extrapolation, steering untouched
    return SigmaState(
        x=state.x + state.vx * dt,
        y=state.y + state.vy * dt,
        yaw=state.yaw,
        vx=state.vx,
        vy=state.vy,
        steering=state.steering,
    )


def generate_trajectory(
    policy: Policy,
    ego_index: int,
    states: Sequence[SigmaState],
    map_model: "MapModel | None",
    cfg: RunConfig,
    params: VehicleParams,
    reference_path: "Polyline | None" = None,
    rng: "np.random.Generator | None" = None,
    now: float = 0.0,
) -> Trajectory:
    """Roll the policy out over the control horizon, then taper to zero steering."""
    predicted = list(states)
    ego_states: list[SigmaState] = [predicted[ego_index]]
    actions: list[ActionCmd] = []

    for _ in range(cfg.H_c):
        inp = PolicyInput(
            ego_index=ego_index,
            states=tuple(predicted),
            map_model=map_model,
            reference_path=reference_path,
            rng=rng,
        )
        raw_speed, raw_steer = policy.act(inp)
        cmd = rescale_action(raw_speed, raw_steer, params)
        actions.append(cmd)
        nxt = step_bicycle(ego_states[-1], cmd, cfg.dt, params)
        ego_states.append(nxt)
        predicted = [
            nxt if k == ego_index else _advance_peer(st, cfg.dt, cfg.peer_prediction)
            for k, st in enumerate(predicted)
        ]

    if cfg.H_p > cfg.H_c:
        hold_speed = actions[cfg.H_c - 1].speed
        last_steer = actions[cfg.H_c - 1].steer
        for j in range(cfg.H_c, cfg.H_p):
            cmd = ActionCmd(speed=hold_speed, steer=taper_steering(last_steer, j, cfg.H_c, cfg.H_p))
            actions.append(cmd)
            ego_states.append(step_bicycle(ego_states[-1], cmd, cfg.dt, params))

    return Trajectory(t0=now, dt=cfg.dt, states=tuple(ego_states), actions=tuple(actions))


def hold_trajectory(state: SigmaState, cfg: RunConfig, now: float = 0.0) -> Trajectory:
    """Stand-still trajectory used once an agent's open path is exhausted."""
    still = SigmaState(x=state.x, y=state.y, yaw=state.yaw, vx=0.0, vy=0.0, steering=0.0)
    stop = ActionCmd(0.0, 0.0)
    return Trajectory(
        t0=now,
        dt=cfg.dt,
        states=(still,) * (cfg.H_p + 1),
        actions=(stop,) * cfg.H_p,
    )
