"""Policy contract and built-in reference policies.

A policy is a deterministic function of (PolicyInput, rng-stream state) that
returns a raw action with both components strictly inside (-1, 1). Built-in
policies hold no hidden state across calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Protocol

from .core import ActionCmd, SigmaState, VehicleParams
from .geometry import Polyline, wrap_angle

if TYPE_CHECKING:
    import numpy as np

    from .maps import MapModel

# raw outputs are clipped to this bound so rescaling stays inside the open interval
RAW_BOUND = 1.0 - 1e-9


class PathExhausted(Exception):
    """Ego has run past the end of an open reference path; the agent is done."""


@dataclass(frozen=True)
class PolicyInput:
    """Global-state observation handed to a policy for one agent."""

    ego_index: int
    states: tuple[SigmaState, ...]
    map_model: "MapModel | None"
    reference_path: Polyline | None
    rng: "np.random.Generator | None" = None

    def __post_init__(self):
        if not 0 <= self.ego_index < len(self.states):
            raise ValueError("ego_index out of range")

    @property
    def ego(self) -> SigmaState:
        return self.states[self.ego_index]


class Policy(Protocol):
    def act(self, inp: PolicyInput) -> tuple[float, float]: ...


def _clip_raw(x: float) -> float:
    return min(max(x, -RAW_BOUND), RAW_BOUND)


@dataclass(frozen=True)
class ConstantPolicy:
    """Fixed raw action: speed_frac in [0, 1] of max speed, steer_frac of max steering."""

    speed_frac: float = 0.75
    steer_frac: float = 0.0

    def act(self, inp: PolicyInput) -> tuple[float, float]:
        return _clip_raw(2.0 * self.speed_frac - 1.0), _clip_raw(self.steer_frac)


class RandomPolicy:
    """Uniform raw actions in (-0.99, 0.99) drawn from the input's rng stream."""

    def act(self, inp: PolicyInput) -> tuple[float, float]:
        if inp.rng is None:
            raise ValueError("RandomPolicy needs an rng stream")
        raw = inp.rng.uniform(-0.99, 0.99, 2)
        return float(raw[0]), float(raw[1])


def pure_pursuit_act(
    state: SigmaState,
    path: Polyline,
    lookahead: float,
    target_speed: float,
    params: VehicleParams,
) -> ActionCmd:
    """Classic pure-pursuit steering toward the path point one lookahead ahead.

    Raises PathExhausted when the lookahead point would fall past the end of
    an open path.
    """
    if not lookahead > 0.0:
        raise ValueError("lookahead must be positive")
    proj = path.project(state.x, state.y)
    target_s = proj.arc_length + lookahead
    if not path.closed and target_s > path.length:
        raise PathExhausted(f"reference path ends at s={path.length:.3f}")
    tx, ty = path.point_at(target_s)
    dist = math.hypot(tx - state.x, ty - state.y)
    if dist < 1e-9:
        steer = 0.0
    else:
        alpha = wrap_angle(math.atan2(ty - state.y, tx - state.x) - state.yaw)
        steer = math.atan(2.0 * params.wheelbase * math.sin(alpha) / dist)
    steer = min(max(steer, -params.max_steering), params.max_steering)
    return ActionCmd(speed=target_speed, steer=steer)


@dataclass(frozen=True)
class PurePursuitPolicy:
    """Scripted lane-following baseline: pursuit steering at a fixed target speed."""

    params: VehicleParams
    lookahead: float = 0.25
    target_speed: float = 0.75

    def act(self, inp: PolicyInput) -> tuple[float, float]:
        if inp.reference_path is None:
            raise ValueError("PurePursuitPolicy needs a reference path")
        cmd = pure_pursuit_act(
            inp.ego, inp.reference_path, self.lookahead, self.target_speed, self.params
        )
        raw_speed = _clip_raw(2.0 * cmd.speed / self.params.max_speed - 1.0)
        raw_steer = _clip_raw(cmd.steer / self.params.max_steering)
        return raw_speed, raw_steer


def make_policy(name: str, params: VehicleParams, **kwargs) -> Policy:
    """Policy factory used by the CLI and the bench matrix."""
    if name == "constant":
        return ConstantPolicy(**kwargs)
    if name == "random":
        return RandomPolicy()
    if name == "pursuit":
        return PurePursuitPolicy(params=params, **kwargs)
    raise ValueError(f"unknown policy {name!r}")
