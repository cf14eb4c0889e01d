"""Vehicle model used for client-side trajectory rollout.

The simulator's wire protocol hands over states and expects predicted
trajectories back; the prediction model here matches the simulator's
published kinematics contract (kinematic bicycle, rate/acceleration limits
applied before an explicit-Euler step) operation for operation, so both
sides compute identical floating-point trajectories. The protocol does not
carry vehicle parameters; the defaults below are the 1:18 platform sheet.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class VehicleParams:
    length: float = 0.22
    width: float = 0.107
    wheelbase: float = 0.15
    rear_wheelbase: float = 0.075
    max_steering: float = math.radians(31.0)
    max_steering_rate: float = math.radians(90.0)
    max_accel: float = 5.0
    min_accel: float = -5.0
    max_speed: float = 1.0


DEFAULT_PARAMS = VehicleParams()

RAW_BOUND = 1.0 - 1e-9


@dataclass(frozen=True)
class AgentState:
    """Planner-side state: position, heading, velocity vector, steering angle."""

    x: float
    y: float
    yaw: float
    vx: float
    vy: float
    steering: float


def wrap_angle(angle: float) -> float:
    return math.remainder(angle, math.tau)


def clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def clip_raw(x: float) -> float:
    return min(max(x, -RAW_BOUND), RAW_BOUND)


def slip_angle(steering: float, params: VehicleParams) -> float:
    return math.atan((params.rear_wheelbase / params.wheelbase) * math.tan(steering))


def state_from_wire(agent: dict, params: VehicleParams) -> AgentState:
    """Expand one tick-message agent entry into a planner-side state."""
    yaw = wrap_angle(float(agent["yaw"]))
    speed = float(agent["speed"])
    steering = params.max_steering * float(agent["steer_norm"])
    beta = slip_angle(steering, params)
    heading = yaw + beta
    return AgentState(
        x=float(agent["x"]),
        y=float(agent["y"]),
        yaw=yaw,
        vx=speed * math.cos(heading),
        vy=speed * math.sin(heading),
        steering=steering,
    )


def step_bicycle(s: AgentState, speed_cmd: float, steer_cmd: float, dt: float, params: VehicleParams) -> AgentState:
    v0 = math.hypot(s.vx, s.vy)
    rate = params.max_steering_rate * dt
    steer = clamp(steer_cmd, s.steering - rate, s.steering + rate)
    steer = clamp(steer, -params.max_steering, params.max_steering)
    v1 = clamp(speed_cmd, v0 + params.min_accel * dt, v0 + params.max_accel * dt)
    v1 = clamp(v1, 0.0, params.max_speed)

    beta = slip_angle(steer, params)
    heading = s.yaw + beta
    x = s.x + v1 * math.cos(heading) * dt
    y = s.y + v1 * math.sin(heading) * dt
    yaw = wrap_angle(s.yaw + (v1 / params.rear_wheelbase) * math.sin(beta) * dt)
    return AgentState(
        x=x,
        y=y,
        yaw=yaw,
        vx=v1 * math.cos(yaw + beta),
        vy=v1 * math.sin(yaw + beta),
        steering=steer,
    )


def rescale_action(raw_speed: float, raw_steer: float, params: VehicleParams) -> tuple[float, float]:
    if not (-1.0 < raw_speed < 1.0 and -1.0 < raw_steer < 1.0):
        raise ValueError(f"raw action outside (-1, 1): ({raw_speed}, {raw_steer})")
    return (raw_speed + 1.0) / 2.0 * params.max_speed, raw_steer * params.max_steering
