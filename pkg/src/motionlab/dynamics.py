"""Kinematic bicycle integrator, actuation limits, and state-format mappings.

The vehicle reference point is the geometric center; its velocity points
along yaw + slip angle. Commands are clamped through the steering-rate and
acceleration limits before the explicit-Euler update, so a command equal to
an already-reachable value passes through unchanged.
"""
from __future__ import annotations

import math

from .core import ActionCmd, CpmState, SigmaState, VehicleParams
from .geometry import wrap_angle


def clamp(x: float, lo: float, hi: float) -> float:
    return min(max(x, lo), hi)


def slip_angle(steering: float, params: VehicleParams) -> float:
    """Angle between heading and velocity for a given steering angle."""
    return math.atan((params.rear_wheelbase / params.wheelbase) * math.tan(steering))


def map_cpm_to_sigma(s: CpmState, params: VehicleParams) -> SigmaState:
    """Denormalize steering and expand scalar speed into a velocity vector."""
    steering = params.max_steering * s.steer_norm
    beta = slip_angle(steering, params)
    heading = s.yaw + beta
    return SigmaState(
        x=s.x,
        y=s.y,
        yaw=s.yaw,
        vx=s.speed * math.cos(heading),
        vy=s.speed * math.sin(heading),
        steering=steering,
    )


def map_sigma_to_cpm(s: SigmaState, params: VehicleParams) -> CpmState:
    """Collapse the velocity vector to a scalar speed and normalize steering."""
    return CpmState(
        x=s.x,
        y=s.y,
        yaw=s.yaw,
        speed=math.hypot(s.vx, s.vy),
        steer_norm=s.steering / params.max_steering,
    )


def step_bicycle(
    s: SigmaState,
    cmd: ActionCmd,
    dt: float,
    params: VehicleParams,
    substeps: int = 1,
) -> SigmaState:
    """One explicit-Euler step of the kinematic bicycle under actuation limits."""
    if not dt > 0.0:
        raise ValueError("dt must be positive")
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if substeps > 1:
        h = dt / substeps
        for _ in range(substeps):
            s = step_bicycle(s, cmd, h, params)
        return s

    v0 = math.hypot(s.vx, s.vy)
    rate = params.max_steering_rate * dt
    steer = clamp(cmd.steer, s.steering - rate, s.steering + rate)
    steer = clamp(steer, -params.max_steering, params.max_steering)
    v1 = clamp(cmd.speed, v0 + params.min_accel * dt, v0 + params.max_accel * dt)
    v1 = clamp(v1, 0.0, params.max_speed)

    beta = slip_angle(steer, params)
    heading = s.yaw + beta
    x = s.x + v1 * math.cos(heading) * dt
    y = s.y + v1 * math.sin(heading) * dt
    yaw = wrap_angle(s.yaw + (v1 / params.rear_wheelbase) * math.sin(beta) * dt)
    return SigmaState(
        x=x,
        y=y,
        yaw=yaw,
        vx=v1 * math.cos(yaw + beta),
        vy=v1 * math.sin(yaw + beta),
        steering=steer,
    )


def rescale_action(raw_speed: float, raw_steer: float, params: VehicleParams) -> ActionCmd:
    """Map raw policy outputs in (-1, 1) to the physical command ranges."""
    if not (-1.0 < raw_speed < 1.0 and -1.0 < raw_steer < 1.0):
        raise ValueError(f"raw action outside (-1, 1): ({raw_speed}, {raw_steer})")
    return ActionCmd(
        speed=(raw_speed + 1.0) / 2.0 * params.max_speed,
        steer=raw_steer * params.max_steering,
    )
