"""Domain types, vehicle parameters, disturbance profiles, and run configuration."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .geometry import wrap_angle


class ConfigError(ValueError):
    """Malformed or inconsistent configuration document."""


def canonical_dumps(obj) -> str:
    """Deterministic JSON encoding (sorted keys, compact separators)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def parse_angle(value, name: str = "angle") -> float:
    """Angle from config: bare numbers are radians, '<x> deg' strings are degrees."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        text = value.strip()
        if text.endswith("deg"):
            try:
                return math.radians(float(text[:-3].strip()))
            except ValueError:
                pass
        raise ConfigError(f"{name}: expected radians or '<value> deg', got {value!r}")
    raise ConfigError(f"{name}: expected a number, got {type(value).__name__}")


@dataclass(frozen=True)
class VehicleParams:
    """Vehicle geometry and actuation limits (defaults: the 1:18 test car)."""

    length: float = 0.22
    width: float = 0.107
    wheelbase: float = 0.15
    rear_wheelbase: float = 0.075
    max_steering: float = math.radians(31.0)
    max_steering_rate: float = math.radians(90.0)
    max_accel: float = 5.0
    min_accel: float = -5.0
    max_speed: float = 1.0

    def __post_init__(self):
        if not self.length > 0.0:
            raise ValueError("length must be positive")
        if not (0.0 < self.rear_wheelbase < self.wheelbase <= self.length):
            raise ValueError("need 0 < rear_wheelbase < wheelbase <= length")
        if not (0.0 < self.max_steering < math.pi / 2):
            raise ValueError("max_steering must be in (0, pi/2)")
        if not self.max_steering_rate > 0.0:
            raise ValueError("max_steering_rate must be positive")
        if not (self.min_accel < 0.0 < self.max_accel):
            raise ValueError("need min_accel < 0 < max_accel")
        if not self.max_speed > 0.0:
            raise ValueError("max_speed must be positive")


DEFAULT_PARAMS = VehicleParams()


@dataclass(frozen=True)
class CpmState:
    """Per-agent state as reported by the testbed: scalar speed, normalized steering."""

    x: float
    y: float
    yaw: float
    speed: float
    steer_norm: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))
        sn = self.steer_norm
        if abs(sn) > 1.0:
            if abs(sn) > 1.0 + 1e-9:
                raise ValueError(f"steer_norm out of [-1, 1]: {sn}")
            object.__setattr__(self, "steer_norm", math.copysign(1.0, sn))


@dataclass(frozen=True)
class SigmaState:
    """Per-agent state in planner form: velocity vector and steering angle."""

    x: float
    y: float
    yaw: float
    vx: float
    vy: float
    steering: float

    def __post_init__(self):
        object.__setattr__(self, "yaw", wrap_angle(self.yaw))

    @property
    def speed(self) -> float:
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class ActionCmd:
    """Commanded speed (m/s) and steering angle (rad)."""

    speed: float
    steer: float


@dataclass(frozen=True)
class Placement:
    """Initial pose, speed, and assigned reference path of one agent."""

    x: float
    y: float
    yaw: float
    speed: float = 0.0
    path: str | None = None


@dataclass(frozen=True)
class FollowerGains:
    """Trajectory-follower tuning: lookahead horizon and speed-error gain."""

    lookahead_time: float = 0.3
    k_s: float = 0.5

    def __post_init__(self):
        if not self.lookahead_time > 0.0:
            raise ValueError("lookahead_time must be positive")
        if self.k_s < 0.0:
            raise ValueError("k_s must be non-negative")


@dataclass(frozen=True)
class DisturbanceProfile:
    """Observation noise, actuation delay, and localization latency knobs.

    The preset magnitudes shipped with the package are calibration knobs,
    not measurements of any particular testbed.
    """

    obs_position_noise_std: float = 0.0
    obs_yaw_noise_std: float = 0.0
    actuation_delay: int = 0
    localization_latency: int = 0
    position_noise_enabled: bool = True
    yaw_noise_enabled: bool = True
    noise_seed: int | None = None

    def __post_init__(self):
        if self.obs_position_noise_std < 0.0 or self.obs_yaw_noise_std < 0.0:
            raise ValueError("noise std must be non-negative")
        if self.actuation_delay < 0 or self.localization_latency < 0:
            raise ValueError("delays must be non-negative")

    @property
    def position_noise(self) -> float:
        return self.obs_position_noise_std if self.position_noise_enabled else 0.0

    @property
    def yaw_noise(self) -> float:
        return self.obs_yaw_noise_std if self.yaw_noise_enabled else 0.0


PRESETS: dict[str, DisturbanceProfile] = {
    "sim": DisturbanceProfile(),
    "twin": DisturbanceProfile(obs_position_noise_std=0.002, actuation_delay=1),
    "lab": DisturbanceProfile(
        obs_position_noise_std=0.005,
        obs_yaw_noise_std=math.radians(0.5),
        actuation_delay=2,
        localization_latency=1,
    ),
}


@dataclass(frozen=True)
class RunConfig:
    """Everything one episode needs besides the map and the planner binding."""

    dt: float = 0.1
    steps: int = 180
    n_agent: int = 3
    H_c: int = 5
    H_p: int = 8
    mode: str = "direct"
    disturbance: DisturbanceProfile = field(default_factory=DisturbanceProfile)
    seed: int = 0
    placements: tuple[Placement, ...] | None = None
    reset_on_collision: bool = False
    peer_prediction: str = "constant_velocity"
    follower: FollowerGains = field(default_factory=FollowerGains)

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ConfigError("dt must be positive")
        if self.steps < 1:
            raise ConfigError("steps must be >= 1")
        if self.n_agent < 1:
            raise ConfigError("n_agent must be >= 1")
        if not (1 <= self.H_c <= self.H_p):
            raise ConfigError("need 1 <= H_c <= H_p")
        if self.mode not in ("direct", "follow"):
            raise ConfigError(f"mode must be 'direct' or 'follow', got {self.mode!r}")
        if self.peer_prediction not in ("frozen", "constant_velocity"):
            raise ConfigError("peer_prediction must be 'frozen' or 'constant_velocity'")
        if self.placements is not None and len(self.placements) != self.n_agent:
            raise ConfigError(
                f"{len(self.placements)} placements for n_agent={self.n_agent}"
            )


def _check_keys(doc: dict, allowed, what: str) -> None:
    unknown = set(doc) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {what} keys: {sorted(unknown)}")


def _placement_from_doc(doc: dict, index: int) -> Placement:
    _check_keys(doc, ("x", "y", "yaw", "speed", "path"), f"placement[{index}]")
    try:
        return Placement(
            x=float(doc["x"]),
            y=float(doc["y"]),
            yaw=parse_angle(doc.get("yaw", 0.0), f"placement[{index}].yaw"),
            speed=float(doc.get("speed", 0.0)),
            path=doc.get("path"),
        )
    except KeyError as exc:
        raise ConfigError(f"placement[{index}] missing key {exc}") from None


def placements_from_doc(docs) -> tuple[Placement, ...]:
    if not isinstance(docs, list):
        raise ConfigError("placements must be a list")
    return tuple(_placement_from_doc(p, i) for i, p in enumerate(docs))


def disturbance_from_doc(source) -> DisturbanceProfile:
    """Build a profile from a preset name or a JSON object."""
    if isinstance(source, str):
        try:
            return PRESETS[source]
        except KeyError:
            raise ConfigError(
                f"unknown disturbance preset {source!r}; known: {sorted(PRESETS)}"
            ) from None
    if not isinstance(source, dict):
        raise ConfigError("disturbance must be a preset name or an object")
    allowed = [f.name for f in fields(DisturbanceProfile)]
    _check_keys(source, allowed, "disturbance")
    kwargs = dict(source)
    if "obs_yaw_noise_std" in kwargs:
        kwargs["obs_yaw_noise_std"] = parse_angle(kwargs["obs_yaw_noise_std"], "obs_yaw_noise_std")
    try:
        return DisturbanceProfile(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad disturbance profile: {exc}") from None


def config_from_doc(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a JSON object")
    allowed = [f.name for f in fields(RunConfig)]
    _check_keys(doc, allowed, "config")
    kwargs = dict(doc)
    if "disturbance" in kwargs:
        kwargs["disturbance"] = disturbance_from_doc(kwargs["disturbance"])
    if "follower" in kwargs:
        fdoc = kwargs["follower"]
        if not isinstance(fdoc, dict):
            raise ConfigError("follower must be an object")
        _check_keys(fdoc, ("lookahead_time", "k_s"), "follower")
        try:
            kwargs["follower"] = FollowerGains(**fdoc)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad follower gains: {exc}") from None
    if kwargs.get("placements") is not None:
        kwargs["placements"] = placements_from_doc(kwargs["placements"])
    try:
        return RunConfig(**kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config: {exc}") from None


def load_config(source) -> RunConfig:
    """Load a run configuration from a dict, JSON text, or a file path."""
    if isinstance(source, RunConfig):
        return source
    if isinstance(source, dict):
        return config_from_doc(source)
    path = Path(source)
    try:
        doc = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return config_from_doc(doc)


def config_to_doc(cfg: RunConfig) -> dict:
    """Round-trippable JSON form of a RunConfig (fixed key order)."""
    dist = cfg.disturbance
    doc = {
        "dt": cfg.dt,
        "steps": cfg.steps,
        "n_agent": cfg.n_agent,
        "H_c": cfg.H_c,
        "H_p": cfg.H_p,
        "mode": cfg.mode,
        "seed": cfg.seed,
        "reset_on_collision": cfg.reset_on_collision,
        "peer_prediction": cfg.peer_prediction,
        "disturbance": {
            "obs_position_noise_std": dist.obs_position_noise_std,
            "obs_yaw_noise_std": dist.obs_yaw_noise_std,
            "actuation_delay": dist.actuation_delay,
            "localization_latency": dist.localization_latency,
            "position_noise_enabled": dist.position_noise_enabled,
            "yaw_noise_enabled": dist.yaw_noise_enabled,
            "noise_seed": dist.noise_seed,
        },
        "follower": {
            "lookahead_time": cfg.follower.lookahead_time,
            "k_s": cfg.follower.k_s,
        },
    }
    if cfg.placements is not None:
        doc["placements"] = [
            {"x": p.x, "y": p.y, "yaw": p.yaw, "speed": p.speed, "path": p.path}
            for p in cfg.placements
        ]
    return doc


def with_placements(cfg: RunConfig, placements) -> RunConfig:
    placements = tuple(placements)
    return replace(cfg, placements=placements, n_agent=len(placements))
