"""Deterministic multi-agent motion-planning simulator and benchmark harness."""

from .core import (
    ActionCmd,
    ConfigError,
    CpmState,
    DEFAULT_PARAMS,
    DisturbanceProfile,
    FollowerGains,
    Placement,
    PRESETS,
    RunConfig,
    SigmaState,
    VehicleParams,
    load_config,
)
from .dynamics import map_cpm_to_sigma, map_sigma_to_cpm, rescale_action, slip_angle, step_bicycle
from .executor import (
    EpisodeError,
    InProcessPlanner,
    ResetEvent,
    RunRecord,
    WirePlanner,
    follow_step,
    run_episode,
    serve_episode,
)
from .geometry import (
    OrientedBox,
    Polyline,
    PolylineProjection,
    footprint,
    lane_violation_depth,
    path_length,
    signed_separation,
    wrap_angle,
)
from .maps import Lanelet, MapError, MapModel, bundled_map, load_map, map_hash, save_map
from .metrics import (
    CollisionEvent,
    MetricsError,
    RunMetrics,
    average_speed,
    centerline_deviation,
    compute_metrics,
    cra_a,
    cra_l,
    detect_collision_events,
    hysteresis_events,
)
from .bench import (
    AggregateStats,
    BenchMatrix,
    EnvSpec,
    aggregate,
    emit_report,
    export_trajectories,
    load_matrix,
    run_matrix,
)
from .planner import Trajectory, TrajectoryView, generate_trajectory, taper_steering
from .policies import (
    ConstantPolicy,
    PathExhausted,
    PolicyInput,
    PurePursuitPolicy,
    RandomPolicy,
    make_policy,
    pure_pursuit_act,
)

__version__ = "0.1.0"
