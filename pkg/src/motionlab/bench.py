"""Run-matrix orchestration, aggregation, and report generation.

A matrix is environments x policy seeds x placements x repetitions. Every
cell derives its episode seeds deterministically from the master seed and
its coordinates, so identical matrices reproduce identical results byte for
byte. Placements are shared across environments, which keeps initial
positions matched between realism tiers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from statistics import fmean

import numpy as np

from .core import (
    ConfigError,
    DEFAULT_PARAMS,
    Placement,
    RunConfig,
    VehicleParams,
    config_from_doc,
    placements_from_doc,
    with_placements,
)
from .executor import InProcessPlanner, RunRecord, run_episode
from .maps import MapModel
from .metrics import RunMetrics, compute_metrics
from .policies import make_policy

_MASK64 = (1 << 64) - 1
METRIC_KEYS = ("cra_a", "cra_l", "cd", "as")
_HEADERS = {
    "cra_a": "CRA-A ↓ [events/100 m]",
    "cra_l": "CRA-L ↓ [m/100 m]",
    "cd": "CD ↓ [m]",
    "as": "AS ↑ [m/s]",
}
_DECIMALS = {"cra_a": 2, "cra_l": 2, "cd": 3, "as": 3}


class BenchError(ConfigError):
    pass


@dataclass(frozen=True)
class AggregateStats:
    """Mean, sample standard deviation, and interquartile mean of one metric."""

    mean: float
    std: float
    iqm: float
    n: int

    def to_doc(self) -> dict:
        return {"mean": self.mean, "std": self.std, "iqm": self.iqm, "n": self.n}


def aggregate(values) -> AggregateStats:
    """Aggregate a sample; std is the n-1 estimator (0.0 when n == 1).

    The IQM discards the floor(n/4) smallest and largest values and averages
    the rest.
    """
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("aggregate needs at least one value")
    n = len(vals)
    mean = fmean(vals)
    if n > 1:
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1))
    else:
        std = 0.0
    trim = n // 4
    middle = sorted(vals)[trim : n - trim]
    return AggregateStats(mean=mean, std=std, iqm=fmean(middle), n=n)


@dataclass(frozen=True)
class EnvSpec:
    """One benchmark environment: a name and the config it runs under."""

    name: str
    config: RunConfig


@dataclass(frozen=True)
class BenchMatrix:
    environments: tuple[EnvSpec, ...]
    placements: tuple[tuple[Placement, ...], ...]
    policy: str = "pursuit"
    policy_args: dict = field(default_factory=dict)
    policy_seeds: tuple[int, ...] = (0,)
    repetitions: int = 1
    master_seed: int = 0

    def __post_init__(self):
        if not self.environments:
            raise BenchError("matrix needs at least one environment")
        if not self.placements:
            raise BenchError("matrix needs at least one placement set")
        if not self.policy_seeds:
            raise BenchError("matrix needs at least one policy seed")
        if self.repetitions < 1:
            raise BenchError("repetitions must be >= 1")
        names = [e.name for e in self.environments]
        if len(set(names)) != len(names):
            raise BenchError("environment names must be unique")

    @property
    def runs_per_environment(self) -> int:
        return len(self.policy_seeds) * len(self.placements) * self.repetitions


def load_matrix(source) -> BenchMatrix:
    """Load a matrix from a dict or JSON file."""
    if isinstance(source, BenchMatrix):
        return source
    if isinstance(source, dict):
        doc = source
    else:
        path = Path(source)
        try:
            doc = json.loads(path.read_text())
        except OSError as exc:
            raise BenchError(f"cannot read matrix {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise BenchError(f"matrix {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise BenchError("matrix document must be a JSON object")
    allowed = {
        "environments",
        "placements",
        "policy",
        "policy_seeds",
        "repetitions",
        "master_seed",
    }
    unknown = set(doc) - allowed
    if unknown:
        raise BenchError(f"unknown matrix keys: {sorted(unknown)}")
    envs = []
    for i, entry in enumerate(doc.get("environments", [])):
        if not isinstance(entry, dict) or set(entry) - {"name", "config"}:
            raise BenchError(f"environments[{i}] needs 'name' and 'config'")
        envs.append(EnvSpec(name=str(entry["name"]), config=config_from_doc(entry.get("config", {}))))
    placements = []
    for i, group in enumerate(doc.get("placements", [])):
        if not isinstance(group, list):
            raise BenchError(f"placements[{i}] must be a list of poses")
        placements.append(placements_from_doc(group))
    policy_doc = doc.get("policy", {"name": "pursuit"})
    if not isinstance(policy_doc, dict) or "name" not in policy_doc:
        raise BenchError("policy must be an object with a 'name'")
    policy_args = {k: v for k, v in policy_doc.items() if k != "name"}
    return BenchMatrix(
        environments=tuple(envs),
        placements=tuple(placements),
        policy=str(policy_doc["name"]),
        policy_args=policy_args,
        policy_seeds=tuple(int(s) for s in doc.get("policy_seeds", [0])),
        repetitions=int(doc.get("repetitions", 1)),
        master_seed=int(doc.get("master_seed", 0)),
    )


@dataclass(frozen=True)
class RunOutcome:
    name: str
    metrics: RunMetrics | None
    error: str | None = None
    record: RunRecord | None = None

    @property
    def ok(self) -> bool:
        return self.metrics is not None


@dataclass(frozen=True)
class EnvResult:
    name: str
    runs: tuple[RunOutcome, ...]

    def metric_values(self, key: str) -> list[float]:
        docs = [r.metrics.to_doc() for r in self.runs if r.ok]
        return [d[key] for d in docs]

    def aggregates(self) -> dict[str, AggregateStats]:
        return {key: aggregate(self.metric_values(key)) for key in METRIC_KEYS}


def _cell_seeds(master: int, env_index: int, policy_seed: int, placement_index: int, rep: int):
    entropy = (
        master & _MASK64,
        env_index,
        policy_seed & _MASK64,
        placement_index,
        rep,
    )
    words = np.random.SeedSequence(entropy).generate_state(2, dtype=np.uint64)
    return int(words[0]), int(words[1])


def run_matrix(
    matrix: BenchMatrix,
    map_model: MapModel,
    out_dir=None,
    params: VehicleParams = DEFAULT_PARAMS,
    keep_records: bool = False,
) -> list[EnvResult]:
    """Execute every cell of the matrix (deterministically, in matrix order)."""
    policy = make_policy(matrix.policy, params, **matrix.policy_args)
    results: list[EnvResult] = []
    base = Path(out_dir) if out_dir is not None else None
    for env_index, env in enumerate(matrix.environments):
        outcomes: list[RunOutcome] = []
        for seed_index, policy_seed in enumerate(matrix.policy_seeds):
            for placement_index, placements in enumerate(matrix.placements):
                for rep in range(matrix.repetitions):
                    name = f"s{seed_index}-p{placement_index}-r{rep}"
                    seed, noise_seed = _cell_seeds(
                        matrix.master_seed, env_index, policy_seed, placement_index, rep
                    )
                    cfg = with_placements(env.config, placements)
                    cfg = replace(
                        cfg,
                        seed=seed,
                        disturbance=replace(cfg.disturbance, noise_seed=noise_seed)
                        if cfg.disturbance.noise_seed is None
                        else cfg.disturbance,
                    )
                    try:
                        record = run_episode(cfg, map_model, InProcessPlanner(policy), params)
                        metrics = compute_metrics(record, map_model, params)
                        outcomes.append(
                            RunOutcome(
                                name,
                                metrics,
                                record=record if (keep_records or base is not None) else None,
                            )
                        )
                    except Exception as exc:  # failed cells are reported, never imputed
                        outcomes.append(
                            RunOutcome(name, None, error=f"{type(exc).__name__}: {exc}")
                        )
        results.append(EnvResult(name=env.name, runs=tuple(outcomes)))
    if base is not None:
        _write_results(matrix, results, base, keep_records)
    return results


def _write_results(matrix: BenchMatrix, results: list[EnvResult], base: Path, keep_records: bool):
    base.mkdir(parents=True, exist_ok=True)
    for env in results:
        env_dir = base / env.name
        (env_dir / "runs").mkdir(parents=True, exist_ok=True)
        runs_doc = []
        failed_doc = []
        for outcome in env.runs:
            if outcome.ok:
                runs_doc.append({"name": outcome.name, "metrics": outcome.metrics.to_doc()})
                if outcome.record is not None:
                    outcome.record.save(env_dir / "runs" / f"{outcome.name}.jsonl")
            else:
                failed_doc.append({"name": outcome.name, "error": outcome.error})
        doc = {"environment": env.name, "runs": runs_doc, "failed": failed_doc}
        (env_dir / "metrics.json").write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    summary = {
        "master_seed": matrix.master_seed,
        "policy": matrix.policy,
        "environments": [
            {
                "name": env.name,
                "n": sum(1 for r in env.runs if r.ok),
                "failed": [r.name for r in env.runs if not r.ok],
                "aggregates": {k: v.to_doc() for k, v in env.aggregates().items()}
                if any(r.ok for r in env.runs)
                else {},
            }
            for env in results
        ],
    }
    (base / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=1) + "\n")


def load_results(results_dir) -> list[EnvResult]:
    """Rebuild per-run metrics from the raw files under a results directory."""
    base = Path(results_dir)
    if not base.is_dir():
        raise BenchError(f"{base} is not a results directory")
    metrics_files = sorted(base.glob("*/metrics.json"))
    summary_file = base / "summary.json"
    if summary_file.exists():  # keep the original matrix order, not glob order
        summary = json.loads(summary_file.read_text())
        order = {e["name"]: k for k, e in enumerate(summary.get("environments", []))}
        metrics_files.sort(key=lambda p: order.get(p.parent.name, len(order)))
    results = []
    for metrics_file in metrics_files:
        doc = json.loads(metrics_file.read_text())
        runs = [
            RunOutcome(entry["name"], RunMetrics.from_doc(entry["metrics"]))
            for entry in doc.get("runs", [])
        ]
        runs += [
            RunOutcome(entry["name"], None, error=entry["error"])
            for entry in doc.get("failed", [])
        ]
        results.append(EnvResult(name=doc["environment"], runs=tuple(runs)))
    if not results:
        raise BenchError(f"no metrics.json files under {base}")
    return results


def format_cell(stats: AggregateStats, decimals: int) -> str:
    return (
        f"{stats.mean:.{decimals}f} ± {stats.std:.{decimals}f} ({stats.iqm:.{decimals}f})"
    )


def _resolve_results(results) -> list[EnvResult]:
    if isinstance(results, (str, Path)):
        return load_results(results)
    return list(results)


def emit_report(results, fmt: str = "markdown") -> str:
    """Render aggregates per environment as markdown, CSV, or JSON."""
    envs = _resolve_results(results)
    if not envs:
        raise BenchError("no results to report")
    if fmt in ("markdown", "md"):
        header = "| Environment | " + " | ".join(_HEADERS[k] for k in METRIC_KEYS) + " |"
        sep = "|" + "---|" * (len(METRIC_KEYS) + 1)
        lines = [header, sep]
        for env in envs:
            stats = env.aggregates()
            cells = [format_cell(stats[k], _DECIMALS[k]) for k in METRIC_KEYS]
            lines.append("| " + " | ".join([env.name, *cells]) + " |")
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        lines = ["environment,metric,mean,std,iqm,n"]
        for env in envs:
            for key, stats in env.aggregates().items():
                lines.append(
                    f"{env.name},{key},{stats.mean!r},{stats.std!r},{stats.iqm!r},{stats.n}"
                )
        return "\n".join(lines) + "\n"
    if fmt == "json":
        doc = {
            "environments": [
                {
                    "name": env.name,
                    "n": sum(1 for r in env.runs if r.ok),
                    "metrics": {k: v.to_doc() for k, v in env.aggregates().items()},
                }
                for env in envs
            ]
        }
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"
    raise BenchError(f"unknown report format {fmt!r}")


def select_run(results_dir, select: str = "closest-cd", env: str | None = None) -> tuple[str, str]:
    """Resolve a run selector to (environment, run name)."""
    envs = load_results(results_dir)
    if env is not None:
        matching = [e for e in envs if e.name == env]
        if not matching:
            raise BenchError(f"unknown environment {env!r}")
        envs = matching
    elif len(envs) > 1 and select == "closest-cd":
        raise BenchError("several environments in results; pick one with --env")
    chosen = envs[0]
    ok_runs = [r for r in chosen.runs if r.ok]
    if select == "closest-cd":
        if not ok_runs:
            raise BenchError(f"environment {chosen.name!r} has no successful runs")
        mean_cd = aggregate([r.metrics.cd for r in ok_runs]).mean
        best = min(ok_runs, key=lambda r: abs(r.metrics.cd - mean_cd))
        return chosen.name, best.name
    for candidate in envs:
        if any(r.name == select for r in candidate.runs if r.ok):
            return candidate.name, select
    raise BenchError(f"unknown run id {select!r}")


def export_trajectories(results_dir, select: str = "closest-cd", env: str | None = None) -> str:
    """CSV position series (agent, step, x, y) for one selected run."""
    env_name, run_name = select_run(results_dir, select, env)
    run_path = Path(results_dir) / env_name / "runs" / f"{run_name}.jsonl"
    if not run_path.exists():
        raise BenchError(f"run log {run_path} not found (was the matrix run with --out?)")
    record = RunRecord.load(run_path)
    lines = ["agent,step,x,y"]
    for i in range(record.n_agent):
        for t, row in enumerate(record.states):
            lines.append(f"{i},{t},{row[i].x!r},{row[i].y!r}")
    return "\n".join(lines) + "\n"
