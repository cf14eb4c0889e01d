"""Command-line entry points: simulate, bench, report, serve, export.

Exit codes: 0 success, 2 configuration error, 3 episode failure,
4 wire-protocol error.
"""
from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

from .bench import BenchError, emit_report, export_trajectories, load_matrix, run_matrix
from .core import ConfigError, DEFAULT_PARAMS, RunConfig, load_config
from .executor import EpisodeError, InProcessPlanner, WirePlanner, run_episode, serve_episode
from .maps import MapError, bundled_map, load_map
from .metrics import MetricsError, compute_metrics
from .policies import make_policy
from .wire import LineChannel, ProtocolError, StdioChannel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_EPISODE = 3
EXIT_PROTOCOL = 4


def _load_map_arg(value: str | None):
    if value is None:
        return bundled_map()
    return load_map(value)


def _load_config_arg(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    import dataclasses

    overrides = {}
    if getattr(args, "mode", None):
        overrides["mode"] = args.mode
    if getattr(args, "steps", None) is not None:
        overrides["steps"] = args.steps
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _make_binding(args, cfg: RunConfig):
    spec = args.policy
    if spec == "stdio":
        return WirePlanner(StdioChannel(), deadline=args.deadline)
    if spec.startswith("wire:"):
        try:
            host, port_text = spec[len("wire:") :].rsplit(":", 1)
            port = int(port_text)
        except ValueError:
            raise ConfigError(f"bad wire endpoint {spec!r}; use wire:HOST:PORT") from None
        try:
            sock = socket.create_connection((host, port))
        except OSError as exc:
            raise ProtocolError(f"cannot connect to planner at {host}:{port}: {exc}") from None
        return WirePlanner(LineChannel(sock), deadline=args.deadline)
    kwargs = {}
    if spec == "pursuit":
        kwargs = {"lookahead": args.lookahead, "target_speed": args.target_speed}
    elif spec == "constant":
        kwargs = {"speed_frac": args.speed_frac}
    try:
        policy = make_policy(spec, DEFAULT_PARAMS, **kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return InProcessPlanner(policy)


def _cmd_simulate(args) -> int:
    map_model = _load_map_arg(args.map)
    cfg = _load_config_arg(args)
    binding = _make_binding(args, cfg)
    record = run_episode(cfg, map_model, binding)
    if args.out:
        record.save(args.out)
    try:
        metrics_doc = compute_metrics(record, map_model, DEFAULT_PARAMS).to_doc()
    except MetricsError as exc:
        metrics_doc = {"note": f"metrics unavailable: {exc}"}
    stream = sys.stderr if args.policy == "stdio" else sys.stdout
    print(json.dumps(metrics_doc, sort_keys=True), file=stream)
    return EXIT_OK


def _cmd_bench(args) -> int:
    map_model = _load_map_arg(args.map)
    matrix = load_matrix(args.matrix)
    run_matrix(matrix, map_model, out_dir=args.out)
    print(f"wrote results for {len(matrix.environments)} environment(s) to {args.out}")
    return EXIT_OK


def _cmd_report(args) -> int:
    text = emit_report(args.results, args.format)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_serve(args) -> int:
    map_model = _load_map_arg(args.map)
    cfg = _load_config_arg(args)

    def announce(host, port):
        print(f"listening on {host}:{port}", file=sys.stderr, flush=True)

    record = serve_episode(
        cfg,
        map_model,
        host=args.host,
        port=args.port,
        deadline=args.deadline,
        on_listening=announce,
        accept_timeout=args.accept_timeout,
    )
    if args.out:
        record.save(args.out)
    print(json.dumps(compute_metrics(record, map_model, DEFAULT_PARAMS).to_doc(), sort_keys=True))
    return EXIT_OK


def _cmd_export(args) -> int:
    text = export_trajectories(args.results, select=args.select, env=args.env)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motionlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run one episode")
    sim.add_argument("--map", help="map JSON (default: bundled loop_intersection)")
    sim.add_argument("--config", help="run config JSON")
    sim.add_argument(
        "--policy",
        default="pursuit",
        help="constant | pursuit | random | wire:HOST:PORT | stdio",
    )
    sim.add_argument("--mode", choices=["direct", "follow"], help="override config mode")
    sim.add_argument("--steps", type=int, help="override step count")
    sim.add_argument("--seed", type=int, help="override master seed")
    sim.add_argument("--out", help="write the run record (JSON lines) here")
    sim.add_argument("--target-speed", type=float, default=0.75)
    sim.add_argument("--lookahead", type=float, default=0.25)
    sim.add_argument("--speed-frac", type=float, default=0.75)
    sim.add_argument("--deadline", type=float, help="wire response deadline in seconds")
    sim.set_defaults(func=_cmd_simulate)

    bench = sub.add_parser("bench", help="run a benchmark matrix")
    bench.add_argument("--matrix", required=True, help="matrix JSON")
    bench.add_argument("--map", help="map JSON (default: bundled)")
    bench.add_argument("--out", required=True, help="results directory")
    bench.set_defaults(func=_cmd_bench)

    report = sub.add_parser("report", help="aggregate results into a table")
    report.add_argument("--in", dest="results", required=True, help="results directory")
    report.add_argument("--format", choices=["md", "markdown", "csv", "json"], default="md")
    report.add_argument("--out", help="write the report here instead of stdout")
    report.set_defaults(func=_cmd_report)

    serve = sub.add_parser("serve", help="expose the executor as a tick server")
    serve.add_argument("--port", type=int, default=0, help="TCP port (0 picks a free one)")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--map", help="map JSON (default: bundled)")
    serve.add_argument("--config", help="run config JSON")
    serve.add_argument("--mode", choices=["direct", "follow"])
    serve.add_argument("--steps", type=int)
    serve.add_argument("--seed", type=int)
    serve.add_argument("--out", help="write the run record here")
    serve.add_argument("--deadline", type=float, help="wire response deadline in seconds")
    serve.add_argument("--accept-timeout", type=float, help="give up if no planner connects")
    serve.set_defaults(func=_cmd_serve)

    export = sub.add_parser("export", help="dump one run's positions as CSV")
    export.add_argument("--in", dest="results", required=True, help="results directory")
    export.add_argument("--select", default="closest-cd", help="run name or 'closest-cd'")
    export.add_argument("--env", help="environment name (needed with several)")
    export.add_argument("--out", help="write the CSV here instead of stdout")
    export.set_defaults(func=_cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, MapError, BenchError, MetricsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (EpisodeError, OSError) as exc:
        print(f"episode failed: {exc}", file=sys.stderr)
        return EXIT_EPISODE


if __name__ == "__main__":
    raise SystemExit(main())
