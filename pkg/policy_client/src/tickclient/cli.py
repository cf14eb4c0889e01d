"""policy-client: attach a scripted policy to a motionlab tick server.

Exit codes: 0 clean session (server closed), 2 usage error, 4 protocol error.
"""
from __future__ import annotations

import argparse
import logging
import socket
import sys

from .client import serve_policy
from .protocol import ProtocolError, SocketChannel, StdioChannel
from .rollout import make_policy


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="policy-client", description=__doc__)
    endpoint = parser.add_mutually_exclusive_group(required=True)
    endpoint.add_argument("--connect", metavar="HOST:PORT", help="dial a tick server")
    endpoint.add_argument(
        "--stdio", action="store_true", help="speak the protocol on stdin/stdout"
    )
    parser.add_argument("--policy", default="pursuit", help="pursuit | constant")
    parser.add_argument("--target-speed", type=float, default=0.75)
    parser.add_argument("--lookahead", type=float, default=0.25)
    parser.add_argument("--speed-frac", type=float, default=0.75)
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        if args.policy == "pursuit":
            policy = make_policy("pursuit", lookahead=args.lookahead, target_speed=args.target_speed)
        elif args.policy == "constant":
            policy = make_policy("constant", speed_frac=args.speed_frac)
        else:
            print(f"error: unknown policy {args.policy!r}", file=sys.stderr)
            return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    if args.stdio:
        channel = StdioChannel()
    else:
        host, _, port_text = args.connect.rpartition(":")
        try:
            port = int(port_text)
        except ValueError:
            print(f"error: bad endpoint {args.connect!r}; use HOST:PORT", file=sys.stderr)
            return 2
        try:
            channel = SocketChannel(socket.create_connection((host or "127.0.0.1", port)))
        except OSError as exc:
            print(f"error: cannot connect to {args.connect}: {exc}", file=sys.stderr)
            return 4

    try:
        ticks = serve_policy(channel, policy)
    except ProtocolError as exc:
        print(f"protocol error: {exc}", file=sys.stderr)
        return 4
    finally:
        channel.close()
    print(f"served {ticks} ticks", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
