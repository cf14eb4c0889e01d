"""Record the golden wire transcript used by the protocol-conformance test.

Feeds the client a small hand-built session (straight lane, two agents,
three ticks, one path-exhaustion case) and freezes both directions of the
exchange byte for byte.
"""
from __future__ import annotations

import socket
import threading
from pathlib import Path

from tickclient.client import serve_policy
from tickclient.protocol import SocketChannel, canonical_dumps, map_hash
from tickclient.rollout import make_policy

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"

MAP_DOC = {
    "lanelets": [
        {
            "id": "main",
            "left": [[0.0, 0.15], [20.0, 0.15]],
            "right": [[0.0, -0.15], [20.0, -0.15]],
            "center": [[0.0, 0.0], [20.0, 0.0]],
            "successors": [],
        }
    ],
    "reference_paths": [{"name": "main", "lanelets": ["main"]}],
}


def agent(i, x, y, yaw, speed, steer_norm):
    return {"id": i, "x": x, "y": y, "yaw": yaw, "speed": speed, "steer_norm": steer_norm}


def session_lines():
    digest = map_hash(MAP_DOC)
    yield {"type": "hello", "version": 1, "dt": 0.1, "H_c": 3, "H_p": 5, "map": MAP_DOC}
    yield {
        "type": "tick",
        "step": 0,
        "time": 0.0,
        "agents": [agent(0, 0.5, 0.0, 0.0, 0.5, 0.0), agent(1, 2.0, 0.04, -0.05, 0.6, 0.2)],
        "map_hash": digest,
    }
    yield {
        "type": "tick",
        "step": 1,
        "time": 0.1,
        "agents": [agent(0, 0.55, 0.0, 0.0, 0.5, 0.0), agent(1, 2.06, 0.037, -0.04, 0.6, 0.1)],
        "map_hash": digest,
    }
    yield {  # agent 1 is about to run off the open path: expect a hold trajectory
        "type": "tick",
        "step": 2,
        "time": 0.2,
        "agents": [agent(0, 0.6, 0.0, 0.0, 0.5, 0.0), agent(1, 19.9, 0.0, 0.0, 0.6, 0.0)],
        "map_hash": digest,
    }


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    server_sock, client_sock = socket.socketpair()
    server_lines = [canonical_dumps(msg) for msg in session_lines()]
    client_payload = bytearray()

    def server():
        buf = b""
        # expect the hello ack after our hello, then one plan per tick
        server_sock.sendall((server_lines[0] + "\n").encode())
        expected = 1 + (len(server_lines) - 1)
        received = 0
        next_line = 1
        while received < expected:
            chunk = server_sock.recv(65536)
            if not chunk:
                break
            buf += chunk
            client_payload.extend(chunk)
            while b"\n" in buf:
                _, _, buf = buf.partition(b"\n")
                received += 1
                if next_line < len(server_lines):
                    server_sock.sendall((server_lines[next_line] + "\n").encode())
                    next_line += 1
        server_sock.close()

    thread = threading.Thread(target=server)
    thread.start()
    ticks = serve_policy(SocketChannel(client_sock), make_policy("pursuit"))
    thread.join()
    client_sock.close()
    assert ticks == 3, ticks

    (DATA / "golden_server.jsonl").write_text("\n".join(server_lines) + "\n")
    (DATA / "golden_client.jsonl").write_bytes(bytes(client_payload))
    print(f"recorded {len(server_lines)} server lines, {len(client_payload)} client bytes")


if __name__ == "__main__":
    main()
