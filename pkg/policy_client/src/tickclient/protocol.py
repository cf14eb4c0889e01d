"""Line-delimited JSON framing for the tick protocol (TCP or stdio)."""
from __future__ import annotations

import hashlib
import json
import socket
import sys

WIRE_VERSION = 1


class ProtocolError(RuntimeError):
    """Peer violated the wire protocol."""


class ServerClosed(Exception):
    """Server closed the stream at a message boundary (normal episode end)."""


def canonical_dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def map_hash(doc: dict) -> str:
    return hashlib.sha256(canonical_dumps(doc).encode()).hexdigest()


def _parse_line(line: bytes) -> dict:
    try:
        msg = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"malformed message: {exc}") from None
    if not isinstance(msg, dict):
        raise ProtocolError("malformed message: expected a JSON object")
    return msg


class SocketChannel:
    def __init__(self, sock: socket.socket):
        self._sock = sock
        self._buf = b""

    def send_obj(self, obj: dict) -> None:
        try:
            self._sock.sendall((canonical_dumps(obj) + "\n").encode())
        except OSError as exc:
            raise ProtocolError(f"send failed: {exc}") from None

    def recv_obj(self) -> dict:
        while b"\n" not in self._buf:
            try:
                chunk = self._sock.recv(65536)
            except OSError as exc:
                raise ProtocolError(f"recv failed: {exc}") from None
            if not chunk:
                if self._buf:
                    raise ProtocolError("stream ended mid-message")
                raise ServerClosed
            self._buf += chunk
        line, _, self._buf = self._buf.partition(b"\n")
        return _parse_line(line)

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


class StdioChannel:
    def __init__(self, infile=None, outfile=None):
        self._in = infile if infile is not None else sys.stdin
        self._out = outfile if outfile is not None else sys.stdout

    def send_obj(self, obj: dict) -> None:
        self._out.write(canonical_dumps(obj) + "\n")
        self._out.flush()

    def recv_obj(self) -> dict:
        line = self._in.readline()
        if not line:
            raise ServerClosed
        if isinstance(line, str):
            line = line.encode()
        return _parse_line(line)

    def close(self) -> None:
        pass
