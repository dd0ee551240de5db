"""Serve a denoising backend over stdio or TCP.

One request is in flight per connection.  Malformed frames get an error
response and the connection stays open (the reader consumes exactly the
fixed-size header, so the stream stays aligned as long as the client
frames writes).  Oversized images are rejected after their declared
payload is drained.
"""

from __future__ import annotations

import os
import socket
import sys
import threading
from dataclasses import dataclass

import numpy as np

from . import protocol
from .backends import make_backend

MIN_MAX_SIDE = 16
_DRAIN_CHUNK = 1 << 20
# refuse to drain declared payloads beyond this many pixels (DoS guard)
_DRAIN_LIMIT_PIXELS = 1 << 26


@dataclass
class ServerConfig:
    transport: str = "stdio"  # stdio | tcp
    backend: str = "identity"  # identity | boxblur | drunet
    weights_path: str | None = None
    device: str = "cpu"
    host: str = "127.0.0.1"
    port: int = 0
    max_side: int = 4096

    def __post_init__(self):
        if self.transport not in ("stdio", "tcp"):
            raise ValueError(f"transport must be stdio|tcp, got {self.transport!r}")
        if self.max_side < MIN_MAX_SIDE:
            raise ValueError(f"max_side must be >= {MIN_MAX_SIDE}")
        if self.backend == "drunet" and not self.weights_path:
            raise ValueError("drunet backend needs a weights file")
        if self.backend == "drunet" and not os.path.isfile(self.weights_path):
            raise ValueError(f"weights file not found: {self.weights_path}")


def _read_exact(read_fn, size: int) -> bytes | None:
    """Read exactly size bytes; None on clean EOF at a frame boundary."""
    buf = b""
    while len(buf) < size:
        chunk = read_fn(size - len(buf))
        if not chunk:
            if buf:
                raise ConnectionError("peer closed mid-frame")
            return None
        buf += chunk
    return buf


def _drain(read_fn, size: int) -> bool:
    remaining = size
    while remaining > 0:
        chunk = read_fn(min(remaining, _DRAIN_CHUNK))
        if not chunk:
            return False
        remaining -= len(chunk)
    return True


def serve_stream(read_fn, write_fn, backend, max_side: int) -> None:
    """Answer frames until EOF.  read_fn(n) -> up to n bytes; write_fn(bytes)."""
    while True:
        header = _read_exact(read_fn, protocol.REQ_HEADER.size)
        if header is None:
            return
        try:
            msg_type, width, height, sigma = protocol.parse_header(header)
        except protocol.FrameError as exc:
            write_fn(protocol.error_response(str(exc)))
            continue

        if msg_type == protocol.MSG_HANDSHAKE:
            write_fn(protocol.ok_response(0, 0))
            continue

        n_pixels = width * height
        if width == 0 or height == 0:
            write_fn(protocol.error_response(f"empty image {width}x{height}"))
            continue
        if width > max_side or height > max_side:
            # drain the declared payload so the stream stays aligned
            if n_pixels <= _DRAIN_LIMIT_PIXELS:
                if not _drain(read_fn, 4 * n_pixels):
                    return
                write_fn(
                    protocol.error_response(
                        f"image {width}x{height} exceeds the {max_side} pixel side limit"
                    )
                )
                continue
            write_fn(protocol.error_response("declared image size is implausibly large"))
            return

        payload = _read_exact(read_fn, 4 * n_pixels)
        if payload is None:
            return
        try:
            image = protocol.decode_payload(payload, width, height)
            result = backend.denoise(image, sigma)
        except protocol.FrameError as exc:
            write_fn(protocol.error_response(str(exc)))
            continue
        except Exception as exc:
            write_fn(protocol.error_response(f"backend failure: {type(exc).__name__}: {exc}"))
            continue
        if result.shape != (height, width):
            write_fn(protocol.error_response("backend returned mismatched dimensions"))
            continue
        result = np.clip(result, 0.0, 255.0)
        write_fn(protocol.ok_response(width, height, protocol.encode_image(result)))


def serve(config: ServerConfig) -> None:
    """Run until the peer disconnects (stdio) or forever (tcp)."""
    backend = make_backend(config.backend, config.weights_path, config.device)

    if config.transport == "stdio":
        stdin = os.fdopen(sys.stdin.fileno(), "rb", buffering=0)
        stdout = os.fdopen(sys.stdout.fileno(), "wb", buffering=0)

        def write_fn(data: bytes) -> None:
            stdout.write(data)
            stdout.flush()

        serve_stream(stdin.read, write_fn, backend, config.max_side)
        return

    server_sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    server_sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    server_sock.bind((config.host, config.port))
    server_sock.listen()
    # with port 0 the OS picks; announce so callers can connect
    print(f"LISTENING {server_sock.getsockname()[1]}", file=sys.stderr, flush=True)

    def handle(conn: socket.socket) -> None:
        with conn:
            try:
                serve_stream(conn.recv, conn.sendall, backend, config.max_side)
            except (ConnectionError, OSError):
                pass

    while True:
        conn, _ = server_sock.accept()
        threading.Thread(target=handle, args=(conn,), daemon=True).start()
