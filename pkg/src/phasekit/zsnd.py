"""Client for the ZSND denoiser wire protocol.

The denoiser runs out of process (a spawned subprocess speaking the
protocol on stdio, or a localhost TCP server).  Frames are binary, all
integers little-endian, no padding:

  request:  magic b"ZSND" | version u8=1 | type u8 (0 handshake, 1 denoise)
            | width u32 | height u32 | sigma f32
            | payload width*height f32 row-major values in [0, 255]
            (a handshake has width = height = 0 and no payload)
  response: magic b"ZSND" | version u8=1 | status u8 (0 ok, 1 error)
            | width u32 | height u32
            | payload as above on ok; on error u32 message length + UTF-8

One request is in flight per connection; callers needing parallelism open
multiple clients.
"""

from __future__ import annotations

import os
import select
import shlex
import socket
import struct
import subprocess
import time
from dataclasses import dataclass

import numpy as np

MAGIC = b"ZSND"
VERSION = 1
MSG_HANDSHAKE = 0
MSG_DENOISE = 1
STATUS_OK = 0
STATUS_ERROR = 1

_REQ_HEADER = "<4sBBIIf"
_RESP_HEADER = "<4sBBII"

REQ_HEADER_SIZE = struct.calcsize(_REQ_HEADER)  # 18
RESP_HEADER_SIZE = struct.calcsize(_RESP_HEADER)  # 14


class DenoiserError(Exception):
    """Base class for denoiser endpoint failures."""


class DenoiserTransportError(DenoiserError):
    """Connection-level failure (spawn, connect, timeout, closed pipe); retriable."""


class DenoiserProtocolError(DenoiserError):
    """The peer answered, but the reply violates the wire protocol."""


class DenoiserServerError(DenoiserError):
    """The server reported an error status for the request."""


def encode_request(msg_type: int, width: int, height: int, sigma: float, payload: bytes = b"") -> bytes:
    return struct.pack(_REQ_HEADER, MAGIC, VERSION, msg_type, width, height, sigma) + payload


def encode_response(status: int, width: int, height: int, payload: bytes = b"") -> bytes:
    return struct.pack(_RESP_HEADER, MAGIC, VERSION, status, width, height) + payload


@dataclass(frozen=True)
class EndpointSpec:
    """Transport descriptor: a subprocess command line or a host:port address."""

    kind: str  # "subprocess" | "tcp"
    command: tuple[str, ...] = ()
    host: str = ""
    port: int = 0
    timeout: float = 60.0

    @classmethod
    def parse(cls, descriptor: str, timeout: float = 60.0) -> "EndpointSpec":
        """host:port when the descriptor looks like an address, else a command line."""
        text = descriptor.strip()
        if not text:
            raise ValueError("empty denoiser endpoint descriptor")
        host, sep, port = text.rpartition(":")
        if sep and host and " " not in text and port.isdigit():
            return cls(kind="tcp", host=host, port=int(port), timeout=timeout)
        return cls(kind="subprocess", command=tuple(shlex.split(text)), timeout=timeout)


class _PipeTransport:
    """Frame bytes over a spawned subprocess's stdio."""

    def __init__(self, command: tuple[str, ...]):
        try:
            self.proc = subprocess.Popen(
                command, stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
            )
        except OSError as exc:
            raise DenoiserTransportError(f"cannot spawn denoiser {command!r}: {exc}") from exc
        self._rfd = self.proc.stdout.fileno()
        self._wfd = self.proc.stdin.fileno()
        os.set_blocking(self._rfd, False)
        os.set_blocking(self._wfd, False)

    def write(self, data: bytes, deadline: float) -> None:
        view = memoryview(data)
        while view:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise DenoiserTransportError("timed out writing to denoiser subprocess")
            _, ready, _ = select.select([], [self._wfd], [], remaining)
            if not ready:
                continue
            try:
                n = os.write(self._wfd, view)
            except BrokenPipeError as exc:
                raise DenoiserTransportError("denoiser subprocess closed its stdin") from exc
            view = view[n:]

    def read_exact(self, size: int, deadline: float) -> bytes:
        chunks = []
        got = 0
        while got < size:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise DenoiserTransportError("timed out reading from denoiser subprocess")
            ready, _, _ = select.select([self._rfd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(self._rfd, size - got)
            if not chunk:
                raise DenoiserTransportError("denoiser subprocess closed its stdout")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=5)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class _TcpTransport:
    """Frame bytes over a localhost stream socket."""

    def __init__(self, host: str, port: int, timeout: float):
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise DenoiserTransportError(f"cannot connect to denoiser at {host}:{port}: {exc}") from exc

    def write(self, data: bytes, deadline: float) -> None:
        self.sock.settimeout(max(deadline - time.monotonic(), 1e-3))
        try:
            self.sock.sendall(data)
        except OSError as exc:
            raise DenoiserTransportError(f"send failed: {exc}") from exc

    def read_exact(self, size: int, deadline: float) -> bytes:
        chunks = []
        got = 0
        while got < size:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise DenoiserTransportError("timed out reading from denoiser socket")
            self.sock.settimeout(remaining)
            try:
                chunk = self.sock.recv(size - got)
            except socket.timeout as exc:
                raise DenoiserTransportError("timed out reading from denoiser socket") from exc
            except OSError as exc:
                raise DenoiserTransportError(f"recv failed: {exc}") from exc
            if not chunk:
                raise DenoiserTransportError("denoiser closed the connection")
            chunks.append(chunk)
            got += len(chunk)
        return b"".join(chunks)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class DenoiserClient:
    """Serialized request/response client for one denoiser endpoint.

    The connection is opened lazily (or via ``open``/context manager) and a
    handshake is exchanged before the first denoise request.
    ``denoise_count`` tracks how many denoise requests were issued, which
    benchmark reports use as the hardware-independent cost proxy.
    """

    def __init__(self, spec: EndpointSpec):
        self.spec = spec
        self._transport = None
        self.denoise_count = 0

    @classmethod
    def from_descriptor(cls, descriptor: str, timeout: float = 60.0) -> "DenoiserClient":
        return cls(EndpointSpec.parse(descriptor, timeout=timeout))

    def __enter__(self) -> "DenoiserClient":
        self.open()
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def open(self) -> None:
        if self._transport is not None:
            return
        if self.spec.kind == "subprocess":
            self._transport = _PipeTransport(self.spec.command)
        elif self.spec.kind == "tcp":
            self._transport = _TcpTransport(self.spec.host, self.spec.port, self.spec.timeout)
        else:
            raise ValueError(f"unknown endpoint kind {self.spec.kind!r}")
        try:
            self._handshake()
        except DenoiserError:
            self.close()
            raise

    def close(self) -> None:
        if self._transport is not None:
            self._transport.close()
            self._transport = None

    def _deadline(self) -> float:
        return time.monotonic() + self.spec.timeout

    def _handshake(self) -> None:
        deadline = self._deadline()
        self._transport.write(encode_request(MSG_HANDSHAKE, 0, 0, 0.0), deadline)
        status, width, height, _ = self._read_response(deadline, expect_payload=False)
        if status != STATUS_OK or width != 0 or height != 0:
            raise DenoiserProtocolError(f"handshake rejected (status={status}, {width}x{height})")

    def _read_response(self, deadline: float, expect_payload: bool):
        header = self._transport.read_exact(RESP_HEADER_SIZE, deadline)
        magic, version, status, width, height = struct.unpack(_RESP_HEADER, header)
        if magic != MAGIC:
            raise DenoiserProtocolError(f"bad response magic {magic!r}")
        if version != VERSION:
            raise DenoiserProtocolError(f"unsupported protocol version {version}")
        if status == STATUS_ERROR:
            (msg_len,) = struct.unpack("<I", self._transport.read_exact(4, deadline))
            message = self._transport.read_exact(msg_len, deadline).decode("utf-8", "replace")
            raise DenoiserServerError(message)
        payload = b""
        if expect_payload and width * height > 0:
            payload = self._transport.read_exact(4 * width * height, deadline)
        return status, width, height, payload

    def denoise(self, img: np.ndarray, sigma: float) -> np.ndarray:
        """Send one [0, 255] image for denoising at the given noise-level hint.

        Returns a float64 image of identical dimensions.  If the server
        echoes the payload bit-exactly, the input array itself is returned
        so no-op servers cause no precision loss downstream.
        """
        img = np.asarray(img)
        if img.ndim != 2:
            raise ValueError(f"expected a 2-D image, got shape {img.shape}")
        if not np.all(np.isfinite(img)):
            raise ValueError("image contains non-finite values")
        if img.size:
            lo, hi = float(np.min(img)), float(np.max(img))
            if lo < 0.0 or hi > 255.0:
                raise ValueError(f"image values must lie in [0, 255], got [{lo}, {hi}]")

        if self._transport is None:
            self.open()

        height, width = img.shape
        sent_payload = np.ascontiguousarray(img, dtype="<f4").tobytes()
        deadline = self._deadline()
        self._transport.write(
            encode_request(MSG_DENOISE, width, height, float(sigma), sent_payload), deadline
        )
        _, r_width, r_height, payload = self._read_response(deadline, expect_payload=True)
        if (r_width, r_height) != (width, height):
            raise DenoiserProtocolError(
                f"reply dimensions {r_width}x{r_height} do not match request {width}x{height}"
            )
        self.denoise_count += 1
        if payload == sent_payload:
            return img
        out = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(height, width)
        return out
