"""Conformance checks a client can run against any ZSND endpoint.

Exercises the handshake, dimension preservation, constant-image
preservation (within half a grey level), determinism, and malformed-frame
error handling, reporting the first failure per check.
"""

from __future__ import annotations

import shlex
import socket
import struct
import subprocess
from dataclasses import dataclass, field

import numpy as np

from . import protocol


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"{'PASS' if c.passed else 'FAIL'}  {c.name}" + (f": {c.detail}" if c.detail else "") for c in self.checks]
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


class _Connection:
    """Minimal client for one endpoint: a subprocess command or host:port."""

    def __init__(self, descriptor: str, timeout: float = 30.0):
        self.timeout = timeout
        host, sep, port = descriptor.strip().rpartition(":")
        if sep and host and " " not in descriptor.strip() and port.isdigit():
            self.sock = socket.create_connection((host, int(port)), timeout=timeout)
            self.proc = None
        else:
            self.proc = subprocess.Popen(
                shlex.split(descriptor), stdin=subprocess.PIPE, stdout=subprocess.PIPE, bufsize=0
            )
            self.sock = None

    def send(self, data: bytes) -> None:
        if self.sock is not None:
            self.sock.sendall(data)
        else:
            self.proc.stdin.write(data)
            self.proc.stdin.flush()

    def recv_exact(self, size: int) -> bytes:
        buf = b""
        while len(buf) < size:
            if self.sock is not None:
                self.sock.settimeout(self.timeout)
                chunk = self.sock.recv(size - len(buf))
            else:
                chunk = self.proc.stdout.read(size - len(buf))
            if not chunk:
                raise ConnectionError("endpoint closed the connection")
            buf += chunk
        return buf

    def read_response(self) -> tuple[int, int, int, bytes | str]:
        header = self.recv_exact(protocol.RESP_HEADER.size)
        magic, version, status, width, height = protocol.RESP_HEADER.unpack(header)
        if magic != protocol.MAGIC or version != protocol.VERSION:
            raise ConnectionError(f"invalid response header {header!r}")
        if status == protocol.STATUS_ERROR:
            (msg_len,) = struct.unpack("<I", self.recv_exact(4))
            return status, width, height, self.recv_exact(msg_len).decode("utf-8", "replace")
        payload = self.recv_exact(4 * width * height) if width * height else b""
        return status, width, height, payload

    def handshake(self) -> bool:
        self.send(protocol.REQ_HEADER.pack(protocol.MAGIC, protocol.VERSION, protocol.MSG_HANDSHAKE, 0, 0, 0.0))
        status, width, height, _ = self.read_response()
        return status == protocol.STATUS_OK and width == 0 and height == 0

    def denoise_raw(self, image: np.ndarray, sigma: float) -> tuple[int, int, int, bytes | str]:
        height, width = image.shape
        payload = np.ascontiguousarray(image, dtype="<f4").tobytes()
        self.send(
            protocol.REQ_HEADER.pack(
                protocol.MAGIC, protocol.VERSION, protocol.MSG_DENOISE, width, height, sigma
            )
            + payload
        )
        return self.read_response()

    def close(self) -> None:
        if self.sock is not None:
            self.sock.close()
        if self.proc is not None:
            self.proc.stdin.close()
            self.proc.stdout.close()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()


def conformance_check(descriptor: str, timeout: float = 30.0) -> ConformanceReport:
    """Run the conformance suite against an endpoint descriptor."""
    report = ConformanceReport()
    conn = _Connection(descriptor, timeout=timeout)
    rng = np.random.default_rng(20240901)
    try:
        try:
            ok = conn.handshake()
            report.checks.append(CheckResult("handshake", ok))
            if not ok:
                return report
        except (ConnectionError, OSError) as exc:
            report.checks.append(CheckResult("handshake", False, str(exc)))
            return report

        img = rng.uniform(0.0, 255.0, (24, 17))
        status, width, height, payload = conn.denoise_raw(img, sigma=10.0)
        dims_ok = status == protocol.STATUS_OK and (height, width) == img.shape
        report.checks.append(
            CheckResult("dimension preservation", dims_ok, f"got status={status} {width}x{height}")
        )

        constant = np.full((20, 20), 128.0)
        status, width, height, payload = conn.denoise_raw(constant, sigma=10.0)
        if status != protocol.STATUS_OK:
            report.checks.append(CheckResult("constant preservation", False, f"status={status}"))
        else:
            out = np.frombuffer(payload, dtype="<f4").astype(np.float64)
            dev = float(np.max(np.abs(out - 128.0)))
            report.checks.append(
                CheckResult("constant preservation", dev <= 0.5, f"max deviation {dev:.3f} grey levels")
            )

        img2 = rng.uniform(0.0, 255.0, (32, 32))
        first = conn.denoise_raw(img2, sigma=25.0)
        second = conn.denoise_raw(img2, sigma=25.0)
        det_ok = first[0] == second[0] == protocol.STATUS_OK and first[3] == second[3]
        report.checks.append(CheckResult("determinism", det_ok))

        # malformed frame: full-size header with a bad magic
        conn.send(b"XXXX" + bytes([protocol.VERSION, protocol.MSG_DENOISE]) + struct.pack("<IIf", 0, 0, 0.0))
        status, _, _, detail = conn.read_response()
        err_ok = status == protocol.STATUS_ERROR and isinstance(detail, str) and len(detail) > 0
        # the connection must remain usable afterwards
        alive = False
        if err_ok:
            status2, w2, h2, _ = conn.denoise_raw(np.full((8, 8), 60.0), sigma=5.0)
            alive = status2 == protocol.STATUS_OK and (w2, h2) == (8, 8)
        report.checks.append(
            CheckResult(
                "malformed frame handling",
                err_ok and alive,
                "error response received, connection kept" if err_ok and alive else f"status={status}",
            )
        )
    except (ConnectionError, OSError) as exc:
        report.checks.append(CheckResult("transport", False, str(exc)))
    finally:
        conn.close()
    return report
