"""ZSND wire protocol framing (server side).

All integers little-endian, no padding.  Request header is 18 bytes:
magic "ZSND", version u8, message type u8 (0 handshake / 1 denoise),
width u32, height u32, sigma f32; a denoise request is followed by
width*height float32 payload values in [0, 255].  Responses carry a
14-byte header (magic, version, status u8, width u32, height u32)
followed by the payload on success or by a u32-length-prefixed UTF-8
message on error.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

MAGIC = b"ZSND"
VERSION = 1
MSG_HANDSHAKE = 0
MSG_DENOISE = 1
STATUS_OK = 0
STATUS_ERROR = 1

REQ_HEADER = struct.Struct("<4sBBIIf")
RESP_HEADER = struct.Struct("<4sBBII")


class FrameError(Exception):
    """Malformed frame; the message is sent back to the client."""


@dataclass
class Request:
    msg_type: int
    width: int
    height: int
    sigma: float
    image: np.ndarray | None = None  # float64 [0,255], shape (height, width)


def parse_header(header: bytes) -> tuple[int, int, int, float]:
    """Validate an 18-byte request header; returns (type, width, height, sigma)."""
    magic, version, msg_type, width, height, sigma = REQ_HEADER.unpack(header)
    if magic != MAGIC:
        raise FrameError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FrameError(f"unsupported protocol version {version}")
    if msg_type not in (MSG_HANDSHAKE, MSG_DENOISE):
        raise FrameError(f"unknown message type {msg_type}")
    return msg_type, width, height, sigma


def decode_payload(payload: bytes, width: int, height: int) -> np.ndarray:
    if len(payload) != 4 * width * height:
        raise FrameError(f"payload is {len(payload)} bytes, expected {4 * width * height}")
    return np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(height, width)


def encode_image(image: np.ndarray) -> bytes:
    return np.ascontiguousarray(image, dtype="<f4").tobytes()


def ok_response(width: int, height: int, payload: bytes = b"") -> bytes:
    return RESP_HEADER.pack(MAGIC, VERSION, STATUS_OK, width, height) + payload


def error_response(message: str) -> bytes:
    encoded = message.encode("utf-8")
    return (
        RESP_HEADER.pack(MAGIC, VERSION, STATUS_ERROR, 0, 0)
        + struct.pack("<I", len(encoded))
        + encoded
    )
