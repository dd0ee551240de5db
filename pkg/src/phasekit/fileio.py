"""On-disk formats: raw field files, grayscale rasters, trace CSV, sidecars.

Raw field files are little-endian throughout:

  CFLD  magic "CFLD" | version u8 = 1 | width u32 | height u32
        | width*height (re, im) float64 pairs, row-major
  IFLD  same layout with magic "IFLD" and a single float64 per pixel
        (real-only payload, used for intensity measurements)

Every CLI output gets a JSON sidecar carrying the fully resolved
parameters and seed, sufficient to reproduce the file bit-exactly.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np
from PIL import Image

CFLD_MAGIC = b"CFLD"
IFLD_MAGIC = b"IFLD"
FORMAT_VERSION = 1

_HEADER = "<4sBII"
_HEADER_SIZE = struct.calcsize(_HEADER)


class FileFormatError(ValueError):
    pass


def _write_raw(path, magic: bytes, payload: bytes, width: int, height: int) -> None:
    header = struct.pack(_HEADER, magic, FORMAT_VERSION, width, height)
    Path(path).write_bytes(header + payload)


def _read_raw(path, magic: bytes) -> tuple[int, int, bytes]:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER_SIZE:
        raise FileFormatError(f"{path}: truncated header")
    got_magic, version, width, height = struct.unpack_from(_HEADER, blob)
    if got_magic != magic:
        raise FileFormatError(f"{path}: expected magic {magic!r}, got {got_magic!r}")
    if version != FORMAT_VERSION:
        raise FileFormatError(f"{path}: unsupported format version {version}")
    return width, height, blob[_HEADER_SIZE:]


def write_complex_field(path, field: np.ndarray) -> None:
    field = np.asarray(field, dtype=np.complex128)
    if field.ndim != 2:
        raise ValueError("field must be 2-D")
    height, width = field.shape
    # '<c16' stores each value as a little-endian (re, im) float64 pair
    _write_raw(path, CFLD_MAGIC, np.ascontiguousarray(field, dtype="<c16").tobytes(), width, height)


def read_complex_field(path) -> np.ndarray:
    width, height, payload = _read_raw(path, CFLD_MAGIC)
    expected = 16 * width * height
    if len(payload) != expected:
        raise FileFormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<c16").astype(np.complex128).reshape(height, width)


def write_intensity(path, img: np.ndarray) -> None:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError("intensity image must be 2-D")
    height, width = img.shape
    _write_raw(path, IFLD_MAGIC, np.ascontiguousarray(img, dtype="<f8").tobytes(), width, height)


def read_intensity(path) -> np.ndarray:
    width, height, payload = _read_raw(path, IFLD_MAGIC)
    expected = 8 * width * height
    if len(payload) != expected:
        raise FileFormatError(f"{path}: payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(height, width)


def read_gray(path) -> np.ndarray:
    """Load an 8- or 16-bit grayscale raster as float64 values in [0, 255]."""
    with Image.open(path) as im:
        if im.mode == "I;16":
            arr = np.asarray(im, dtype=np.float64) * (255.0 / 65535.0)
        elif im.mode in ("L", "I", "F"):
            arr = np.asarray(im.convert("F"), dtype=np.float64)
        else:
            arr = np.asarray(im.convert("L"), dtype=np.float64)
    if arr.ndim != 2:
        raise FileFormatError(f"{path}: expected a single-channel image")
    return arr


def write_gray_u8(path, img: np.ndarray) -> None:
    """Write a [0, 255] image as an 8-bit grayscale PNG."""
    data = np.clip(np.rint(np.asarray(img, dtype=np.float64)), 0, 255).astype(np.uint8)
    Image.fromarray(data).save(path, format="PNG")


TRACE_HEADER = ["iter", "residual", "seconds", "phase", "ssim", "psnr"]


def write_trace_csv(path, trace) -> None:
    """Write per-iteration records; ssim/psnr stay blank without ground truth."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_HEADER)
        for rec in trace.records:
            writer.writerow(
                [
                    rec.iteration,
                    repr(float(rec.residual)),
                    f"{rec.seconds:.6f}",
                    rec.phase_index,
                    "" if rec.ssim is None else repr(float(rec.ssim)),
                    "" if rec.psnr is None else repr(float(rec.psnr)),
                ]
            )


def read_trace_csv(path) -> dict[str, np.ndarray]:
    """Read a trace CSV back into column arrays (NaN for blank metrics)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != TRACE_HEADER:
            raise FileFormatError(f"{path}: unexpected trace header {header}")
        rows = [row for row in reader if row]
    cols = {name: [] for name in TRACE_HEADER}
    for row in rows:
        for name, value in zip(TRACE_HEADER, row):
            cols[name].append(value)

    def _floats(values):
        return np.array([float(v) if v != "" else np.nan for v in values])

    return {
        "iter": np.array([int(v) for v in cols["iter"]]),
        "residual": _floats(cols["residual"]),
        "seconds": _floats(cols["seconds"]),
        "phase": np.array([int(v) for v in cols["phase"]]),
        "ssim": _floats(cols["ssim"]),
        "psnr": _floats(cols["psnr"]),
    }


def write_sidecar(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_sidecar(path) -> dict:
    return json.loads(Path(path).read_text())
