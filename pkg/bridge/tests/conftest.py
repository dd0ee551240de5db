import os
import sys
from pathlib import Path

import pytest

BRIDGE_DIR = Path(__file__).resolve().parents[1]
PYTHON = sys.executable


def serve_command(backend: str, extra: str = "") -> str:
    return f"{PYTHON} -m zsnd_bridge.cli serve --transport stdio --backend {backend} {extra}".strip()


def drunet_weights_path() -> Path | None:
    """Released checkpoint location: DRUNET_WEIGHTS env var or weights/drunet_gray.pth."""
    env = os.environ.get("DRUNET_WEIGHTS")
    if env and Path(env).is_file():
        return Path(env)
    default = BRIDGE_DIR / "weights" / "drunet_gray.pth"
    if default.is_file():
        return default
    return None


requires_drunet_weights = pytest.mark.skipif(
    drunet_weights_path() is None,
    reason="released drunet checkpoint not available (set DRUNET_WEIGHTS or place "
    "weights/drunet_gray.pth); this sandbox has no network access to fetch it",
)
