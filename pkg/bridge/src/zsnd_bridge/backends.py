"""Denoising backends served over the wire protocol.

Every backend maps a float64 [0, 255] grayscale image plus a noise-level
hint to an image of identical shape with values in [0, 255], and must be
deterministic: identical inputs produce identical outputs.
"""

from __future__ import annotations

import numpy as np


class IdentityBackend:
    """Echoes the input; the reference no-op used for protocol conformance."""

    name = "identity"

    def denoise(self, image: np.ndarray, sigma: float) -> np.ndarray:
        return image


class BoxBlurBackend:
    """3x3 mean filter with reflected borders (constant images pass through)."""

    name = "boxblur"

    def denoise(self, image: np.ndarray, sigma: float) -> np.ndarray:
        padded = np.pad(image, 1, mode="reflect")
        h, w = image.shape
        total = np.zeros_like(image)
        for dy in (0, 1, 2):
            for dx in (0, 1, 2):
                total = total + padded[dy : dy + h, dx : dx + w]
        return np.clip(total / 9.0, 0.0, 255.0)


def make_backend(name: str, weights_path: str | None = None, device: str = "cpu"):
    if name == "identity":
        return IdentityBackend()
    if name == "boxblur":
        return BoxBlurBackend()
    if name == "drunet":
        from .drunet import DrunetBackend

        if not weights_path:
            raise ValueError("drunet backend needs --weights pointing at the released checkpoint")
        return DrunetBackend(weights_path, device=device)
    raise ValueError(f"unknown backend {name!r} (expected identity|boxblur|drunet)")
