"""Shared CLI-side validation helpers."""

from __future__ import annotations

import sys

from .optics import OpticalConfig, validate_sampling


def validate_sampling_or_warn(config: OpticalConfig) -> None:
    """Warn (not fail) when the sampled band extends past the propagating cutoff."""
    report = validate_sampling(config)
    if not report.ok:
        print(
            f"warning: sampling exceeds the propagating band; "
            f"{report.fraction_evanescent:.1%} of spectrum samples are evanescent and will be "
            f"zeroed during propagation",
            file=sys.stderr,
        )
