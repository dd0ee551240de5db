"""Object priors applied between physics-fidelity steps.

A prior chain is an ordered list of stages (total-variation denoising, an
out-of-process deep denoiser, or the identity) applied to the amplitude
and/or phase channel of a complex field.  Deep stages see their channel
rescaled to the 0..255 display range and the result is mapped back
afterwards.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .zsnd import DenoiserClient

SIGMA_MAX = 50.0  # training range of the external denoiser's noise levels


@dataclass(frozen=True)
class ScaleParams:
    """Endpoints of the original value range before 0..255 scaling."""

    in_min: float
    in_max: float

    def __post_init__(self):
        if not self.in_max >= self.in_min:
            raise ValueError("in_max must be >= in_min")

    @property
    def degenerate(self) -> bool:
        return self.in_max == self.in_min


def scale_to_display(img: np.ndarray) -> tuple[np.ndarray, ScaleParams]:
    """Affinely map an image onto [0, 255], remembering the original range.

    A constant image has no usable range; it maps to all zeros and the
    params record the degenerate endpoints so unscale can restore it.
    """
    lo = float(np.min(img))
    hi = float(np.max(img))
    params = ScaleParams(in_min=lo, in_max=hi)
    if params.degenerate:
        return np.zeros_like(img, dtype=np.float64), params
    # clip guards the 1-ulp overshoot of the affine map at the endpoints
    return np.clip((img - lo) * (255.0 / (hi - lo)), 0.0, 255.0), params


def unscale(img: np.ndarray, params: ScaleParams) -> np.ndarray:
    """Inverse of scale_to_display for the recorded range."""
    if params.degenerate:
        return np.full_like(img, params.in_min, dtype=np.float64)
    return img * ((params.in_max - params.in_min) / 255.0) + params.in_min


def _grad(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # forward differences, Neumann boundary (last row/col gradient = 0)
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = u[:, 1:] - u[:, :-1]
    gy[:-1, :] = u[1:, :] - u[:-1, :]
    return gx, gy


def _div(px: np.ndarray, py: np.ndarray) -> np.ndarray:
    # negative adjoint of _grad; column/row sums telescope to zero
    d = np.zeros_like(px)
    d[:, :-1] += px[:, :-1]
    d[:, 1:] -= px[:, :-1]
    d[:-1, :] += py[:-1, :]
    d[1:, :] -= py[:-1, :]
    return d


def tv_denoise(img: np.ndarray, weight: float, max_iter: int = 50, tol: float = 1e-4) -> np.ndarray:
    """Total-variation denoising by the dual projection iteration.

    Solves min_u 0.5*||u - img||^2 + weight*TV(u).  The dual field p is
    updated with the convergent step tau = 0.25 until the largest dual
    update drops below ``tol`` or ``max_iter`` sweeps are spent; the
    denoised image is img - weight*div(p).  weight = 0 is the identity.
    """
    if weight < 0:
        raise ValueError(f"weight must be >= 0, got {weight}")
    if weight == 0.0:
        return img.copy()

    tau = 0.25
    img = np.asarray(img, dtype=np.float64)
    px = np.zeros_like(img)
    py = np.zeros_like(img)
    for _ in range(max_iter):
        gx, gy = _grad(_div(px, py) - img / weight)
        norm = 1.0 + tau * np.hypot(gx, gy)
        px_new = (px + tau * gx) / norm
        py_new = (py + tau * gy) / norm
        delta = max(np.max(np.abs(px_new - px)), np.max(np.abs(py_new - py)))
        px, py = px_new, py_new
        if delta < tol:
            break
    return img - weight * _div(px, py)


def total_variation(img: np.ndarray) -> float:
    """Discrete isotropic TV matching the denoiser's gradient convention."""
    gx, gy = _grad(np.asarray(img, dtype=np.float64))
    return float(np.sum(np.hypot(gx, gy)))


@dataclass(frozen=True)
class TVStage:
    weight: float
    max_iter: int = 50
    tol: float = 1e-4

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError("tv weight must be >= 0")


@dataclass(frozen=True)
class DeepStage:
    sigma: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.sigma <= SIGMA_MAX:
            raise ValueError(f"sigma must be in [0, {SIGMA_MAX}], got {self.sigma}")


@dataclass(frozen=True)
class IdentityStage:
    pass


PriorStage = TVStage | DeepStage | IdentityStage


@dataclass(frozen=True)
class PriorChain:
    """Ordered prior stages applied to the selected channel(s) of a field."""

    stages: tuple[PriorStage, ...] = ()
    target: str = "both"  # amplitude | phase | both

    def __post_init__(self):
        if self.target not in ("amplitude", "phase", "both"):
            raise ValueError(f"target must be amplitude|phase|both, got {self.target!r}")
        object.__setattr__(self, "stages", tuple(self.stages))

    @property
    def has_deep_stage(self) -> bool:
        return any(isinstance(s, DeepStage) for s in self.stages)

    @property
    def empty(self) -> bool:
        return len(self.stages) == 0


def wrap_phase(field: np.ndarray) -> np.ndarray:
    """Phase of a complex field wrapped into [0, 2*pi)."""
    ph = np.angle(field)
    ph = np.where(ph < 0, ph + 2.0 * np.pi, ph)
    # angle() can return exactly -0.0 -> 2*pi after the shift; fold it back
    return np.where(ph >= 2.0 * np.pi, 0.0, ph)


def _run_stage(stage: PriorStage, channel: np.ndarray, endpoint: DenoiserClient | None) -> np.ndarray:
    """Apply one stage to one channel; returns the input object when it is a no-op."""
    if isinstance(stage, IdentityStage):
        return channel
    if isinstance(stage, TVStage):
        if stage.weight == 0.0:
            return channel
        return tv_denoise(channel, stage.weight, max_iter=stage.max_iter, tol=stage.tol)
    if isinstance(stage, DeepStage):
        if endpoint is None:
            raise ValueError("prior chain contains a deep stage but no denoiser endpoint was given")
        scaled, params = scale_to_display(channel)
        out = endpoint.denoise(scaled, stage.sigma)
        if out is scaled:
            # wire round trip returned our payload bit-exactly: keep the
            # full-precision channel instead of pushing it through unscale
            return channel
        return unscale(np.clip(out, 0.0, 255.0), params)
    raise TypeError(f"unknown prior stage {stage!r}")


def apply_prior_chain(
    field: np.ndarray,
    chain: PriorChain,
    endpoint: DenoiserClient | None = None,
) -> np.ndarray:
    """Apply the chain to the amplitude and/or phase of a complex field.

    The field is split into amplitude and phase (wrapped to [0, 2*pi)),
    each targeted channel is run through the stages in order, and the
    channels are recombined.  Channels no stage modified keep their exact
    original values, so an all-no-op chain returns the field unchanged.
    """
    if chain.empty:
        return field

    amp = np.abs(field)
    phase = wrap_phase(field)
    amp_out, phase_out = amp, phase

    for stage in chain.stages:
        if chain.target in ("amplitude", "both"):
            amp_out = _run_stage(stage, amp_out, endpoint)
        if chain.target in ("phase", "both"):
            phase_out = _run_stage(stage, phase_out, endpoint)

    amp_changed = amp_out is not amp
    phase_changed = phase_out is not phase
    if not amp_changed and not phase_changed:
        return field
    if not phase_changed:
        # preserve the exact original phase: rescale the field itself
        unit = np.where(amp > 0, field / np.where(amp > 0, amp, 1.0), 1.0 + 0.0j)
        return amp_out * unit
    if not amp_changed:
        return amp * np.exp(1j * phase_out)
    return amp_out * np.exp(1j * phase_out)
