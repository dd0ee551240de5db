"""Iterative reconstruction: physics-fidelity projection, baselines, orchestrator.

The physics-fidelity step propagates the estimate to the sensor plane,
replaces its amplitude with the square root of the measurement, and
backprojects.  The orchestrator alternates that step with a prior chain
and advances through scheduled prior phases when the residual curve goes
stationary.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .optics import OpticalConfig, TransferFunction, build_otf, propagate
from .priors import PriorChain, apply_prior_chain
from .zsnd import DenoiserClient

FROM_START = "from_start"
AFTER_STATIONARY = "after_stationary"

# relative-agreement tolerance defining the object-domain constraint set for HIO
HIO_CONSTRAINT_RTOL = 0.05
_EPS = 1e-12


class ReconstructionError(RuntimeError):
    """Reconstruction aborted; carries the failing outer-iteration index."""

    def __init__(self, iteration: int, message: str):
        super().__init__(f"iteration {iteration}: {message}")
        self.iteration = iteration


@dataclass(frozen=True)
class PriorPhase:
    chain: PriorChain
    activation: str = FROM_START

    def __post_init__(self):
        if self.activation not in (FROM_START, AFTER_STATIONARY):
            raise ValueError(f"unknown activation rule {self.activation!r}")


@dataclass(frozen=True)
class SolveSchedule:
    """Outer-loop budget, stopping rule, and the ordered prior phases.

    Each phase pairs a prior chain with an activation rule; the first phase
    runs from the start and each later phase activates once the residual
    curve of the phase before it is stationary.  ``hio_beta`` switches the
    physics block from error reduction to the hybrid input-output update.
    ``initial_field`` overrides the default zero-phase backprojection
    initializer (used e.g. to resume from an earlier reconstruction).
    """

    max_outer_iter: int = 200
    stop_tol: float = 1e-4
    stop_window: int = 5
    prior_phases: tuple[PriorPhase, ...] = (PriorPhase(PriorChain()),)
    hio_beta: float | None = None
    initial_field: np.ndarray | None = None

    def __post_init__(self):
        if self.max_outer_iter < 1:
            raise ValueError("max_outer_iter must be >= 1")
        if not self.stop_tol > 0:
            raise ValueError("stop_tol must be > 0")
        if self.stop_window < 1:
            raise ValueError("stop_window must be >= 1")
        object.__setattr__(self, "prior_phases", tuple(self.prior_phases))
        if not self.prior_phases:
            raise ValueError("schedule needs at least one prior phase")
        if self.prior_phases[0].activation != FROM_START:
            raise ValueError("the first prior phase must activate from_start")
        for phase in self.prior_phases[1:]:
            if phase.activation != AFTER_STATIONARY:
                raise ValueError("later prior phases must activate after_stationary")
        if self.hio_beta is not None and not 0.0 < self.hio_beta <= 1.0:
            raise ValueError(f"hio_beta must be in (0, 1], got {self.hio_beta}")

    @property
    def needs_endpoint(self) -> bool:
        return any(p.chain.has_deep_stage for p in self.prior_phases)


@dataclass
class IterationRecord:
    iteration: int
    residual: float
    seconds: float
    phase_index: int
    ssim: float | None = None
    psnr: float | None = None


@dataclass
class ConvergenceTrace:
    records: list[IterationRecord] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def residuals(self) -> np.ndarray:
        return np.array([r.residual for r in self.records], dtype=np.float64)

    @property
    def phase_indices(self) -> np.ndarray:
        return np.array([r.phase_index for r in self.records], dtype=np.int64)


@dataclass
class ReconstructionResult:
    """Final complex field plus the per-iteration trace and parameter echoes."""

    field: np.ndarray
    trace: ConvergenceTrace
    config: OpticalConfig
    schedule: SolveSchedule | None = None
    phase_final_fields: list[np.ndarray] = field(default_factory=list)
    deep_denoise_calls: int = 0

    @property
    def iterations(self) -> int:
        return len(self.trace)


def measured_amplitude(intensity: np.ndarray) -> np.ndarray:
    """Element-wise square root of the recorded intensity."""
    intensity = np.asarray(intensity, dtype=np.float64)
    if np.any(intensity < 0) or not np.all(np.isfinite(intensity)):
        raise ValueError("intensity must be finite and nonnegative")
    return np.sqrt(intensity)


def physics_fidelity_step(est: np.ndarray, otf: TransferFunction, m: np.ndarray) -> np.ndarray:
    """One error-reduction projection onto the measured sensor amplitude.

    The estimate is propagated forward, its sensor-plane amplitude is
    replaced by ``m`` (keeping the phase; zero-amplitude pixels take phase
    0), and the result is backprojected to the object plane.
    """
    if est.shape != m.shape:
        raise ValueError(f"estimate shape {est.shape} does not match measurement {m.shape}")
    g = propagate(est, otf, "forward")
    g_constrained = m * np.exp(1j * np.angle(g))
    return propagate(g_constrained, otf, "backward")


def residual(est: np.ndarray, otf: TransferFunction, m: np.ndarray) -> float:
    """RMS mismatch between the propagated estimate's amplitude and ``m``."""
    if est.shape != m.shape:
        raise ValueError(f"estimate shape {est.shape} does not match measurement {m.shape}")
    g = propagate(est, otf, "forward")
    return float(np.sqrt(np.mean((np.abs(g) - m) ** 2)))


def hio_constraint_mask(projected: np.ndarray, er_out: np.ndarray) -> np.ndarray:
    """Pixels where the prior-projected estimate agrees with the ER output."""
    scale = np.maximum(np.abs(er_out), _EPS)
    return np.abs(projected - er_out) / scale < HIO_CONSTRAINT_RTOL


def hio_step(
    est: np.ndarray,
    prev_input: np.ndarray,
    otf: TransferFunction,
    m: np.ndarray,
    beta: float,
    project=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Hybrid input-output update around the error-reduction output.

    Computes the ER output of ``est``; the next input keeps it where the
    object-domain constraint holds (the prior-projected output agrees with
    it to within a relative tolerance) and applies the feedback
    prev_input - beta * er_out elsewhere.  ``project`` maps a field to its
    prior projection; when omitted the constraint holds everywhere and the
    update reduces to error reduction.
    """
    if not 0.0 < beta <= 1.0:
        raise ValueError(f"beta must be in (0, 1], got {beta}")
    if prev_input.shape != est.shape:
        raise ValueError("prev_input dimensions do not match the estimate")
    er_out = physics_fidelity_step(est, otf, m)
    if project is None:
        return er_out, er_out
    mask = hio_constraint_mask(project(er_out), er_out)
    next_input = np.where(mask, er_out, prev_input - beta * er_out)
    return next_input, er_out


def backpropagate_once(intensity: np.ndarray, config: OpticalConfig) -> np.ndarray:
    """Single backprojection of the measured amplitude with zero phase."""
    m = measured_amplitude(intensity)
    otf = build_otf(config)
    return propagate(m.astype(np.complex128), otf, "backward")


def detect_stationary(residuals, tol: float, window: int) -> bool:
    """True when the last ``window`` residuals each changed by < tol relative
    to their predecessor.  Needs at least window + 1 samples."""
    if window < 1:
        raise ValueError("window must be >= 1")
    values = residuals.residuals if isinstance(residuals, ConvergenceTrace) else residuals
    values = np.asarray(values, dtype=np.float64)
    if values.size < window + 1:
        return False
    recent = values[-(window + 1):]
    prev = recent[:-1]
    curr = recent[1:]
    diff = np.abs(curr - prev)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(prev != 0, diff / np.abs(prev), np.where(diff == 0, 0.0, np.inf))
    return bool(np.all(rel < tol))


def _none_metrics(_est):
    return None, None


def _iterate(
    intensity: np.ndarray,
    config: OpticalConfig,
    schedule: SolveSchedule,
    endpoint: DenoiserClient | None,
    metrics_fn,
) -> ReconstructionResult:
    if (config.height, config.width) != intensity.shape:
        raise ValueError(f"measurement shape {intensity.shape} does not match config {config.shape}")
    if schedule.needs_endpoint and endpoint is None:
        raise ValueError("schedule contains a deep prior stage but no denoiser endpoint was given")

    otf = build_otf(config)
    m = measured_amplitude(intensity)
    if schedule.initial_field is not None:
        if schedule.initial_field.shape != config.shape:
            raise ValueError("initial field dimensions do not match config")
        est = schedule.initial_field.astype(np.complex128)
    else:
        est = propagate(m.astype(np.complex128), otf, "backward")

    calls_before = endpoint.denoise_count if endpoint is not None else 0
    trace = ConvergenceTrace()
    phase_final_fields: list[np.ndarray] = []
    phase_idx = 0
    phase_start = 0  # trace index where the current phase began
    hio_input = est

    for k in range(schedule.max_outer_iter):
        chain = schedule.prior_phases[phase_idx].chain
        t0 = time.perf_counter()
        try:
            if schedule.hio_beta is None:
                est = physics_fidelity_step(est, otf, m)
                est = apply_prior_chain(est, chain, endpoint)
            else:
                er_out = physics_fidelity_step(hio_input, otf, m)
                projected = apply_prior_chain(er_out, chain, endpoint)
                mask = hio_constraint_mask(projected, er_out)
                hio_input = np.where(mask, er_out, hio_input - schedule.hio_beta * er_out)
                est = projected
        except Exception as exc:
            raise ReconstructionError(k, str(exc)) from exc
        elapsed = time.perf_counter() - t0

        if not np.all(np.isfinite(est)):
            raise ReconstructionError(k, "estimate contains non-finite values")

        ssim_val, psnr_val = metrics_fn(est)
        trace.records.append(
            IterationRecord(
                iteration=k,
                residual=residual(est, otf, m),
                seconds=elapsed,
                phase_index=phase_idx,
                ssim=ssim_val,
                psnr=psnr_val,
            )
        )

        phase_residuals = trace.residuals[phase_start:]
        if detect_stationary(phase_residuals, schedule.stop_tol, schedule.stop_window):
            phase_final_fields.append(est.copy())
            if phase_idx + 1 < len(schedule.prior_phases):
                phase_idx += 1
                phase_start = len(trace)
                hio_input = est
            else:
                break
    else:
        phase_final_fields.append(est.copy())

    calls = (endpoint.denoise_count - calls_before) if endpoint is not None else 0
    return ReconstructionResult(
        field=est,
        trace=trace,
        config=config,
        schedule=schedule,
        phase_final_fields=phase_final_fields,
        deep_denoise_calls=calls,
    )


def reconstruct(
    intensity: np.ndarray,
    config: OpticalConfig,
    schedule: SolveSchedule,
    endpoint: DenoiserClient | None = None,
    ground_truth_phase: np.ndarray | None = None,
) -> ReconstructionResult:
    """Run the recurrent physics-fidelity / prior loop on one measurement.

    Starts from the zero-phase backprojection of the measurement (unless
    the schedule supplies an initial field), alternates the physics block
    with the active phase's prior chain, and advances phases or terminates
    when the residual curve is stationary.  When ``ground_truth_phase`` (a
    display-scaled [0, 255] phase image) is given, per-iteration SSIM/PSNR
    against it are recorded in the trace.
    """
    if ground_truth_phase is None:
        metrics_fn = _none_metrics
    else:
        from .metrics import phase_image, psnr, ssim

        truth = np.asarray(ground_truth_phase, dtype=np.float64)

        def metrics_fn(est):
            img = phase_image(est)
            return ssim(img, truth, 255.0), psnr(img, truth, 255.0)

    return _iterate(intensity, config, schedule, endpoint, metrics_fn)


def gerchberg_saxton(intensity: np.ndarray, config: OpticalConfig, iters: int) -> ReconstructionResult:
    """Classical alternating projections with a unit object amplitude constraint.

    Suited to pure-phase objects: every outer iteration enforces the
    measured sensor amplitude, then forces the object amplitude to one
    while keeping the recovered phase.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    otf = build_otf(config)
    m = measured_amplitude(intensity)
    est = propagate(m.astype(np.complex128), otf, "backward")
    trace = ConvergenceTrace()
    for k in range(iters):
        t0 = time.perf_counter()
        est = physics_fidelity_step(est, otf, m)
        est = np.exp(1j * np.angle(est))
        elapsed = time.perf_counter() - t0
        if not np.all(np.isfinite(est)):
            raise ReconstructionError(k, "estimate contains non-finite values")
        trace.records.append(
            IterationRecord(
                iteration=k,
                residual=residual(est, otf, m),
                seconds=elapsed,
                phase_index=0,
            )
        )
    return ReconstructionResult(field=est, trace=trace, config=config)
