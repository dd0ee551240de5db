"""Method runner and benchmark suites producing Table-style comparisons.

A suite simulates one shared seeded measurement per case and runs every
requested method on it, reporting phase-channel SSIM/PSNR, iteration
counts, wall time, and the number of deep-denoiser invocations.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .config import DEEP_METHODS, ConfigError, build_schedule, noise_model, optical_config, validate_method
from .fileio import read_gray
from .metrics import phase_image, psnr, ssim
from .optics import OpticalConfig, build_otf
from .simulate import make_phantom, simulate_diffraction, synthetic_cell
from .solvers import (
    ConvergenceTrace,
    IterationRecord,
    ReconstructionResult,
    backpropagate_once,
    gerchberg_saxton,
    measured_amplitude,
    reconstruct,
    residual,
)
from .zsnd import DenoiserClient


def load_phantom_gray(source: str, config: OpticalConfig) -> np.ndarray:
    """Load a phantom source: an image path or the builtin cell generator.

    ``builtin:cell`` (optionally ``builtin:cell:<seed>``) generates the
    deterministic synthetic cell at the config's grid size.
    """
    if source.startswith("builtin:"):
        parts = source.split(":")
        if parts[1] != "cell":
            raise ConfigError(f"unknown builtin phantom {source!r}")
        seed = int(parts[2]) if len(parts) > 2 else 0
        return synthetic_cell(config.width, config.height, seed=seed)
    gray = read_gray(source)
    if gray.shape != (config.height, config.width):
        raise ConfigError(
            f"phantom {source} is {gray.shape[1]}x{gray.shape[0]} px but optics expects "
            f"{config.width}x{config.height}"
        )
    return gray


def run_method(
    method: str,
    intensity: np.ndarray,
    config: OpticalConfig,
    params: dict,
    denoiser: str | None = None,
    ground_truth_phase: np.ndarray | None = None,
) -> ReconstructionResult:
    """Run one reconstruction method on a measurement.

    ``params`` carries the schedule/tv/deep sections of the run config;
    ``denoiser`` is an endpoint descriptor, required for deep methods.
    """
    validate_method(method)
    if method == "backprop":
        t0 = time.perf_counter()
        field_out = backpropagate_once(intensity, config)
        elapsed = time.perf_counter() - t0
        otf = build_otf(config)
        m = measured_amplitude(intensity)
        record = IterationRecord(
            iteration=0, residual=residual(field_out, otf, m), seconds=elapsed, phase_index=0
        )
        if ground_truth_phase is not None:
            img = phase_image(field_out)
            record.ssim = ssim(img, ground_truth_phase, 255.0)
            record.psnr = psnr(img, ground_truth_phase, 255.0)
        return ReconstructionResult(
            field=field_out, trace=ConvergenceTrace([record]), config=config
        )
    if method == "gs":
        sched = params.get("schedule", {})
        iters = int(sched.get("max_outer_iter", 200)) if isinstance(sched, dict) else 200
        return gerchberg_saxton(intensity, config, iters=iters)

    schedule = build_schedule(method, params)
    if method in DEEP_METHODS:
        if not denoiser:
            raise ConfigError(f"method {method!r} needs a denoiser endpoint (--denoiser or config)")
        with DenoiserClient.from_descriptor(denoiser, timeout=float(params.get("denoiser_timeout", 60.0))) as client:
            return reconstruct(
                intensity, config, schedule, endpoint=client, ground_truth_phase=ground_truth_phase
            )
    return reconstruct(intensity, config, schedule, ground_truth_phase=ground_truth_phase)


@dataclass
class BenchmarkRow:
    case: str
    method: str
    status: str = "ok"
    ssim: float | None = None
    psnr: float | None = None
    iterations: int = 0
    seconds: float = 0.0
    deep_calls: int = 0
    error: str = ""

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class BenchmarkCaseOutput:
    name: str
    rows: list[BenchmarkRow] = field(default_factory=list)
    traces: dict[str, ConvergenceTrace] = field(default_factory=dict)


def _run_case(
    index: int, case: dict, suite: dict, denoiser: str | None, seed_override: int | None
) -> BenchmarkCaseOutput:
    name = str(case.get("name") or f"case{index}")
    out = BenchmarkCaseOutput(name=name)
    config = optical_config(case)
    seed = seed_override if seed_override is not None else int(case.get("seed", 0))
    noise = noise_model(case, f"cases[{name}]", seed)
    gray = load_phantom_gray(str(case.get("phantom", "builtin:cell")), config)
    truth = make_phantom(gray, case.get("mapping", "pure_phase"))
    truth_phase = phase_image(truth)
    intensity = simulate_diffraction(truth, config, noise)

    params = {k: suite[k] for k in ("schedule", "tv", "deep", "hio_beta") if k in suite}
    endpoint = case.get("denoiser", suite.get("denoiser")) if denoiser is None else denoiser

    for method in suite.get("methods", []):
        row = BenchmarkRow(case=name, method=method)
        t0 = time.perf_counter()
        try:
            result = run_method(
                method, intensity, config, params,
                denoiser=endpoint, ground_truth_phase=truth_phase,
            )
        except Exception as exc:  # per-case failures recorded, suite continues
            row.status = "failed"
            row.error = f"{type(exc).__name__}: {exc}"
            row.seconds = time.perf_counter() - t0
            out.rows.append(row)
            continue
        row.seconds = time.perf_counter() - t0
        row.iterations = result.iterations
        row.deep_calls = result.deep_denoise_calls
        img = phase_image(result.field)
        row.ssim = ssim(img, truth_phase, 255.0)
        row.psnr = psnr(img, truth_phase, 255.0)
        out.rows.append(row)
        out.traces[method] = result.trace
    return out


def run_suite(
    suite: dict,
    jobs: int = 1,
    denoiser: str | None = None,
    seed_override: int | None = None,
) -> list[BenchmarkCaseOutput]:
    """Run every requested method on every case; failures do not stop the suite."""
    cases = suite.get("cases")
    if not isinstance(cases, list) or not cases:
        raise ConfigError("benchmark suite needs a non-empty 'cases' list")
    methods = suite.get("methods", [])
    if not isinstance(methods, list):
        raise ConfigError("benchmark suite field 'methods' must be a list")
    for method in methods:
        validate_method(method)

    if jobs <= 1 or len(cases) == 1:
        outputs = [_run_case(i, case, suite, denoiser, seed_override) for i, case in enumerate(cases)]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outputs = list(
                pool.map(
                    lambda item: _run_case(item[0], item[1], suite, denoiser, seed_override),
                    enumerate(cases),
                )
            )
    return outputs


def format_table(rows: list[BenchmarkRow]) -> str:
    """Aligned text table of the benchmark report."""
    header = ["case", "method", "status", "ssim", "psnr", "iters", "seconds", "deep_calls", "error"]
    body = []
    for row in rows:
        body.append(
            [
                row.case,
                row.method,
                row.status,
                "" if row.ssim is None else f"{row.ssim:.4f}",
                "" if row.psnr is None else f"{row.psnr:.2f}",
                str(row.iterations),
                f"{row.seconds:.2f}",
                str(row.deep_calls),
                row.error[:48],
            ]
        )
    widths = [max(len(header[i]), *(len(r[i]) for r in body)) if body else len(header[i]) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for r in body:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)))
    return "\n".join(lines)


def write_report_csv(path, rows: list[BenchmarkRow]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["case", "method", "status", "ssim", "psnr", "iterations", "seconds", "deep_calls", "error"]
        )
        for row in rows:
            writer.writerow(
                [
                    row.case,
                    row.method,
                    row.status,
                    "" if row.ssim is None else repr(float(row.ssim)),
                    "" if row.psnr is None else repr(float(row.psnr)),
                    row.iterations,
                    f"{row.seconds:.3f}",
                    row.deep_calls,
                    row.error,
                ]
            )
