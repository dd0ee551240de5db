"""Command-line frontend: simulate, reconstruct, evaluate, benchmark, plot.

Every command takes --config (YAML, PHASEKIT_* env vars override any key)
and writes its outputs plus a JSON sidecar with the fully resolved
parameters into --out.  Exit code is 0 only when all requested work
succeeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import (
    format_table,
    load_phantom_gray,
    run_method,
    run_suite,
    write_report_csv,
)
from .config import DEEP_METHODS, ConfigError, load_config, noise_model, optical_config, validate_method
from .fileio import (
    FileFormatError,
    read_complex_field,
    read_gray,
    read_intensity,
    read_trace_csv,
    write_complex_field,
    write_gray_u8,
    write_intensity,
    write_sidecar,
    write_trace_csv,
)
from .metrics import phase_image, psnr, ssim
from .plotting import benchmark_figure, convergence_figure
from .simulate import make_phantom, simulate_diffraction
from .solvers import ReconstructionError
from .validate import validate_sampling_or_warn
from .zsnd import DenoiserTransportError


def _amplitude_raster(amp: np.ndarray) -> tuple[np.ndarray, dict]:
    lo, hi = float(amp.min()), float(amp.max())
    if hi == lo:
        return np.zeros_like(amp), {"amp_min": lo, "amp_max": hi}
    return (amp - lo) * (255.0 / (hi - lo)), {"amp_min": lo, "amp_max": hi}


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    config = optical_config(cfg)
    sim = cfg.get("simulate")
    if not isinstance(sim, dict):
        raise ConfigError("missing config section 'simulate'")
    seed = args.seed if args.seed is not None else int(sim.get("seed", 0))
    noise = noise_model(sim, "simulate", seed)
    validate_sampling_or_warn(config)

    gray = load_phantom_gray(str(sim.get("phantom", "builtin:cell")), config)
    field = make_phantom(gray, sim.get("mapping", "pure_phase"))
    intensity = simulate_diffraction(field, config, noise)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_name = str(sim.get("out", "measurement.ifld"))
    out_path = out_dir / out_name
    truth_path = out_dir / (Path(out_name).stem + "_truth.cfld")
    write_intensity(out_path, intensity)
    write_complex_field(truth_path, field)
    write_sidecar(
        str(out_path) + ".json",
        {
            "tool": {"name": "phasekit", "version": __version__, "command": "simulate"},
            "optics": cfg.get("optics"),
            "simulate": {**sim, "seed": seed},
            "outputs": {"measurement": str(out_path), "truth_field": str(truth_path)},
        },
    )
    print(f"wrote {out_path} and {truth_path}")
    return 0


def cmd_reconstruct(args) -> int:
    cfg = load_config(args.config)
    config = optical_config(cfg)
    rec = cfg.get("reconstruct")
    if not isinstance(rec, dict):
        raise ConfigError("missing config section 'reconstruct'")
    method = validate_method(str(rec.get("method", "er_tv")))
    measurement_path = rec.get("measurement")
    if not measurement_path:
        raise ConfigError("missing config field reconstruct.measurement")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    measurement_path = Path(measurement_path)
    if not measurement_path.is_absolute() and not measurement_path.exists():
        measurement_path = out_dir / measurement_path

    intensity = read_intensity(measurement_path)
    if intensity.shape != config.shape:
        raise ConfigError(
            f"measurement {measurement_path} is {intensity.shape}, optics expects {config.shape}"
        )
    validate_sampling_or_warn(config)

    truth_phase = None
    truth_src = rec.get("truth")
    if truth_src:
        truth_path = Path(truth_src)
        if not truth_path.is_absolute() and not truth_path.exists():
            truth_path = out_dir / truth_path
        truth_phase = phase_image(read_complex_field(truth_path))

    denoiser = args.denoiser or rec.get("denoiser")
    if method in DEEP_METHODS and not denoiser:
        raise ConfigError(
            f"method {method!r} needs a denoiser endpoint: pass --denoiser CMD|HOST:PORT "
            "or set reconstruct.denoiser (e.g. a ZSND bridge server command)"
        )

    try:
        result = run_method(
            method, intensity, config, rec, denoiser=denoiser, ground_truth_phase=truth_phase
        )
    except DenoiserTransportError as exc:
        print(
            f"error: denoiser endpoint unreachable ({exc}); start a ZSND denoiser server "
            f"and point --denoiser at it",
            file=sys.stderr,
        )
        return 1
    except ReconstructionError as exc:
        print(f"error: reconstruction aborted at {exc}", file=sys.stderr)
        return 1

    prefix = str(rec.get("out_prefix", method))
    field_path = out_dir / f"{prefix}.cfld"
    amp_png = out_dir / f"{prefix}_amplitude.png"
    phase_png = out_dir / f"{prefix}_phase.png"
    trace_csv = out_dir / f"{prefix}_trace.csv"
    write_complex_field(field_path, result.field)
    amp_scaled, amp_meta = _amplitude_raster(np.abs(result.field))
    write_gray_u8(amp_png, amp_scaled)
    # fixed display scaling: phase 0..2*pi onto 0..255
    write_gray_u8(phase_png, phase_image(result.field))
    write_trace_csv(trace_csv, result.trace)
    write_sidecar(
        str(field_path) + ".json",
        {
            "tool": {"name": "phasekit", "version": __version__, "command": "reconstruct"},
            "optics": cfg.get("optics"),
            "reconstruct": {**rec, "method": method, "denoiser": denoiser},
            "iterations": result.iterations,
            "deep_denoise_calls": result.deep_denoise_calls,
            "amplitude_raster": amp_meta,
            "phase_raster": {"scaling": "phase 0..2pi -> 0..255"},
            "outputs": {
                "field": str(field_path),
                "amplitude_png": str(amp_png),
                "phase_png": str(phase_png),
                "trace_csv": str(trace_csv),
            },
        },
    )
    print(f"{method}: {result.iterations} iterations, wrote {field_path}")
    return 0


def _load_channelized(path: Path) -> tuple[np.ndarray, np.ndarray | None]:
    """Return (phase image in [0,255], amplitude or None) from CFLD or raster."""
    try:
        field = read_complex_field(path)
        return phase_image(field), np.abs(field)
    except FileFormatError:
        return read_gray(path), None


def cmd_evaluate(args) -> int:
    recon_path = Path(args.recon)
    truth_path = Path(args.truth)
    recon_phase, recon_amp = _load_channelized(recon_path)
    truth_phase, truth_amp = _load_channelized(truth_path)
    if recon_phase.shape != truth_phase.shape:
        print(
            f"error: dimension mismatch {recon_phase.shape} vs {truth_phase.shape}",
            file=sys.stderr,
        )
        return 1

    record = {
        "recon": str(recon_path),
        "truth": str(truth_path),
        "phase": {
            "ssim": ssim(recon_phase, truth_phase, 255.0),
            "psnr": psnr(recon_phase, truth_phase, 255.0),
        },
    }
    if recon_amp is not None and truth_amp is not None:
        # amplitude is compared on its native scale; the range comes from the
        # truth, with its peak as the floor so near-constant amplitudes
        # (e.g. pure-phase objects) keep a meaningful scale
        span = max(float(truth_amp.max() - truth_amp.min()), float(truth_amp.max()), 1e-12)
        record["amplitude"] = {
            "ssim": ssim(recon_amp, truth_amp, span),
            "psnr": psnr(recon_amp, truth_amp, span),
        }

    print(f"phase:     SSIM {record['phase']['ssim']:.4f}  PSNR {record['phase']['psnr']:.2f} dB")
    if "amplitude" in record:
        print(
            f"amplitude: SSIM {record['amplitude']['ssim']:.4f}  "
            f"PSNR {record['amplitude']['psnr']:.2f} dB"
        )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{recon_path.stem}_metrics.json"
    record["psnr_is_db"] = True
    write_sidecar(out_path, _jsonable(record))
    return 0


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, float) and obj == float("inf"):
        return "inf"
    return obj


def cmd_benchmark(args) -> int:
    suite = load_config(args.config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = run_suite(suite, jobs=args.jobs, denoiser=args.denoiser, seed_override=args.seed)

    rows = [row for case in outputs for row in case.rows]
    print(format_table(rows))
    report_csv = out_dir / "report.csv"
    write_report_csv(report_csv, rows)
    benchmark_figure([r.as_dict() for r in rows], out_dir / "report.png")
    for case in outputs:
        traces = {}
        for method, trace in case.traces.items():
            trace_path = out_dir / f"{case.name}_{method}_trace.csv"
            write_trace_csv(trace_path, trace)
            traces[method] = read_trace_csv(trace_path)
        if traces:
            convergence_figure(traces, out_dir / f"{case.name}_convergence.png")
    write_sidecar(
        out_dir / "report.csv.json",
        {
            "tool": {"name": "phasekit", "version": __version__, "command": "benchmark"},
            "suite": suite,
            "jobs": args.jobs,
            "seed_override": args.seed,
        },
    )
    print(f"report written to {report_csv}")
    return 0 if all(row.status == "ok" for row in rows) else 1


def cmd_plot(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    traces = {Path(p).stem: read_trace_csv(p) for p in args.traces}
    if len(args.traces) == 1:
        out_path = out_dir / (Path(args.traces[0]).stem + ".png")
    else:
        out_path = out_dir / "convergence.png"
    convergence_figure(traces, out_path)
    print(f"wrote {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phasekit",
        description="Phase retrieval from single inline-holographic intensity images",
    )
    parser.add_argument("--version", action="version", version=f"phasekit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="YAML run configuration")
        p.add_argument("--out", default=".", help="output directory (default: cwd)")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("simulate", help="simulate a noisy diffraction measurement")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="reconstruct a complex field from a measurement")
    common(p)
    p.add_argument("--denoiser", default=None, help="denoiser endpoint: command line or host:port")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("evaluate", help="SSIM/PSNR of a reconstruction against ground truth")
    p.add_argument("recon", help="reconstruction (CFLD field or grayscale raster)")
    p.add_argument("truth", help="ground truth (CFLD field or grayscale raster)")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="run a method-comparison suite")
    common(p)
    p.add_argument("--jobs", type=int, default=1, help="parallel case workers")
    p.add_argument("--denoiser", default=None, help="denoiser endpoint override")
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("plot", help="render convergence figures from trace CSVs")
    p.add_argument("traces", nargs="+", help="trace CSV files")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileFormatError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
