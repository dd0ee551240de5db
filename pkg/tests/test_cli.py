import json
import sys
from pathlib import Path

import numpy as np
import pytest

from phasekit import (
    NoiseModel,
    OpticalConfig,
    make_phantom,
    phase_image,
    simulate_diffraction,
    synthetic_cell,
)
from phasekit.cli import main
from phasekit.config import build_schedule
from phasekit.fileio import (
    read_complex_field,
    read_gray,
    read_intensity,
    read_trace_csv,
    write_complex_field,
)
from phasekit.solvers import reconstruct

SERVER = Path(__file__).parent / "fixtures" / "zsnd_ref_server.py"

OPTICS_64 = """
optics:
  wavelength_nm: 670
  distance_z_mm: 1.0
  pixel_pitch_um: 1.12
  width_px: 64
  height_px: 64
"""


def write_yaml(tmp_path, text, name="run.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


def simulate_config(tmp_path, extra=""):
    return write_yaml(
        tmp_path,
        OPTICS_64
        + """
simulate:
  phantom: builtin:cell
  mapping: pure_phase
  noise: {kind: poisson, peak_photons: 1.0e+4}
  seed: 3
  out: measurement.ifld
"""
        + extra,
    )


class TestSimulateCommand:
    def test_writes_measurement_and_sidecar(self, tmp_path):
        cfg = simulate_config(tmp_path)
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        measurement = read_intensity(tmp_path / "measurement.ifld")
        assert measurement.shape == (64, 64)
        sidecar = json.loads((tmp_path / "measurement.ifld.json").read_text())
        assert sidecar["simulate"]["seed"] == 3
        assert sidecar["optics"]["wavelength_nm"] == 670
        assert (tmp_path / "measurement_truth.cfld").exists()

    def test_bit_exact_reproduction(self, tmp_path):
        cfg = simulate_config(tmp_path)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(out_a)]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out_b)]) == 0
        assert (out_a / "measurement.ifld").read_bytes() == (out_b / "measurement.ifld").read_bytes()

    def test_rerun_from_sidecar_reproduces_bits(self, tmp_path):
        cfg = simulate_config(tmp_path)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(out_a)]) == 0
        sidecar = out_a / "measurement.ifld.json"
        assert main(["simulate", "--config", str(sidecar), "--out", str(out_b)]) == 0
        assert (out_a / "measurement.ifld").read_bytes() == (out_b / "measurement.ifld").read_bytes()
        assert (out_a / "measurement_truth.cfld").read_bytes() == (
            out_b / "measurement_truth.cfld"
        ).read_bytes()

    def test_seed_flag_overrides_config(self, tmp_path):
        cfg = simulate_config(tmp_path)
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert main(["simulate", "--config", str(cfg), "--out", str(out_a), "--seed", "9"]) == 0
        assert main(["simulate", "--config", str(cfg), "--out", str(out_b)]) == 0
        a = read_intensity(out_a / "measurement.ifld")
        b = read_intensity(out_b / "measurement.ifld")
        assert not np.array_equal(a, b)

    def test_sampling_warning_surfaced(self, tmp_path, capsys):
        cfg = write_yaml(
            tmp_path,
            """
optics: {wavelength_nm: 670, distance_z_mm: 1.0, pixel_pitch_um: 0.2, width_px: 64, height_px: 64}
simulate: {phantom: builtin:cell, seed: 0}
""",
        )
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert "evanescent" in capsys.readouterr().err

    def test_missing_field_is_named(self, tmp_path, capsys):
        cfg = write_yaml(tmp_path, "optics: {wavelength_nm: 670}\nsimulate: {}\n")
        assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 1
        assert "optics.distance_z_mm" in capsys.readouterr().err


def _simulated_measurement(tmp_path):
    cfg = simulate_config(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    return tmp_path / "measurement.ifld"


def reconstruct_config(tmp_path, method, extra=""):
    return write_yaml(
        tmp_path,
        OPTICS_64
        + f"""
reconstruct:
  method: {method}
  measurement: measurement.ifld
  out_prefix: {method}
  schedule: {{max_outer_iter: 12, stop_tol: 1.0e-4, stop_window: 3}}
  tv: {{weight: 0.1}}
{extra}
""",
        name=f"recon_{method}.yaml",
    )


class TestReconstructCommand:
    def test_backprop_single_step(self, tmp_path):
        _simulated_measurement(tmp_path)
        cfg = reconstruct_config(tmp_path, "backprop")
        assert main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        cols = read_trace_csv(tmp_path / "backprop_trace.csv")
        assert len(cols["iter"]) == 1
        for name in ("backprop.cfld", "backprop_amplitude.png", "backprop_phase.png", "backprop.cfld.json"):
            assert (tmp_path / name).exists()

    def test_er_tv_matches_library_reconstruct(self, tmp_path):
        measurement = _simulated_measurement(tmp_path)
        cfg = reconstruct_config(tmp_path, "er_tv")
        assert main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        cli_field = read_complex_field(tmp_path / "er_tv.cfld")

        intensity = read_intensity(measurement)
        config = OpticalConfig(
            wavelength=670e-9, distance_z=1e-3, pixel_pitch=1.12e-6, width=64, height=64
        )
        schedule = build_schedule(
            "er_tv",
            {"schedule": {"max_outer_iter": 12, "stop_tol": 1e-4, "stop_window": 3}, "tv": {"weight": 0.1}},
        )
        expected = reconstruct(intensity, config, schedule)
        assert np.array_equal(cli_field, expected.field)

    def test_phase_raster_uses_fixed_scaling(self, tmp_path):
        _simulated_measurement(tmp_path)
        cfg = reconstruct_config(tmp_path, "backprop")
        assert main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        field = read_complex_field(tmp_path / "backprop.cfld")
        png = read_gray(tmp_path / "backprop_phase.png")
        assert np.array_equal(png, np.rint(phase_image(field)))

    def test_deep_method_requires_denoiser(self, tmp_path, capsys):
        _simulated_measurement(tmp_path)
        cfg = reconstruct_config(tmp_path, "phy_zsn")
        assert main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path)]) == 1
        assert "denoiser" in capsys.readouterr().err

    def test_unreachable_denoiser_gives_remediation(self, tmp_path, capsys):
        _simulated_measurement(tmp_path)
        cfg = reconstruct_config(tmp_path, "phy_zsn")
        code = main(
            [
                "reconstruct", "--config", str(cfg), "--out", str(tmp_path),
                "--denoiser", "127.0.0.1:1",
            ]
        )
        assert code == 1
        assert "unreachable" in capsys.readouterr().err

    def test_phytv_zsn_advances_phase_exactly_once(self, tmp_path):
        _simulated_measurement(tmp_path)
        cfg = write_yaml(
            tmp_path,
            OPTICS_64
            + """
reconstruct:
  method: phytv_zsn
  measurement: measurement.ifld
  out_prefix: phytv
  schedule: {max_outer_iter: 120, stop_tol: 1.0e-3, stop_window: 3}
  tv: {weight: 0.1}
  deep: {sigma: 10}
""",
            name="phytv.yaml",
        )
        denoiser = f"{sys.executable} {SERVER} --mode boxblur"
        code = main(
            ["reconstruct", "--config", str(cfg), "--out", str(tmp_path), "--denoiser", denoiser]
        )
        assert code == 0
        cols = read_trace_csv(tmp_path / "phytv_trace.csv")
        jumps = np.diff(cols["phase"])
        assert np.all(jumps >= 0)
        assert int(jumps.sum()) == 1
        sidecar = json.loads((tmp_path / "phytv.cfld.json").read_text())
        assert sidecar["deep_denoise_calls"] > 0


class TestEvaluateCommand:
    def test_identical_fields_give_perfect_metrics(self, tmp_path, capsys):
        field = make_phantom(synthetic_cell(64, 64, seed=0))
        path = tmp_path / "x.cfld"
        write_complex_field(path, field)
        assert main(["evaluate", str(path), str(path), "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "SSIM 1.0000" in out
        assert "inf" in out
        record = json.loads((tmp_path / "x_metrics.json").read_text())
        assert record["phase"]["ssim"] == pytest.approx(1.0)
        assert record["phase"]["psnr"] == "inf"

    def test_pure_phase_truth_keeps_amplitude_scale(self, tmp_path):
        # the unit-amplitude truth must not collapse the amplitude dynamic range
        truth = make_phantom(synthetic_cell(64, 64, seed=0))
        rng = np.random.default_rng(2)
        recon = truth * (1.0 + 0.05 * rng.normal(size=truth.shape))
        ta, tb = tmp_path / "t.cfld", tmp_path / "r.cfld"
        write_complex_field(ta, truth)
        write_complex_field(tb, recon)
        assert main(["evaluate", str(tb), str(ta), "--out", str(tmp_path)]) == 0
        record = json.loads((tmp_path / "r_metrics.json").read_text())
        assert record["amplitude"]["psnr"] > 15.0
        assert record["amplitude"]["ssim"] > 0.1

    def test_dimension_mismatch_fails(self, tmp_path, capsys):
        a = tmp_path / "a.cfld"
        b = tmp_path / "b.cfld"
        write_complex_field(a, np.ones((32, 32), complex))
        write_complex_field(b, np.ones((16, 16), complex))
        assert main(["evaluate", str(a), str(b), "--out", str(tmp_path)]) == 1
        assert "mismatch" in capsys.readouterr().err

    def test_invariant_under_raster_reencoding(self, tmp_path):
        from phasekit.fileio import write_gray_u8

        config = OpticalConfig(670e-9, 1e-3, 1.12e-6, 64, 64)
        truth = make_phantom(synthetic_cell(64, 64, seed=0))
        noisy = simulate_diffraction(truth, config, NoiseModel("poisson", 1e4, seed=1))
        from phasekit.solvers import backpropagate_once

        recon = backpropagate_once(noisy, config)
        ra, rb = tmp_path / "recon.png", tmp_path / "truth.png"
        write_gray_u8(ra, phase_image(recon))
        write_gray_u8(rb, phase_image(truth))
        assert main(["evaluate", str(ra), str(rb), "--out", str(tmp_path / "m1")]) == 0
        # re-encode the same pixel values into new files
        ra2, rb2 = tmp_path / "recon2.png", tmp_path / "truth2.png"
        write_gray_u8(ra2, read_gray(ra))
        write_gray_u8(rb2, read_gray(rb))
        assert main(["evaluate", str(ra2), str(rb2), "--out", str(tmp_path / "m2")]) == 0
        m1 = json.loads((tmp_path / "m1" / "recon_metrics.json").read_text())
        m2 = json.loads((tmp_path / "m2" / "recon2_metrics.json").read_text())
        assert m1["phase"] == m2["phase"]


class TestBenchmarkCommand:
    def _suite(self, tmp_path, methods, extra=""):
        return write_yaml(
            tmp_path,
            f"""
cases:
  - name: desk
    optics: {{wavelength_nm: 670, distance_z_mm: 1.0, pixel_pitch_um: 1.12, width_px: 64, height_px: 64}}
    phantom: builtin:cell
    mapping: pure_phase
    noise: {{kind: poisson, peak_photons: 1.0e+4}}
    seed: 5
methods: [{", ".join(methods)}]
schedule: {{max_outer_iter: 10, stop_tol: 1.0e-4, stop_window: 3}}
tv: {{weight: 0.1}}
{extra}
""",
            name="suite.yaml",
        )

    def test_empty_method_list_is_success(self, tmp_path):
        suite = self._suite(tmp_path, [])
        assert main(["benchmark", "--config", str(suite), "--out", str(tmp_path)]) == 0
        report = (tmp_path / "report.csv").read_text().splitlines()
        assert len(report) == 1  # header only

    def test_report_rows_and_outputs(self, tmp_path):
        suite = self._suite(tmp_path, ["backprop", "er_tv"])
        assert main(["benchmark", "--config", str(suite), "--out", str(tmp_path)]) == 0
        lines = (tmp_path / "report.csv").read_text().splitlines()
        assert len(lines) == 3
        assert (tmp_path / "desk_er_tv_trace.csv").exists()
        assert (tmp_path / "desk_convergence.png").exists()
        assert (tmp_path / "report.png").exists()
        assert (tmp_path / "report.csv.json").exists()

    def test_failed_case_recorded_and_suite_continues(self, tmp_path):
        # phy_zsn without a denoiser fails; backprop still runs
        suite = self._suite(tmp_path, ["phy_zsn", "backprop"])
        code = main(["benchmark", "--config", str(suite), "--out", str(tmp_path)])
        assert code == 1
        lines = (tmp_path / "report.csv").read_text().splitlines()
        assert len(lines) == 3
        assert any("failed" in line and "phy_zsn" in line for line in lines)
        assert any("backprop" in line and ",ok," in line for line in lines)

    def test_benchmark_jobs_parallel(self, tmp_path):
        suite = write_yaml(
            tmp_path,
            """
cases:
  - name: a
    optics: {wavelength_nm: 670, distance_z_mm: 1.0, pixel_pitch_um: 1.12, width_px: 64, height_px: 64}
    phantom: builtin:cell
    seed: 1
  - name: b
    optics: {wavelength_nm: 670, distance_z_mm: 1.0, pixel_pitch_um: 1.12, width_px: 64, height_px: 64}
    phantom: builtin:cell
    seed: 2
methods: [backprop]
""",
            name="suite2.yaml",
        )
        assert main(["benchmark", "--config", str(suite), "--out", str(tmp_path), "--jobs", "2"]) == 0
        lines = (tmp_path / "report.csv").read_text().splitlines()
        assert len(lines) == 3
        assert lines[1].startswith("a,") and lines[2].startswith("b,")


class TestPlotCommand:
    def test_renders_figure_from_trace(self, tmp_path):
        _simulated_measurement(tmp_path)
        cfg = reconstruct_config(tmp_path, "er")
        assert main(["reconstruct", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        trace = tmp_path / "er_trace.csv"
        assert main(["plot", str(trace), "--out", str(tmp_path)]) == 0
        assert (tmp_path / "er_trace.png").exists()
