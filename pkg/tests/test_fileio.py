import struct

import numpy as np
import pytest

from phasekit.fileio import (
    FileFormatError,
    read_complex_field,
    read_gray,
    read_intensity,
    read_trace_csv,
    write_complex_field,
    write_gray_u8,
    write_intensity,
    write_trace_csv,
)
from phasekit.solvers import ConvergenceTrace, IterationRecord


class TestComplexFieldFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        field = rng.normal(size=(12, 7)) + 1j * rng.normal(size=(12, 7))
        path = tmp_path / "field.cfld"
        write_complex_field(path, field)
        assert np.array_equal(read_complex_field(path), field)

    def test_header_layout(self, tmp_path):
        field = np.array([[1.0 + 2.0j]])
        path = tmp_path / "one.cfld"
        write_complex_field(path, field)
        blob = path.read_bytes()
        assert blob[:4] == b"CFLD"
        assert blob[4] == 1
        width, height = struct.unpack_from("<II", blob, 5)
        assert (width, height) == (1, 1)
        re, im = struct.unpack_from("<dd", blob, 13)
        assert (re, im) == (1.0, 2.0)
        assert len(blob) == 13 + 16

    def test_wrong_magic_rejected(self, tmp_path):
        path = tmp_path / "bad.cfld"
        path.write_bytes(b"XFLD" + bytes([1]) + struct.pack("<II", 1, 1) + b"\x00" * 16)
        with pytest.raises(FileFormatError):
            read_complex_field(path)

    def test_truncated_payload_rejected(self, tmp_path):
        path = tmp_path / "short.cfld"
        path.write_bytes(b"CFLD" + bytes([1]) + struct.pack("<II", 2, 2) + b"\x00" * 16)
        with pytest.raises(FileFormatError):
            read_complex_field(path)


class TestIntensityFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(1)
        img = rng.uniform(0, 5, (9, 13))
        path = tmp_path / "meas.ifld"
        write_intensity(path, img)
        assert np.array_equal(read_intensity(path), img)

    def test_magic_differs_from_complex(self, tmp_path):
        img = np.zeros((2, 2))
        path = tmp_path / "meas.ifld"
        write_intensity(path, img)
        assert path.read_bytes()[:4] == b"IFLD"
        with pytest.raises(FileFormatError):
            read_complex_field(path)


class TestGrayRaster:
    def test_write_read_round_trip(self, tmp_path):
        img = np.arange(64, dtype=np.float64).reshape(8, 8) * 4.0 % 256
        path = tmp_path / "img.png"
        write_gray_u8(path, img)
        back = read_gray(path)
        assert np.array_equal(back, np.rint(img))

    def test_sixteen_bit_normalized(self, tmp_path):
        from PIL import Image

        data = np.array([[0, 65535], [32768, 1000]], dtype=np.uint16)
        path = tmp_path / "img16.png"
        Image.fromarray(data).save(path)
        back = read_gray(path)
        assert back[0, 0] == 0.0
        assert back[0, 1] == pytest.approx(255.0)
        assert back[1, 0] == pytest.approx(32768 * 255.0 / 65535.0)

    def test_values_clipped_on_write(self, tmp_path):
        path = tmp_path / "clip.png"
        write_gray_u8(path, np.array([[-5.0, 300.0]]))
        back = read_gray(path)
        assert back.tolist() == [[0.0, 255.0]]


class TestTraceCsv:
    def _trace(self):
        return ConvergenceTrace(
            [
                IterationRecord(0, 0.5, 0.01, 0, None, None),
                IterationRecord(1, 0.25, 0.011, 0, 0.8, 21.5),
                IterationRecord(2, 0.125, 0.012, 1, 0.9, float("inf")),
            ]
        )

    def test_header_and_blank_metrics(self, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace_csv(path, self._trace())
        lines = path.read_text().splitlines()
        assert lines[0] == "iter,residual,seconds,phase,ssim,psnr"
        assert lines[1].endswith(",0,,")  # no ground truth -> blank ssim/psnr

    def test_round_trip(self, tmp_path):
        path = tmp_path / "trace.csv"
        write_trace_csv(path, self._trace())
        cols = read_trace_csv(path)
        assert cols["iter"].tolist() == [0, 1, 2]
        assert cols["residual"].tolist() == [0.5, 0.25, 0.125]
        assert cols["phase"].tolist() == [0, 0, 1]
        assert np.isnan(cols["ssim"][0]) and cols["ssim"][2] == 0.9
        assert np.isinf(cols["psnr"][2])
