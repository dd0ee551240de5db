import sys

from zsnd_bridge.conformance import conformance_check

from conftest import drunet_weights_path, requires_drunet_weights, serve_command


class TestConformanceAgainstBackends:
    def test_identity_passes(self):
        report = conformance_check(serve_command("identity"))
        assert report.passed, report.summary()
        assert [c.name for c in report.checks] == [
            "handshake",
            "dimension preservation",
            "constant preservation",
            "determinism",
            "malformed frame handling",
        ]

    def test_boxblur_passes(self):
        report = conformance_check(serve_command("boxblur"))
        assert report.passed, report.summary()

    @requires_drunet_weights
    def test_drunet_passes(self):
        report = conformance_check(
            serve_command("drunet", f"--weights {drunet_weights_path()}")
        )
        assert report.passed, report.summary()


MISBEHAVING = """
import struct, sys, os, numpy as np
stdin = os.fdopen(sys.stdin.fileno(), 'rb', buffering=0)
stdout = os.fdopen(sys.stdout.fileno(), 'wb', buffering=0)
MODE = {mode!r}
rng = np.random.default_rng()
while True:
    header = stdin.read(18)
    if not header or len(header) < 18:
        break
    magic, version, msg_type = header[:4], header[4], header[5]
    width, height = struct.unpack_from('<II', header, 6)
    if magic != b'ZSND':
        msg = b'bad magic'
        stdout.write(b'ZSND' + bytes([1, 1]) + struct.pack('<II', 0, 0) + struct.pack('<I', len(msg)) + msg)
        continue
    if msg_type == 0:
        stdout.write(b'ZSND' + bytes([1, 0]) + struct.pack('<II', 0, 0))
        continue
    payload = stdin.read(4 * width * height)
    if MODE == 'flip':
        out_w, out_h = height, width
        data = np.frombuffer(payload, '<f4').reshape(height, width).T.copy()
    elif MODE == 'random':
        out_w, out_h = width, height
        data = rng.uniform(0, 255, (height, width)).astype('<f4')
    stdout.write(b'ZSND' + bytes([1, 0]) + struct.pack('<II', out_w, out_h) + data.astype('<f4').tobytes())
"""


def misbehaving_command(tmp_path, mode):
    script = tmp_path / f"server_{mode}.py"
    script.write_text(MISBEHAVING.format(mode=mode))
    return f"{sys.executable} {script}"


class TestConformanceCatchesViolations:
    def test_dimension_flipping_server_fails(self, tmp_path):
        report = conformance_check(misbehaving_command(tmp_path, "flip"))
        failed = {c.name for c in report.checks if not c.passed}
        assert "dimension preservation" in failed

    def test_nondeterministic_server_fails(self, tmp_path):
        report = conformance_check(misbehaving_command(tmp_path, "random"))
        failed = {c.name for c in report.checks if not c.passed}
        assert "determinism" in failed
        assert "constant preservation" in failed


class TestConformanceCli:
    def test_cli_check_exit_codes(self, tmp_path):
        from zsnd_bridge.cli import main

        assert main(["check", serve_command("identity")]) == 0
        assert main(["check", misbehaving_command(tmp_path, "flip")]) == 1
