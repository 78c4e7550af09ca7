import struct

import numpy as np
import pytest

from pitaevskii.config import parse_config
from pitaevskii.diagnostics import DiagnosticsRecord, compute_diagnostics
from pitaevskii.errors import CheckpointError
from pitaevskii.initial_data import build_initial_state
from pitaevskii.persistence import (
    CSV_HEADER,
    MAGIC,
    emit_diagnostics,
    encode_checkpoint,
    read_checkpoint,
    read_diagnostics,
    write_checkpoint,
)

CONFIG = """
[grid]
resolution = 16, 16
[initial]
kind = random_smooth
psi_amplitudes = 0.5
velocity_amplitude = 0.3
density = sine_perturbed
seed = 11
[time]
dt = 0.01
t_end = 0.1
"""


@pytest.fixture
def cfg():
    return parse_config(CONFIG)


@pytest.fixture
def state(cfg):
    s = build_initial_state(cfg.initial, cfg.grid, cfg.truncation, cfg.params)
    return s.replace(t=0.37, viscous_dissipation=1.25e-3, coupling_dissipation=np.pi)


class TestCheckpoint:
    def test_round_trip_bit_exact(self, state, cfg, tmp_path):
        path = tmp_path / "c.bin"
        write_checkpoint(state, cfg, path, step=37)
        ck = read_checkpoint(path)
        assert ck.step == 37 and ck.config == cfg
        for a, b in ((ck.state.psi, state.psi), (ck.state.u, state.u), (ck.state.rho, state.rho)):
            assert a.coeffs.tobytes() == b.coeffs.tobytes()
        assert ck.state.t == state.t
        assert ck.state.viscous_dissipation == state.viscous_dissipation
        assert ck.state.coupling_dissipation == state.coupling_dissipation
        assert ck.state.energy0 == state.energy0

    def test_layout(self, state, cfg):
        data = encode_checkpoint(state, cfg, 5)
        assert data[:8] == MAGIC
        version, dim, n0, n1, n2, count, total, step, _ = struct.unpack("<9q", data[8:80])
        assert (version, dim, n0, n1, n2, count, step) == (1, 2, 16, 16, 0, 4, 5)
        assert total == 4 * 256
        # psi follows the config text as (re, im) little-endian doubles in row-major order
        text_len = struct.unpack("<q", data[72:80])[0]
        start = 80 + 32 + text_len
        re, im = struct.unpack("<2d", data[start:start + 16])
        assert complex(re, im) == state.psi.coeffs.flat[0]
        re, im = struct.unpack("<2d", data[start + 16:start + 32])
        assert complex(re, im) == state.psi.coeffs.flat[1]

    def test_bad_magic(self, state, cfg, tmp_path):
        data = bytearray(encode_checkpoint(state, cfg, 0))
        data[0:4] = b"XXXX"
        (tmp_path / "c.bin").write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="magic"):
            read_checkpoint(tmp_path / "c.bin")

    def test_bad_version(self, state, cfg, tmp_path):
        data = bytearray(encode_checkpoint(state, cfg, 0))
        data[8:16] = struct.pack("<q", 99)
        (tmp_path / "c.bin").write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="version"):
            read_checkpoint(tmp_path / "c.bin")

    def test_truncated(self, state, cfg, tmp_path):
        data = encode_checkpoint(state, cfg, 0)
        (tmp_path / "c.bin").write_bytes(data[:-100])
        with pytest.raises(CheckpointError, match="truncated"):
            read_checkpoint(tmp_path / "c.bin")

    def test_corrupt_payload(self, state, cfg, tmp_path):
        data = bytearray(encode_checkpoint(state, cfg, 0))
        data[-20] ^= 0xFF
        (tmp_path / "c.bin").write_bytes(bytes(data))
        with pytest.raises(CheckpointError, match="checksum"):
            read_checkpoint(tmp_path / "c.bin")

    def test_atomic_write_leaves_no_temp_files(self, state, cfg, tmp_path):
        write_checkpoint(state, cfg, tmp_path / "c.bin")
        write_checkpoint(state, cfg, tmp_path / "c.bin")
        assert [p.name for p in tmp_path.iterdir()] == ["c.bin"]


class TestDiagnosticsCsv:
    def test_empty_run_header_only(self, tmp_path):
        emit_diagnostics([], tmp_path / "d.csv")
        assert (tmp_path / "d.csv").read_text() == ",".join(CSV_HEADER) + "\n"

    def test_one_record_two_lines(self, state, cfg, tmp_path):
        rec = compute_diagnostics(state, cfg.params, cfg.truncation)
        emit_diagnostics([rec], tmp_path / "d.csv")
        assert len((tmp_path / "d.csv").read_text().splitlines()) == 2

    def test_reload_exact(self, state, cfg, tmp_path):
        recs = [compute_diagnostics(state.replace(t=t), cfg.params, cfg.truncation) for t in (0.0, 0.1, 1 / 3)]
        emit_diagnostics(recs, tmp_path / "d.csv")
        assert read_diagnostics(tmp_path / "d.csv") == recs

    def test_seventeen_digits(self, tmp_path):
        rec = DiagnosticsRecord(*([1 / 3] * len(CSV_HEADER)))
        emit_diagnostics([rec], tmp_path / "d.csv")
        first = (tmp_path / "d.csv").read_text().splitlines()[1].split(",")[0]
        assert first == "0.33333333333333331"

    def test_header_checked(self, tmp_path):
        (tmp_path / "d.csv").write_text("a,b\n1,2\n")
        with pytest.raises(CheckpointError):
            read_diagnostics(tmp_path / "d.csv")
