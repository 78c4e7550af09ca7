"""Binary checkpoints and the diagnostics CSV.

Checkpoint layout, all little-endian::

    8 bytes   magic b"PITCKPT\\0"
    int64[9]  version, dim, n_0, n_1, n_2 (unused axes 0), array count,
              complex values in total, step index, config text bytes
    float64[4] t, viscous dissipation, coupling dissipation, initial energy
    bytes     config text (UTF-8)
    complex   psi, u (dim components), rho; each value a float64 (re, im)
              pair in row-major mode order
    uint32    CRC-32 of everything above

Every file is written to a temporary name in the target directory and then
renamed over the destination.
"""

from __future__ import annotations

import csv
import os
import tempfile
import zlib
from dataclasses import dataclass

import numpy as np

from .config import parse_config, serialize_config
from .diagnostics import DiagnosticsRecord
from .errors import CheckpointError
from .galerkin import SimState
from .spectral import SpectralScalarField, VelocityField

MAGIC = b"PITCKPT\0"
VERSION = 1
_HEADER = np.dtype("<i8")
_COMPLEX = np.dtype("<c16")


def atomic_write(path, data):
    """Write bytes or text to ``path`` via a temporary file and a rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class Checkpoint:
    state: SimState
    config: object
    step: int
    version: int = VERSION


def encode_checkpoint(state, config, step):
    g = state.grid
    if g.shape != config.grid.shape:
        raise CheckpointError(f"state grid {g.shape} does not match config grid {config.grid.shape}")
    text = serialize_config(config).encode("utf-8")
    dims = list(g.shape) + [0] * (3 - g.dim)
    total = g.size * (2 + g.dim)
    header = np.array([VERSION, g.dim, *dims, 2 + g.dim, total, step, len(text)], dtype=_HEADER)
    scalars = np.array(
        [state.t, state.viscous_dissipation, state.coupling_dissipation, state.energy0], dtype="<f8"
    )
    body = b"".join([
        MAGIC,
        header.tobytes(),
        scalars.tobytes(),
        text,
        np.ascontiguousarray(state.psi.coeffs, dtype=_COMPLEX).tobytes(),
        np.ascontiguousarray(state.u.coeffs, dtype=_COMPLEX).tobytes(),
        np.ascontiguousarray(state.rho.coeffs, dtype=_COMPLEX).tobytes(),
    ])
    return body + np.array([zlib.crc32(body)], dtype="<u4").tobytes()


def decode_checkpoint(data):
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic bytes)")
    pos = len(MAGIC)
    if len(data) < pos + 8 * 9:
        raise CheckpointError("truncated checkpoint header")
    header = np.frombuffer(data, dtype=_HEADER, count=9, offset=pos)
    version, dim, n0, n1, n2, count, total, step, text_len = (int(v) for v in header)
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version} (expected {VERSION})")
    shape = tuple([n0, n1, n2][:dim])
    size = int(np.prod(shape))
    if count != 2 + dim or total != size * count:
        raise CheckpointError("inconsistent checkpoint header")
    pos += 8 * 9
    expected = pos + 8 * 4 + text_len + 16 * total + 4
    if len(data) != expected:
        raise CheckpointError(f"truncated or oversized checkpoint: {len(data)} bytes, expected {expected}")
    crc = int(np.frombuffer(data, dtype="<u4", count=1, offset=len(data) - 4)[0])
    if crc != zlib.crc32(data[:-4]):
        raise CheckpointError("checkpoint checksum mismatch")
    t, visc, coup, e0 = np.frombuffer(data, dtype="<f8", count=4, offset=pos)
    pos += 32
    config = parse_config(data[pos:pos + text_len].decode("utf-8"))
    pos += text_len
    arrays = np.frombuffer(data, dtype=_COMPLEX, count=total, offset=pos).astype(complex)
    grid = config.grid
    if grid.shape != shape:
        raise CheckpointError(f"config echo grid {grid.shape} disagrees with header {shape}")
    psi = arrays[:size].reshape(shape)
    u = arrays[size:size * (1 + dim)].reshape((dim, *shape))
    rho = arrays[size * (1 + dim):].reshape(shape)
    state = SimState(
        psi=SpectralScalarField(grid, psi),
        u=VelocityField(grid, u),
        rho=SpectralScalarField(grid, rho, True),
        t=float(t),
        viscous_dissipation=float(visc),
        coupling_dissipation=float(coup),
        energy0=float(e0),
    )
    return Checkpoint(state, config, step, version)


def write_checkpoint(state, config, path, step=0):
    atomic_write(path, encode_checkpoint(state, config, step))


def read_checkpoint(path):
    """Returns a Checkpoint; nothing is returned from a corrupt file."""
    with open(path, "rb") as fh:
        return decode_checkpoint(fh.read())


CSV_HEADER = DiagnosticsRecord.columns()


def format_diagnostics(records):
    lines = [",".join(CSV_HEADER)]
    for rec in records:
        lines.append(",".join(f"{float(v):.17g}" for v in rec.values()))
    return "\n".join(lines) + "\n"


def emit_diagnostics(records, path):
    """Write the CSV atomically; doubles carry 17 significant digits."""
    atomic_write(path, format_diagnostics(records))


def read_diagnostics(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise CheckpointError(f"unexpected diagnostics header in {path}")
        return [DiagnosticsRecord(*(float(v) for v in row)) for row in reader if row]
