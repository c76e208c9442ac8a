"""File formats: binary PGM rasters, raw f64 field dumps, LKRN kernel files,
flat key=value configs, CSV traces and JSON reports.

All binary payloads are little-endian. Writes go through a temp file in the
destination directory followed by an atomic rename.
"""

from __future__ import annotations

import json
import os
import struct
import tempfile
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import FieldFormatError
from .fields import ScalarField
from .lithosim import KernelSet

LKRN_MAGIC = b"LKRN"
LKRN_VERSION = 1
RAW_HEADER = struct.Struct("<IId")  # width u32, height u32, pixel_size f64


def atomic_write_bytes(path: str | Path, payload: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_pgm(field: ScalarField, path: str | Path) -> None:
    """8-bit binary PGM; 0 = background, 255 = feature. The pixel size is
    carried in a header comment so the round trip is lossless."""
    values = np.where(field.data > 0.5, 255, 0).astype(np.uint8)
    header = (
        f"P5\n# pixel_size_nm {field.pixel_size!r}\n"
        f"{field.width} {field.height}\n255\n"
    ).encode("ascii")
    atomic_write_bytes(path, header + values.tobytes())


def read_pgm(path: str | Path) -> ScalarField:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P5"):
        raise FieldFormatError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    tokens: list[bytes] = []
    pixel_size = 1.0
    while len(tokens) < 3:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(raw):
            raise FieldFormatError(f"{path}: truncated PGM header")
        if raw[pos : pos + 1] == b"#":
            end = raw.find(b"\n", pos)
            comment = raw[pos + 1 : end].decode("ascii", "replace").split()
            if len(comment) == 2 and comment[0] == "pixel_size_nm":
                pixel_size = float(comment[1])
            pos = end + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        tokens.append(raw[start:pos])
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise FieldFormatError(f"{path}: expected maxval 255, got {maxval}")
    pos += 1  # single whitespace after maxval
    pixels = raw[pos : pos + width * height]
    if len(pixels) != width * height:
        raise FieldFormatError(f"{path}: truncated PGM payload")
    data = np.frombuffer(pixels, dtype=np.uint8).reshape(height, width)
    return ScalarField((data > 127).astype(np.float64), pixel_size)


def write_raw_field(field: ScalarField, path: str | Path) -> None:
    """16-byte header (width u32, height u32, pixel_size f64) + f64 grid."""
    header = RAW_HEADER.pack(field.width, field.height, field.pixel_size)
    payload = np.ascontiguousarray(field.data, dtype="<f8").tobytes()
    atomic_write_bytes(path, header + payload)


def read_raw_field(path: str | Path) -> ScalarField:
    raw = Path(path).read_bytes()
    if len(raw) < RAW_HEADER.size:
        raise FieldFormatError(f"{path}: truncated field header")
    width, height, pixel_size = RAW_HEADER.unpack_from(raw)
    expected = RAW_HEADER.size + width * height * 8
    if len(raw) != expected:
        raise FieldFormatError(
            f"{path}: expected {expected} bytes for {width}x{height}, got {len(raw)}"
        )
    data = np.frombuffer(raw, dtype="<f8", offset=RAW_HEADER.size).reshape(height, width)
    return ScalarField(data.copy(), pixel_size)


def write_kernels(kernels: KernelSet, path: str | Path) -> None:
    """LKRN: magic, version u32, K u32, size u32, pixel_size f64, defocus f64,
    K weights f64, then per kernel S*S (re, im) f64 pairs row-major."""
    parts = [
        LKRN_MAGIC,
        struct.pack("<III", LKRN_VERSION, kernels.count, kernels.kernel_size),
        struct.pack("<dd", kernels.pixel_size, kernels.defocus),
        np.ascontiguousarray(kernels.weights, dtype="<f8").tobytes(),
    ]
    interleaved = np.empty((kernels.count, kernels.kernel_size, kernels.kernel_size, 2))
    interleaved[..., 0] = kernels.kernels.real
    interleaved[..., 1] = kernels.kernels.imag
    parts.append(np.ascontiguousarray(interleaved, dtype="<f8").tobytes())
    atomic_write_bytes(path, b"".join(parts))


def read_kernels(path: str | Path) -> KernelSet:
    raw = Path(path).read_bytes()
    if len(raw) < 4 or raw[:4] != LKRN_MAGIC:
        raise FieldFormatError(f"{path}: LKRN: bad magic")
    off = 4
    try:
        version, count, size = struct.unpack_from("<III", raw, off)
        off += 12
        pixel_size, defocus = struct.unpack_from("<dd", raw, off)
        off += 16
    except struct.error:
        raise FieldFormatError(f"{path}: LKRN: unexpected end") from None
    if version != LKRN_VERSION:
        raise FieldFormatError(f"{path}: LKRN: unsupported version {version}")
    need = off + count * 8 + count * size * size * 16
    if len(raw) < need:
        raise FieldFormatError(f"{path}: LKRN: unexpected end")
    weights = np.frombuffer(raw, dtype="<f8", count=count, offset=off).copy()
    off += count * 8
    flat = np.frombuffer(raw, dtype="<f8", count=count * size * size * 2, offset=off)
    pairs = flat.reshape(count, size, size, 2)
    kernels = pairs[..., 0] + 1j * pairs[..., 1]
    return KernelSet(defocus=defocus, kernels=kernels, weights=weights, pixel_size=pixel_size)


def parse_config_text(text: str) -> dict[str, str]:
    """Flat `key = value` lines with # comments; dotted keys."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise FieldFormatError(f"config line {lineno}: expected key = value")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if not key:
            raise FieldFormatError(f"config line {lineno}: empty key")
        out[key] = value
    return out


def read_config_file(path: str | Path) -> dict[str, str]:
    return parse_config_text(Path(path).read_text())


def write_loss_trace_csv(trace: Sequence[float], path: str | Path) -> None:
    lines = ["iteration,loss"]
    lines += [f"{i},{v!r}" for i, v in enumerate(trace)]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def write_json_report(report: Mapping, path: str | Path) -> None:
    atomic_write_bytes(path, (json.dumps(report, indent=2, sort_keys=True) + "\n").encode())
