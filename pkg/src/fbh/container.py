"""``FBEC`` binary container: echo volumes, image volumes and PSF banks.

Layout (all little-endian)::

    0   4s   magic "FBEC"
    4   u16  version
    6   4s   record tag: ECHO | IMGV | PSFB
    10  3*u32 dimensions
    22  u16  number of metadata fields n
    24  n * (16s name, f64 value)
    ..  16s  provenance digest (zeros when unused)
    ..  payload: float32 (re, im) pairs, C order over the three dimensions
"""
from __future__ import annotations

import hashlib
import io
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (BadMagic, DimensionOverflow, TruncatedPayload, UnknownRecordTag,
                     VersionUnsupported)

MAGIC = b"FBEC"
VERSION = 1
TAGS = ("ECHO", "IMGV", "PSFB")
NAME_LEN = 16
DIGEST_LEN = 16
MAX_PAYLOAD_BYTES = 1 << 40
_HEAD = struct.Struct("<4sH4s3IH")
_FIELD = struct.Struct(f"<{NAME_LEN}sd")


@dataclass
class Container:
    tag: str
    data: np.ndarray  # complex64, 3-D
    fields: dict = field(default_factory=dict)
    provenance: bytes = bytes(DIGEST_LEN)
    version: int = VERSION


def header_size(n_fields: int) -> int:
    return _HEAD.size + n_fields * _FIELD.size + DIGEST_LEN


def encode(c: Container) -> bytes:
    if c.tag not in TAGS:
        raise UnknownRecordTag(f"unknown record tag {c.tag!r}")
    data = np.asarray(c.data)
    if data.ndim != 3:
        raise ValueError("container payload must be 3-D")
    if any(d >= 1 << 32 for d in data.shape):
        raise DimensionOverflow(f"dimension exceeds u32: {data.shape}")
    if 8 * math.prod(data.shape) > MAX_PAYLOAD_BYTES:
        raise DimensionOverflow(f"payload too large: {data.shape}")
    if len(c.provenance) != DIGEST_LEN:
        raise ValueError("provenance must be 16 bytes")
    out = io.BytesIO()
    out.write(_HEAD.pack(MAGIC, c.version, c.tag.encode("ascii"), *data.shape, len(c.fields)))
    for name, value in c.fields.items():
        raw = name.encode("ascii")
        if len(raw) > NAME_LEN:
            raise ValueError(f"field name too long: {name!r}")
        out.write(_FIELD.pack(raw, float(value)))
    out.write(c.provenance)
    out.write(np.ascontiguousarray(data, dtype="<c8").tobytes())
    return out.getvalue()


def decode(buf: bytes) -> Container:
    if len(buf) < _HEAD.size:
        raise TruncatedPayload("file shorter than the fixed header")
    magic, version, tag, nx, ny, nz, nfield = _HEAD.unpack_from(buf, 0)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionUnsupported(f"container version {version} (supported: {VERSION})")
    tag = tag.decode("ascii", errors="replace")
    if tag not in TAGS:
        raise UnknownRecordTag(f"unknown record tag {tag!r}")
    n_payload = 8 * nx * ny * nz
    if n_payload > MAX_PAYLOAD_BYTES:
        raise DimensionOverflow(f"dimensions {nx}x{ny}x{nz} imply an oversized payload")
    off = _HEAD.size
    if len(buf) < header_size(nfield):
        raise TruncatedPayload("metadata block truncated")
    fields = {}
    for _ in range(nfield):
        raw, value = _FIELD.unpack_from(buf, off)
        fields[raw.rstrip(b"\0").decode("ascii")] = value
        off += _FIELD.size
    prov = bytes(buf[off:off + DIGEST_LEN])
    off += DIGEST_LEN
    if len(buf) - off != n_payload:
        raise TruncatedPayload(f"payload is {len(buf) - off} bytes, expected {n_payload}")
    data = np.frombuffer(buf, dtype="<c8", count=nx * ny * nz, offset=off).reshape(nx, ny, nz)
    return Container(tag, data.astype(np.complex64), fields, prov, version)


def write_container(path, c: Container) -> bytes:
    """Write ``c`` to ``path``; returns the encoded bytes."""
    raw = encode(c)
    Path(path).write_bytes(raw)
    return raw


def read_container(path) -> Container:
    return decode(Path(path).read_bytes())


def digest(raw: bytes) -> bytes:
    return hashlib.blake2b(raw, digest_size=DIGEST_LEN).digest()


# ---- domain adapters -------------------------------------------------------

_NAN = float("nan")


def echo_to_container(echo) -> Container:
    g, s, b = echo.geometry, echo.sweep, echo.beam
    if echo.noise_seed is not None and int(float(echo.noise_seed)) != echo.noise_seed:
        # the seed travels as an f64 field
        raise ValueError(f"noise seed {echo.noise_seed} is not exactly representable (> 2**53)")
    fields = {
        "x_step": g.x_step, "y_pitch": g.y_pitch, "f_start": s.f_start, "f_stop": s.f_stop,
        "f_step": s.f_step, "tx_rx_offset": g.tx_rx_offset,
        "z0": _NAN if echo.z0_hint is None else echo.z0_hint,
        "noise_seed": _NAN if echo.noise_seed is None else float(echo.noise_seed),
        "x_start": float(g.x_positions[0]), "y_start": float(g.element_y[0]),
        "beam_waist": b.waist_radius, "beam_lambda": b.wavelength, "beam_focus": b.waist_position,
    }
    return Container("ECHO", echo.data.astype(np.complex64), fields)


def container_to_echo(c: Container):
    from .forward import ArrayGeometry, EchoVolume, FrequencySweep
    from .quasioptics import BeamParams

    if c.tag != "ECHO":
        raise UnknownRecordTag(f"expected ECHO record, got {c.tag}")
    f = c.fields
    nx, ny, _ = c.data.shape
    geo = ArrayGeometry(f["y_start"] + f["y_pitch"] * np.arange(ny),
                        f["x_start"] + f["x_step"] * np.arange(nx), f["x_step"], f["tx_rx_offset"])
    sweep = FrequencySweep(f["f_start"], f["f_stop"], f["f_step"])
    beam = BeamParams(f["beam_waist"], f["beam_lambda"], f["beam_focus"])
    seed = None if math.isnan(f["noise_seed"]) else int(f["noise_seed"])
    z0 = None if math.isnan(f["z0"]) else f["z0"]
    return EchoVolume(c.data.astype(complex), geo, sweep, beam, seed, z0)


def image_to_container(image, extra: dict | None = None) -> Container:
    g = image.grid
    x = np.asarray(image.x_positions, float)
    fields = {
        "x_start": float(x[0]), "x_step": image.x_step if x.size > 1 else 1.0,
        "y_start": float(g.y[0]), "y_step": float(g.y[1] - g.y[0]) if g.y.size > 1 else 1.0,
        "z_start": float(g.z[0]), "z_step": float(g.dz) if g.z.size > 1 else 1.0, "z0": g.z0,
    }
    fields.update(extra or {})
    prov = bytes.fromhex(image.provenance) if image.provenance else bytes(DIGEST_LEN)
    return Container("IMGV", image.data.astype(np.complex64), fields, prov)


def container_to_image(c: Container):
    from .recon import ImageVolume, ReconGrid

    if c.tag != "IMGV":
        raise UnknownRecordTag(f"expected IMGV record, got {c.tag}")
    f = c.fields
    nx, ny, nz = c.data.shape
    grid = ReconGrid(f["y_start"] + f["y_step"] * np.arange(ny),
                     f["z_start"] + f["z_step"] * np.arange(nz), f["z0"])
    x = f["x_start"] + f["x_step"] * np.arange(nx)
    prov = c.provenance.hex() if any(c.provenance) else ""
    return ImageVolume(c.data.astype(complex), grid, x, prov)


def bank_to_container(bank) -> Container:
    fields = {"x_pitch": bank.x_pitch}
    for i, z in enumerate(bank.depths):
        fields[f"depth_{i:04d}"] = float(z)
    prov = bytes.fromhex(bank.geometry_hash) if bank.geometry_hash else bytes(DIGEST_LEN)
    return Container("PSFB", bank.profiles[:, :, None].astype(np.complex64), fields, prov)


def container_to_bank(c: Container):
    from .deconv import PSFBank

    if c.tag != "PSFB":
        raise UnknownRecordTag(f"expected PSFB record, got {c.tag}")
    n = c.data.shape[0]
    depths = [c.fields[f"depth_{i:04d}"] for i in range(n)]
    h = c.provenance.hex() if any(c.provenance) else ""
    return PSFBank(np.array(depths), c.data[:, :, 0].astype(complex), c.fields["x_pitch"], h)


def save_echo(path, echo) -> bytes:
    return write_container(path, echo_to_container(echo))


def load_echo(path):
    return container_to_echo(read_container(path))


def save_image(path, image, extra: dict | None = None) -> bytes:
    return write_container(path, image_to_container(image, extra))


def load_image(path):
    return container_to_image(read_container(path))


def save_bank(path, bank) -> bytes:
    return write_container(path, bank_to_container(bank))


def load_bank(path):
    return container_to_bank(read_container(path))
