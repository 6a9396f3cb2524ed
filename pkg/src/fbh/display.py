"""8-bit PGM slices of an image volume on a fixed dB display range."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .container import save_image
from .errors import IoFailure
from .recon import ImageVolume, magnitude_db


def to_gray(unit: np.ndarray) -> np.ndarray:
    return np.rint(np.clip(unit, 0.0, 1.0) * 255).astype(np.uint8)


def write_pgm(path, gray: np.ndarray) -> None:
    """Binary (P5) PGM; ``gray`` is rows x columns uint8."""
    gray = np.ascontiguousarray(gray, dtype=np.uint8)
    rows, cols = gray.shape
    Path(path).write_bytes(b"P5\n%d %d\n255\n" % (cols, rows) + gray.tobytes())


def read_pgm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    cols, rows, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PGM supported")
    body = parts[4]
    return np.frombuffer(body[: rows * cols], dtype=np.uint8).reshape(rows, cols)


def emit_image(image: ImageVolume, dynamic_range_db: float, out_dir,
               stem: str = "image") -> list[Path]:
    """Write one PGM per x slice (z rows, y columns) plus the raw IMGV container.

    The dB mapping is normalised to the peak of the whole volume.
    """
    unit = magnitude_db(image, dynamic_range_db)
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = []
        for i in range(unit.shape[0]):
            p = out / f"{stem}_x{i:04d}.pgm"
            write_pgm(p, to_gray(unit[i].T))
            paths.append(p)
        raw = out / f"{stem}.fbec"
        save_image(raw, image, {"dyn_range_db": dynamic_range_db})
        paths.append(raw)
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    return paths
