"""Rod-target PSF capture and regularised 1-D deconvolution along x."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import EmptyBank, EpsilonNonPositive, NoPeak
from .forward import (ArrayGeometry, FrequencySweep, RodTarget, Scene, rod_pitch,
                      simulate_echo)
from .quasioptics import BeamParams, beam_radius
from .recon import ImageVolume, make_grid, make_plan, next_pow2, reconstruct_volume


def geometry_hash(geometry: ArrayGeometry, sweep: FrequencySweep, beam: BeamParams) -> str:
    h = hashlib.blake2b(digest_size=16)
    for arr in (geometry.element_y, np.array([geometry.x_step, geometry.tx_rx_offset]),
                np.array([sweep.f_start, sweep.f_stop, sweep.f_step]),
                np.array([beam.waist_radius, beam.wavelength, beam.waist_position])):
        h.update(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return h.hexdigest()


@dataclass
class PSFBank:
    """Peak-normalised x profiles, one per capture depth."""

    depths: np.ndarray
    profiles: np.ndarray  # (n_entries, L) complex, L odd, peak at L // 2
    x_pitch: float
    geometry_hash: str = ""

    def __post_init__(self):
        self.depths = np.asarray(self.depths, float).reshape(-1)
        self.profiles = np.asarray(self.profiles, complex)
        if self.profiles.ndim == 1:
            self.profiles = self.profiles[None, :]
        if self.profiles.shape[0] != self.depths.size:
            raise ValueError("one profile per depth")
        if self.depths.size and self.profiles.shape[1] % 2 == 0:
            raise ValueError("PSF profiles must have odd length")

    def __len__(self):
        return self.depths.size

    def nearest(self, z: float) -> int:
        if not len(self):
            raise EmptyBank("PSF bank is empty")
        return int(np.argmin(np.abs(self.depths - z)))

    @classmethod
    def from_entries(cls, entries, x_pitch: float, geometry_hash: str = "") -> "PSFBank":
        entries = list(entries)
        if not entries:
            return cls(np.zeros(0), np.zeros((0, 1), complex), x_pitch, geometry_hash)
        n = max(p.size for _, p in entries)
        prof = np.zeros((len(entries), n), complex)
        for i, (_, p) in enumerate(entries):
            off = (n - p.size) // 2
            prof[i, off:off + p.size] = p
        return cls(np.array([z for z, _ in entries]), prof, x_pitch, geometry_hash)


def center_profile(profile: np.ndarray) -> np.ndarray:
    """Shift the magnitude peak to the middle sample (zero fill) and scale it to 1."""
    p = np.asarray(profile, complex)
    if p.size % 2 == 0:
        p = np.append(p, 0)
    i = int(np.argmax(np.abs(p)))
    if np.abs(p[i]) == 0:
        raise NoPeak("profile is identically zero")
    shift = p.size // 2 - i
    out = np.zeros_like(p)
    if shift >= 0:
        out[shift:] = p[: p.size - shift]
    else:
        out[:shift] = p[-shift:]
    return out / out[p.size // 2]


def capture_psf(geometry: ArrayGeometry, sweep: FrequencySweep, beam: BeamParams,
                rod_z: float, half_width: float | None = None, workers: int | None = None,
                **plan_kwargs) -> tuple[float, np.ndarray]:
    """Image a rod at ``rod_z`` and return ``(rod_z, x_profile)``.

    The rod spans the array footprint at x = 0.  The capture uses its own
    belt positions centred on the rod, on the geometry's x pitch, covering
    ``half_width`` mm on either side (default three beam radii).
    """
    if not rod_z > 0:
        raise ValueError("rod_z must be positive")
    w = beam_radius(beam, rod_z)
    half_width = 3 * w if half_width is None else half_width
    n_half = max(2, int(math.ceil(half_width / geometry.x_step)))
    x = geometry.x_step * np.arange(-n_half, n_half + 1)
    geo = replace(geometry, x_positions=x)
    y = geometry.element_y
    span = float(y[-1] - y[0])
    y_mid = float(0.5 * (y[-1] + y[0]))
    rod = RodTarget(rod_z, span, rod_pitch(sweep), 1.0, y_mid)
    echo = simulate_echo(Scene(rods=[rod]), geo, sweep, beam, workers=workers)
    plan = make_plan(geo, sweep, **plan_kwargs)
    grid = make_grid(plan, max(rod_z - 100.0, 0.0))
    img = reconstruct_volume(echo, grid, plan, workers=workers)
    center = img.data[n_half]
    ysel = np.abs(grid.y - y_mid) <= max(span / 4, plan.dy)
    zsel = np.abs(grid.z - rod_z) <= plan.dz
    sub = np.abs(center) * ysel[:, None] * zsel[None, :]
    iy, iz = np.unravel_index(np.argmax(sub), sub.shape)
    return float(rod_z), center_profile(img.data[:, iy, iz])


def capture_psf_bank(geometry: ArrayGeometry, sweep: FrequencySweep, beam: BeamParams,
                     depths, workers: int | None = None, **kwargs) -> PSFBank:
    entries = [capture_psf(geometry, sweep, beam, z, workers=workers, **kwargs) for z in depths]
    return PSFBank.from_entries(entries, geometry.x_step, geometry_hash(geometry, sweep, beam))


def wiener_filter(psf: np.ndarray, nfft: int, epsilon: float) -> np.ndarray:
    """Spectral inverse of a centred PSF with a relative Wiener floor.

    ``G = (1 + eps) H* / (|H|^2 + eps max|H|^2)``; the ``1 + eps`` factor
    gives exact inversion at the strongest spectral component, so a delta
    kernel is the identity.
    """
    c = psf.size // 2
    buf = np.zeros(nfft, complex)
    buf[: psf.size - c] = psf[c:]
    buf[nfft - c:] = psf[:c]
    H = np.fft.fft(buf)
    p = np.abs(H) ** 2
    return (1 + epsilon) * np.conj(H) / (p + epsilon * p.max())


def deconvolve_lines(lines: np.ndarray, psf: np.ndarray, epsilon: float) -> np.ndarray:
    """Deconvolve along axis 0 with zero padding (linear, not circular)."""
    n = lines.shape[0]
    nfft = next_pow2(n + psf.size - 1)
    G = wiener_filter(psf, nfft, epsilon)
    shape = (nfft,) + (1,) * (lines.ndim - 1)
    spec = np.fft.fft(lines, n=nfft, axis=0) * G.reshape(shape)
    return np.fft.ifft(spec, axis=0)[:n]


def deconvolve(image: ImageVolume, bank: PSFBank, epsilon: float = 1e-2,
               magnitude_only: bool = False) -> ImageVolume:
    """Correct x blur line by line using the bank entry nearest each voxel depth."""
    if not len(bank):
        raise EmptyBank("PSF bank is empty")
    if not epsilon > 0:
        raise EpsilonNonPositive(f"epsilon must be > 0, got {epsilon}")
    data = np.abs(image.data).astype(complex) if magnitude_only else image.data
    if data.shape[0] < bank.profiles.shape[1]:
        raise ValueError(f"image has {data.shape[0]} x samples, PSF needs {bank.profiles.shape[1]}")
    out = np.empty_like(data, dtype=complex)
    which = np.array([bank.nearest(z) for z in image.grid.z])
    for e in np.unique(which):
        psf = bank.profiles[e]
        if magnitude_only:
            psf = np.abs(psf).astype(complex)
        sel = which == e
        out[:, :, sel] = deconvolve_lines(data[:, :, sel], psf, epsilon)
    return ImageVolume(out, image.grid, np.array(image.x_positions), image.provenance)


def profile_fwhm(profile, pitch: float = 1.0) -> float:
    """Full width at half maximum of ``|profile|``, linearly interpolated."""
    mag = np.abs(np.asarray(profile)).astype(float)
    if mag.size == 0 or not np.all(np.isfinite(mag)):
        raise NoPeak("empty or non-finite profile")
    i = int(np.argmax(mag))
    peak = mag[i]
    if not peak > 0:
        raise NoPeak("profile has no positive peak")
    half = peak / 2
    lo = i
    while lo > 0 and mag[lo - 1] >= half:
        lo -= 1
    hi = i
    while hi < mag.size - 1 and mag[hi + 1] >= half:
        hi += 1
    if lo == 0 or hi == mag.size - 1:
        raise NoPeak("profile does not fall below half maximum on both sides")
    left = lo - (mag[lo] - half) / (mag[lo] - mag[lo - 1])
    right = hi + (mag[hi] - half) / (mag[hi] - mag[hi + 1])
    return float((right - left) * pitch)


def image_x_profile(image: ImageVolume, y=None, z=None) -> np.ndarray:
    """x line through the global magnitude peak (or through given y, z)."""
    mag = np.abs(image.data)
    if y is None or z is None:
        _, iy, iz = np.unravel_index(np.argmax(mag), mag.shape)
    else:
        iy = int(np.argmin(np.abs(image.grid.y - y)))
        iz = int(np.argmin(np.abs(image.grid.z - z)))
    return image.data[:, iy, iz]
