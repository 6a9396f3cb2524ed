"""Gaussian-beam propagation and hyperbolic cylindrical lens design.

All lengths are in millimetres.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NegativeDiscriminant

# Full width at half power of a Gaussian field exp(-x^2/w^2), in units of w.
HPBW_FACTOR = 2.0 * math.sqrt(math.log(2.0) / 2.0)


@dataclass(frozen=True)
class BeamParams:
    """Gaussian beam: waist radius, wavelength and the axial position of the waist."""

    waist_radius: float
    wavelength: float
    waist_position: float = 0.0

    def __post_init__(self):
        if not self.waist_radius > 0:
            raise ValueError(f"waist_radius must be > 0, got {self.waist_radius}")
        if not self.wavelength > 0:
            raise ValueError(f"wavelength must be > 0, got {self.wavelength}")

    @property
    def rayleigh_length(self) -> float:
        return rayleigh_length(self.waist_radius, self.wavelength)


def rayleigh_length(w0: float, wavelength: float) -> float:
    if w0 <= 0 or wavelength <= 0:
        raise ValueError("w0 and wavelength must be positive")
    return math.pi * w0 * w0 / wavelength


def beam_radius(beam: BeamParams, z):
    """Beam radius at axial position ``z`` (scalar or array).

    ``z`` is measured on the same axis as ``beam.waist_position``.
    """
    dz = np.asarray(z, dtype=float) - beam.waist_position
    w0 = beam.waist_radius
    w = w0 * np.sqrt(1.0 + (beam.wavelength * dz / (math.pi * w0 * w0)) ** 2)
    return float(w) if w.ndim == 0 else w


def hpbw(w: float) -> float:
    """Half-power full beamwidth of a Gaussian beam of radius ``w``."""
    if w <= 0:
        raise ValueError("beam radius must be positive")
    return HPBW_FACTOR * w


@dataclass(frozen=True)
class LensSpec:
    object_distance: float
    object_waist: float
    image_waist: float
    wavelength: float
    refractive_index: float = 1.45
    aperture_factor: float = 2.5
    lens_length: float = 1600.0

    def __post_init__(self):
        if not self.object_distance > 0:
            raise ValueError("object_distance must be > 0")
        if not self.object_waist > 0:
            raise ValueError("object_waist must be > 0")
        if not self.image_waist >= self.object_waist:
            raise ValueError("image_waist must be >= object_waist")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be > 0")
        if not self.refractive_index > 1:
            raise ValueError("refractive_index must be > 1")
        if not self.aperture_factor > 0:
            raise ValueError("aperture_factor must be > 0")

    @property
    def rayleigh_length(self) -> float:
        return rayleigh_length(self.object_waist, self.wavelength)


@dataclass(frozen=True)
class LensDesign:
    spec: LensSpec
    focal_length: float
    image_distance: float
    thickness: float
    aperture: float
    object_profile: np.ndarray = field(repr=False)
    image_profile: np.ndarray = field(repr=False)
    predicted_focal_plane: float
    interception_efficiency: float
    beam_radius_at_lens: float

    def summary(self) -> dict:
        """Scalar fields as a plain dict (profiles excluded)."""
        return {
            "object_distance_mm": self.spec.object_distance,
            "object_waist_mm": self.spec.object_waist,
            "image_waist_mm": self.spec.image_waist,
            "wavelength_mm": self.spec.wavelength,
            "refractive_index": self.spec.refractive_index,
            "aperture_factor": self.spec.aperture_factor,
            "lens_length_mm": self.spec.lens_length,
            "focal_length_mm": self.focal_length,
            "image_distance_mm": self.image_distance,
            "thickness_mm": self.thickness,
            "aperture_mm": self.aperture,
            "predicted_focal_plane_mm": self.predicted_focal_plane,
            "interception_efficiency": self.interception_efficiency,
            "beam_radius_at_lens_mm": self.beam_radius_at_lens,
        }


def effective_focal_length(spec: LensSpec) -> float:
    s1 = spec.object_distance
    zr = spec.rayleigh_length
    ratio = (spec.object_waist / spec.image_waist) ** 2
    disc = 4 * s1 * s1 - 4 * (s1 * s1 + zr * zr) * (1 - ratio)
    if disc < 0:
        raise NegativeDiscriminant(
            f"magnification {spec.image_waist / spec.object_waist:.4g} is not "
            f"reachable at s1={s1} mm (discriminant {disc:.4g})"
        )
    return 2 * (s1 * s1 + zr * zr) / (2 * s1 + math.sqrt(disc))


def image_distance(f: float, s1: float, zr: float) -> float:
    """Gaussian-beam thin-lens image distance."""
    if f <= 0 or s1 <= 0:
        raise ValueError("f and s1 must be positive")
    d = s1 - f
    return f + f * f * d / (d * d + zr * zr)


def waist_magnification(f: float, s1: float, zr: float) -> float:
    """Ratio of output to input waist for a thin lens of focal length ``f``."""
    return f / math.sqrt((s1 - f) ** 2 + zr * zr)


def lens_thickness(n: float, s1: float, s2: float, D: float) -> float:
    if n <= 1:
        raise ValueError("refractive index must exceed 1")
    a = (n + 1) * D * D / (4 * (n - 1))
    return (math.sqrt(s1 * s1 + a) + math.sqrt(s2 * s2 + a) - (s1 + s2)) / (n + 1)


def _sag(n: float, s: float, x: np.ndarray) -> np.ndarray:
    return (np.sqrt(((n - 1) * s) ** 2 + (n * n - 1) * x * x) - (n - 1) * s) / (n * n - 1)


def contour_profiles(n: float, s1: float, s2: float, T: float, D: float,
                     samples: int = 512) -> tuple[np.ndarray, np.ndarray]:
    """Object- and image-side hyperbolic contours as ``(samples, 2)`` arrays of (x, z).

    The image-side surface bulges back toward the object side, so its sag is
    subtracted from the back vertex at ``s1 + T``; with this orientation the
    two surfaces meet exactly at ``|x| = D/2`` when ``T`` is the
    edge-matched thickness.
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    if D <= 0:
        raise ValueError("aperture must be positive")
    x = np.linspace(-D / 2, D / 2, samples)
    front = np.column_stack([x, s1 + _sag(n, s1, x)])
    back = np.column_stack([x, s1 + T - _sag(n, s2, x)])
    return front, back


def interception_efficiency(D: float, w: float) -> float:
    """Fraction of Gaussian beam power passing an aperture of full width ``D``."""
    if D <= 0 or w <= 0:
        raise ValueError("D and w must be positive")
    return 1.0 - math.exp(-2.0 * (D / 2) ** 2 / (w * w))


def design_lens(spec: LensSpec, samples: int = 512) -> LensDesign:
    zr = spec.rayleigh_length
    f = effective_focal_length(spec)
    s2 = image_distance(f, spec.object_distance, zr)
    w_lens = beam_radius(BeamParams(spec.object_waist, spec.wavelength), spec.object_distance)
    D = spec.aperture_factor * w_lens
    T = lens_thickness(spec.refractive_index, spec.object_distance, s2, D)
    front, back = contour_profiles(spec.refractive_index, spec.object_distance, s2, T, D, samples)
    return LensDesign(
        spec=spec,
        focal_length=f,
        image_distance=s2,
        thickness=T,
        aperture=D,
        object_profile=front,
        image_profile=back,
        predicted_focal_plane=spec.object_distance + T + s2,
        interception_efficiency=interception_efficiency(D, w_lens),
        beam_radius_at_lens=w_lens,
    )


def write_profile_csv(path, profile: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x_mm", "z_mm"])
        for x, z in profile:
            writer.writerow([repr(float(x)), repr(float(z))])


def read_profile_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header != ["x_mm", "z_mm"]:
            raise ValueError(f"unexpected profile header {header!r}")
        return np.array([[float(a), float(b)] for a, b in reader])


PROTOTYPE_LENS = LensSpec(
    object_distance=300.0,
    object_waist=8.51,
    image_waist=17.02,
    wavelength=11.11,
    refractive_index=1.45,
)
