"""Born-approximation echo synthesis for a fan-beam line array.

Geometry: the array lies along y in the plane z = 0 and the belt moves the
scene past it along x.  Each x position is one column.  For a non-zero
``tx_rx_offset`` the transmitter sits at ``x - offset/2`` and the receiver at
``x + offset/2``; both carry their own fan beam centred on their x position.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ScattererAtArrayPlane, ZeroSignal
from .quasioptics import BeamParams, beam_radius

C_MM_PER_S = 2.99792458e11
# two-way beam weights below this are dropped from the sum
GATE_FLOOR = 1e-4


@dataclass(frozen=True)
class FrequencySweep:
    f_start: float  # GHz
    f_stop: float  # GHz
    f_step: float  # GHz

    def __post_init__(self):
        if not (self.f_start > 0 and self.f_stop > self.f_start and self.f_step > 0):
            raise ValueError(f"invalid sweep {self}")

    @property
    def count(self) -> int:
        return int(math.floor((self.f_stop - self.f_start) / self.f_step + 1e-9)) + 1

    @property
    def frequencies_ghz(self) -> np.ndarray:
        return self.f_start + self.f_step * np.arange(self.count)

    @property
    def wavenumbers(self) -> np.ndarray:
        """k = 2 pi f / c in rad/mm."""
        return 2 * np.pi * self.frequencies_ghz * 1e9 / C_MM_PER_S

    @property
    def wavelength_min(self) -> float:
        return C_MM_PER_S / (self.frequencies_ghz[-1] * 1e9)


@dataclass(frozen=True)
class ArrayGeometry:
    element_y: np.ndarray
    x_positions: np.ndarray
    x_step: float
    tx_rx_offset: float = 0.0

    def __post_init__(self):
        y = np.asarray(self.element_y, dtype=float)
        x = np.asarray(self.x_positions, dtype=float)
        if y.ndim != 1 or y.size < 1:
            raise ValueError("need at least one array element")
        if x.ndim != 1 or x.size < 1:
            raise ValueError("need at least one x position")
        if not self.x_step > 0:
            raise ValueError("x_step must be positive")
        if y.size > 1 and not np.allclose(np.diff(y), y[1] - y[0], rtol=1e-9, atol=1e-9):
            raise ValueError("element pitch must be uniform")
        if x.size > 1 and not np.allclose(np.diff(x), self.x_step, rtol=1e-9, atol=1e-9):
            raise ValueError("x positions must be spaced by x_step")
        y.setflags(write=False)
        x.setflags(write=False)
        object.__setattr__(self, "element_y", y)
        object.__setattr__(self, "x_positions", x)

    @property
    def n_y(self) -> int:
        return self.element_y.size

    @property
    def n_x(self) -> int:
        return self.x_positions.size

    @property
    def y_pitch(self) -> float:
        return float(self.element_y[1] - self.element_y[0]) if self.n_y > 1 else 0.0

    def with_offset(self, tx_rx_offset: float) -> "ArrayGeometry":
        return replace(self, tx_rx_offset=tx_rx_offset)


def make_geometry(n_y: int, y_pitch: float, n_x: int = 1, x_step: float = 5.2,
                  tx_rx_offset: float = 0.0, y_center: float = 0.0,
                  x_center: float = 0.0) -> ArrayGeometry:
    """Uniform array of ``n_y`` elements and ``n_x`` belt positions, both centred."""
    y = y_center + (np.arange(n_y) - (n_y - 1) / 2) * y_pitch
    x = x_center + (np.arange(n_x) - (n_x - 1) / 2) * x_step
    return ArrayGeometry(y, x, x_step, tx_rx_offset)


@dataclass(frozen=True)
class RodTarget:
    z: float
    y_span: float
    pitch: float
    reflectivity: complex = 1.0
    y_center: float = 0.0
    x: float = 0.0


@dataclass
class Scene:
    """Point scatterers (``positions`` is N x 3, in mm) plus optional rods."""

    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 3)))
    reflectivity: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    rods: list = field(default_factory=list)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.reflectivity = np.asarray(self.reflectivity, dtype=complex).reshape(-1)
        if self.positions.shape[0] != self.reflectivity.size:
            raise ValueError("one reflectivity per scatterer")
        if not np.all(np.isfinite(self.positions)) or not np.all(np.isfinite(self.reflectivity)):
            raise ValueError("scatterer data must be finite")
        if np.any(self.positions[:, 2] < 0):
            raise ValueError("scatterers must lie in front of the array (z >= 0)")

    @classmethod
    def points(cls, *pts) -> "Scene":
        """``Scene.points((x, y, z), (x, y, z, f), ...)``; f defaults to 1."""
        pos = [p[:3] for p in pts]
        refl = [p[3] if len(p) > 3 else 1.0 for p in pts]
        return cls(np.array(pos, float).reshape(-1, 3), np.array(refl, complex))

    def __add__(self, other: "Scene") -> "Scene":
        return Scene(
            np.vstack([self.positions, other.positions]),
            np.concatenate([self.reflectivity, other.reflectivity]),
            list(self.rods) + list(other.rods),
        )

    def translated(self, dx=0.0, dy=0.0, dz=0.0) -> "Scene":
        rods = [replace(r, x=r.x + dx, y_center=r.y_center + dy, z=r.z + dz) for r in self.rods]
        return Scene(self.positions + np.array([dx, dy, dz]), self.reflectivity.copy(), rods)

    def expanded(self) -> tuple[np.ndarray, np.ndarray]:
        """All point scatterers, with rods discretised."""
        pos = [self.positions]
        refl = [self.reflectivity]
        for rod in self.rods:
            r = rod_to_scene(rod.z, rod.y_span, rod.pitch, rod.y_center, rod.reflectivity, rod.x)
            pos.append(r.positions)
            refl.append(r.reflectivity)
        return np.vstack(pos), np.concatenate(refl)

    @property
    def nearest_z(self):
        pos, _ = self.expanded()
        return float(pos[:, 2].min()) if len(pos) else None


def rod_to_scene(z: float, y_span: float, pitch: float, y_center: float = 0.0,
                 reflectivity: complex = 1.0, x: float = 0.0) -> Scene:
    """Metal rod parallel to the array, as a line of point scatterers along y."""
    if not pitch > 0:
        raise ValueError("rod pitch must be positive")
    n = int(math.floor(y_span / pitch + 1e-9)) + 1
    y = y_center - y_span / 2 + pitch * np.arange(n) if n > 1 else np.array([y_center])
    pos = np.column_stack([np.full(n, x), y, np.full(n, z)])
    return Scene(pos, np.full(n, reflectivity, complex))


def rod_pitch(sweep: FrequencySweep) -> float:
    """Quarter of the shortest wavelength, fine enough for a continuous rod."""
    return sweep.wavelength_min / 4


def beam_weight(dx, z, beam: BeamParams):
    """One-way narrow-side amplitude of the fan beam, ``exp(-dx^2 / w(z)^2)``."""
    w = beam_radius(beam, z)
    return np.exp(-np.square(dx) / np.square(w))


@dataclass
class EchoVolume:
    """Complex echo samples indexed (x position, array element, frequency)."""

    data: np.ndarray
    geometry: ArrayGeometry
    sweep: FrequencySweep
    beam: BeamParams
    noise_seed: int | None = None
    z0_hint: float | None = None

    def __post_init__(self):
        expect = (self.geometry.n_x, self.geometry.n_y, self.sweep.count)
        if self.data.shape != expect:
            raise ValueError(f"echo shape {self.data.shape} != geometry/sweep {expect}")

    def column(self, i: int) -> np.ndarray:
        return self.data[i]


def _simulate_column(x_col, pos, refl, geometry, k, beam):
    half = geometry.tx_rx_offset / 2
    xt, xr = x_col - half, x_col + half
    xs, ys, zs = pos[:, 0], pos[:, 1], pos[:, 2]
    gate = beam_weight(xt - xs, zs, beam) * beam_weight(xr - xs, zs, beam)
    keep = gate >= GATE_FLOOR
    out = np.zeros((geometry.n_y, k.size), complex)
    if not np.any(keep):
        return out
    xs, ys, zs = xs[keep], ys[keep], zs[keep]
    amp = gate[keep] * refl[keep]
    dy2 = np.square(geometry.element_y[None, :] - ys[:, None]) + np.square(zs)[:, None]
    rt = np.sqrt(np.square(xt - xs)[:, None] + dy2)
    rr = np.sqrt(np.square(xr - xs)[:, None] + dy2)
    if np.any(rt == 0) or np.any(rr == 0):
        raise ScattererAtArrayPlane("scatterer coincides with an array element")
    path = rt + rr
    a = amp[:, None] / (rt * rr)
    # k is uniform: advance exp(-j k path) one frequency step at a time
    dk = k[1] - k[0] if k.size > 1 else 0.0
    step = np.exp(-1j * dk * path)
    phasor = a * np.exp(-1j * k[0] * path)
    for i in range(k.size):
        if i and i % 16 == 0:
            phasor = a * np.exp(-1j * k[i] * path)
        out[:, i] = phasor.sum(axis=0)
        phasor *= step
    return out


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("FBH_WORKERS", "1")))
    except ValueError:
        return 1


def simulate_echo(scene: Scene, geometry: ArrayGeometry, sweep: FrequencySweep,
                  beam: BeamParams, workers: int | None = None) -> EchoVolume:
    """Synthesise s(x, y0, k) as a sum of bistatic spherical returns.

    Each scatterer contributes ``g * f * exp(-j k (r_t + r_r)) / (r_t r_r)``
    where ``g`` is the product of the transmit and receive fan-beam weights.
    Columns are independent and are computed in parallel when ``workers > 1``.
    """
    pos, refl = scene.expanded()
    if np.any(pos[:, 2] == 0):
        raise ScattererAtArrayPlane("scatterer lies in the array plane z = 0")
    k = sweep.wavenumbers
    data = np.zeros((geometry.n_x, geometry.n_y, k.size), complex)
    workers = workers or default_workers()

    def run(i):
        data[i] = _simulate_column(geometry.x_positions[i], pos, refl, geometry, k, beam)

    if pos.shape[0]:
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                list(pool.map(run, range(geometry.n_x)))
        else:
            for i in range(geometry.n_x):
                run(i)
    z0 = scene.nearest_z
    return EchoVolume(data, geometry, sweep, beam, None,
                      None if z0 is None else max(z0 - 100.0, 0.0))


def add_noise(echo: EchoVolume, snr_db: float, seed: int = 0) -> EchoVolume:
    """Add circular complex Gaussian noise at the requested mean SNR.

    ``snr_db = math.inf`` returns an unchanged copy.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return replace(echo, data=echo.data.copy())
    p_sig = float(np.mean(np.abs(echo.data) ** 2))
    if p_sig == 0:
        raise ZeroSignal("cannot set an SNR on an all-zero echo")
    p_noise = p_sig / 10 ** (snr_db / 10)
    rng = np.random.default_rng(seed)
    shape = echo.data.shape
    noise = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return replace(echo, data=echo.data + np.sqrt(p_noise / 2) * noise, noise_seed=int(seed))


# Prototype scenario: 24-30 GHz in 64 MHz steps, 960 mm array at 5.2 mm pitch,
# targets at 1.2 m.  The beam waist is the 8.51 mm target-side waist of the
# lens design, placed at the target plane.
PROTOTYPE_SWEEP = FrequencySweep(24.0, 30.0, 0.064)
PROTOTYPE_PITCH = 5.2
PROTOTYPE_N_ELEMENTS = int(960 // PROTOTYPE_PITCH) + 1
PROTOTYPE_STANDOFF = 1200.0
PROTOTYPE_BEAM = BeamParams(8.51, 11.11, PROTOTYPE_STANDOFF)


def prototype_geometry(n_x: int = 1, x_step: float = 5.2, tx_rx_offset: float = 0.0) -> ArrayGeometry:
    return make_geometry(PROTOTYPE_N_ELEMENTS, PROTOTYPE_PITCH, n_x, x_step, tx_rx_offset)
