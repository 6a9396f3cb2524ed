"""Quasi-1D holographic range-migration reconstruction.

Every belt position (x column) is inverted on its own from its (y0, k) echo
slice:

    conj -> FFT over y0 -> * exp(-j kz z0) -> Stolt (ky, k) -> (ky, kz)
         -> IFFT over ky -> FFT over kz to z' -> * (2z / (j lam0)) exp(-j kzc (z - z0))
         -> conj

with kz = sqrt(4 k^2 - ky^2) and kzc the centre of the uniform kz grid.
All transforms use unitary ("ortho") scaling.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AllZeroImage, PlanMismatch
from .forward import ArrayGeometry, EchoVolume, FrequencySweep, default_workers

SINC_TAPS = 8


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def _frozen(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SpectralPlan:
    """Immutable transform/interpolation tables for one (geometry, sweep) pair."""

    k: np.ndarray
    y_start: float
    y_pitch: float
    n_y: int
    n_y_fft: int
    y_upsample: int
    ky: np.ndarray
    kz: np.ndarray
    n_z_fft: int
    stolt: str
    jacobian: bool
    window: bool
    kz_nodes: np.ndarray = field(repr=False)  # (n_y_fft, n_f), 0 where evanescent
    propagating: np.ndarray = field(repr=False)  # (n_y_fft, n_f) bool
    gather_idx: np.ndarray = field(repr=False)  # (n_y_fft, n_kz, taps)
    gather_w: np.ndarray = field(repr=False)  # (n_y_fft, n_kz, taps)
    jacobian_w: np.ndarray = field(repr=False)  # (n_y_fft, n_kz)

    @property
    def n_f(self) -> int:
        return self.k.size

    @property
    def dkz(self) -> float:
        return float(self.kz[1] - self.kz[0])

    @property
    def dz(self) -> float:
        return 2 * math.pi / (self.n_z_fft * self.dkz)

    @property
    def dy(self) -> float:
        return self.y_pitch / self.y_upsample

    @property
    def kz_center(self) -> float:
        return float(self.kz[self.kz.size // 2])

    @property
    def wavelength_center(self) -> float:
        return 2 * math.pi / float(0.5 * (self.k[0] + self.k[-1]))


def _linear_tables(k, ky, kz, kz_nodes, prop):
    n_f = k.size
    dk = k[1] - k[0]
    kt = 0.5 * np.sqrt(kz[None, :] ** 2 + ky[:, None] ** 2)
    t = (kt - k[0]) / dk
    i0 = np.clip(np.floor(t).astype(int), 0, n_f - 2)
    rows = np.arange(ky.size)[:, None]
    valid = (t >= -1e-9) & (t <= n_f - 1 + 1e-9) & prop[rows, i0] & prop[rows, i0 + 1]
    lo = kz_nodes[rows, i0]
    hi = kz_nodes[rows, i0 + 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        w = np.where(valid, (kz[None, :] - lo) / (hi - lo), 0.0)
    w = np.clip(w, 0.0, 1.0)
    idx = np.stack([i0, i0 + 1], axis=-1)
    wt = np.stack([(1 - w) * valid, w * valid], axis=-1)
    return idx, wt, valid, kt


def _sinc_tables(k, ky, kz, prop):
    n_f = k.size
    dk = k[1] - k[0]
    kt = 0.5 * np.sqrt(kz[None, :] ** 2 + ky[:, None] ** 2)
    t = (kt - k[0]) / dk
    valid = (t >= -1e-9) & (t <= n_f - 1 + 1e-9)
    half = SINC_TAPS // 2
    base = np.floor(t).astype(int)
    offs = np.arange(-half + 1, half + 1)
    idx = base[..., None] + offs
    d = t[..., None] - idx
    win = 0.5 * (1 + np.cos(np.pi * d / half))
    wt = np.sinc(d) * win * (np.abs(d) < half)
    inside = (idx >= 0) & (idx < n_f)
    idx = np.clip(idx, 0, n_f - 1)
    rows = np.arange(ky.size)[:, None, None]
    wt = np.where(inside & prop[rows, idx] & valid[..., None], wt, 0.0)
    return idx, wt, valid, kt


def make_plan(geometry: ArrayGeometry, sweep: FrequencySweep, stolt: str = "linear",
              jacobian: bool = True, window: bool = False, y_pad: int = 2,
              y_upsample: int = 1, z_oversample: int = 1,
              extend_kz: bool = True) -> SpectralPlan:
    """Build the spectral plan.

    ``y_pad`` zero-pads the y0 transform to ``next_pow2(y_pad * n_y)``;
    ``y_upsample`` and ``z_oversample`` interpolate the output image by
    spectral zero-padding.  The uniform kz grid runs from the smallest
    propagating ``kz(k_min, ky)`` (or ``2 k_min`` with ``extend_kz=False``)
    up to ``2 k_max``.
    """
    if stolt not in ("linear", "sinc"):
        raise ValueError(f"unknown Stolt interpolator {stolt!r}")
    k = sweep.wavenumbers
    if k.size < 2:
        raise PlanMismatch("need at least two frequencies")
    n_y = geometry.n_y
    pitch = geometry.y_pitch if n_y > 1 else 1.0
    m = next_pow2(max(1, y_pad) * n_y)
    ky = 2 * np.pi * np.fft.fftfreq(m, d=pitch)
    n_kz = next_pow2(k.size)
    arg = 4 * k[None, :] ** 2 - ky[:, None] ** 2
    prop = arg > 0
    kz_nodes = np.sqrt(np.where(prop, arg, 0.0))
    # lowest propagating kz reached by the k_min row over all ky
    kz_lo = kz_nodes[prop[:, 0], 0].min() if extend_kz and prop[:, 0].any() else 2 * k[0]
    kz = np.linspace(kz_lo, 2 * k[-1], n_kz)
    if stolt == "linear":
        idx, wt, valid, kt = _linear_tables(k, ky, kz, kz_nodes, prop)
    else:
        idx, wt, valid, kt = _sinc_tables(k, ky, kz, prop)
    jac = np.where(valid, kz[None, :] / (4 * kt), 0.0) if jacobian else valid.astype(float)
    return SpectralPlan(
        k=_frozen(k), y_start=float(geometry.element_y[0]), y_pitch=float(pitch), n_y=n_y,
        n_y_fft=m, y_upsample=int(y_upsample), ky=_frozen(ky), kz=_frozen(kz),
        n_z_fft=n_kz * int(z_oversample), stolt=stolt, jacobian=jacobian, window=window,
        kz_nodes=_frozen(kz_nodes), propagating=_frozen(prop), gather_idx=_frozen(idx),
        gather_w=_frozen(wt), jacobian_w=_frozen(jac),
    )


@dataclass(frozen=True)
class ReconGrid:
    y: np.ndarray
    z: np.ndarray
    z0: float

    def __post_init__(self):
        y = _frozen(np.asarray(self.y, float))
        z = _frozen(np.asarray(self.z, float))
        if z.size < 1 or y.size < 1:
            raise ValueError("empty grid")
        if np.any(z <= 0) or np.any(z < self.z0 - 1e-9):
            raise ValueError("z voxels must be > 0 and >= z0")
        for a in (y, z):
            if a.size > 2 and not np.allclose(np.diff(a), a[1] - a[0], rtol=1e-9, atol=1e-9):
                raise ValueError("grid spacing must be uniform")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "z", z)

    @property
    def dz(self) -> float:
        return float(self.z[1] - self.z[0]) if self.z.size > 1 else float("nan")


def make_grid(plan: SpectralPlan, z0: float, nz: int | None = None,
              ny: int | None = None) -> ReconGrid:
    """Grid matched to ``plan``: y on the (upsampled) element lattice, z from z0 + dz."""
    ny = (plan.n_y - 1) * plan.y_upsample + 1 if ny is None else ny
    y = plan.y_start + plan.dy * np.arange(ny)
    # z = z0 is excluded only when z0 is 0 (the array plane itself)
    start = 0 if z0 > 0 else 1
    nz = plan.n_z_fft - start if nz is None else nz
    z = z0 + plan.dz * np.arange(start, start + nz)
    return ReconGrid(y, z, float(z0))


def default_z0(echo: EchoVolume) -> float:
    return float(echo.z0_hint) if echo.z0_hint is not None else 0.0


@dataclass
class ImageVolume:
    data: np.ndarray  # (n_x, n_y, n_z) complex
    grid: ReconGrid
    x_positions: np.ndarray
    provenance: str = ""

    def __post_init__(self):
        expect = (np.size(self.x_positions), self.grid.y.size, self.grid.z.size)
        if self.data.shape != expect:
            raise ValueError(f"image shape {self.data.shape} != grid {expect}")

    @property
    def x_step(self) -> float:
        x = np.asarray(self.x_positions)
        return float(x[1] - x[0]) if x.size > 1 else float("nan")


class _ColumnKernel:
    """Per-(plan, grid) precomputation shared by all columns."""

    def __init__(self, plan: SpectralPlan, grid: ReconGrid):
        self.plan = plan
        self.grid = grid
        ny_max = plan.n_y_fft * plan.y_upsample
        if grid.y.size > ny_max:
            raise PlanMismatch(f"grid has {grid.y.size} y voxels, plan supports {ny_max}")
        y_expect = plan.y_start + plan.dy * np.arange(grid.y.size)
        if not np.allclose(grid.y, y_expect, rtol=0, atol=1e-6 * max(1.0, plan.dy)):
            raise PlanMismatch("grid y voxels do not sit on the plan's y lattice")
        zi = (grid.z - grid.z0) / plan.dz
        self.z_index = np.rint(zi).astype(int)
        if not np.allclose(zi, self.z_index, atol=1e-6):
            raise PlanMismatch("grid z spacing does not match plan dz")
        if self.z_index.min() < 0 or self.z_index.max() >= plan.n_z_fft:
            raise PlanMismatch("grid z extent exceeds the unambiguous range of the plan")
        self.z0_phase = np.where(plan.propagating, np.exp(-1j * plan.kz_nodes * grid.z0), 0)
        zp = grid.z - grid.z0
        self.post = (2 * grid.z / (1j * plan.wavelength_center)) * np.exp(-1j * plan.kz_center * zp)
        n = plan.y_upsample * plan.n_y_fft
        self.n_ky = n
        c = plan.kz.size // 2
        self.kz_slot = (np.arange(plan.kz.size) - c) % plan.n_z_fft
        if plan.window:
            self.win = np.outer(np.hanning(plan.n_y + 2)[1:-1], np.hanning(plan.n_f + 2)[1:-1])
        else:
            self.win = None

    def __call__(self, column: np.ndarray, trace: dict | None = None) -> np.ndarray:
        plan = self.plan
        if column.shape != (plan.n_y, plan.n_f):
            raise PlanMismatch(f"column shape {column.shape} != plan {(plan.n_y, plan.n_f)}")
        s = np.conj(column)
        if self.win is not None:
            s = s * self.win
        buf = np.zeros((plan.n_y_fft, plan.n_f), complex)
        buf[: plan.n_y] = s
        spec = np.fft.fft(buf, axis=0, norm="ortho")
        if trace is not None:
            trace["fft_y"] = (buf, spec)
        spec = spec * self.z0_phase
        st = stolt_resample(spec, plan)
        if plan.y_upsample > 1:
            m = plan.n_y_fft
            h = m // 2
            up = np.zeros((self.n_ky, st.shape[1]), complex)
            up[:h] = st[:h]
            up[self.n_ky - (m - h):] = st[h:]
            st = up * math.sqrt(plan.y_upsample)
        img_y = np.fft.ifft(st, axis=0, norm="ortho")
        if trace is not None:
            trace["ifft_ky"] = (st, img_y)
        img_y = img_y[: self.grid.y.size]
        zbuf = np.zeros((img_y.shape[0], plan.n_z_fft), complex)
        zbuf[:, self.kz_slot] = img_y
        img = np.fft.fft(zbuf, axis=1, norm="ortho")
        if trace is not None:
            trace["fft_kz"] = (zbuf, img)
        img = img[:, self.z_index] * self.post[None, :]
        return np.conj(img)


def stolt_resample(spectrum: np.ndarray, plan: SpectralPlan) -> np.ndarray:
    """Map a (ky, k) spectrum onto the uniform (ky, kz) grid of ``plan``.

    Samples outside the measured band or in the evanescent region are zero.
    The Jacobian dk/dkz = kz / (4k) is applied when the plan enables it.
    """
    if spectrum.shape != (plan.n_y_fft, plan.n_f):
        raise PlanMismatch(f"spectrum shape {spectrum.shape} != {(plan.n_y_fft, plan.n_f)}")
    rows = np.arange(plan.n_y_fft)[:, None, None]
    out = np.sum(spectrum[rows, plan.gather_idx] * plan.gather_w, axis=-1)
    return out * plan.jacobian_w


def reconstruct_column(column: np.ndarray, plan: SpectralPlan, grid: ReconGrid,
                       trace: dict | None = None) -> np.ndarray:
    """Invert one x column ``s(y0, k)`` into a complex ``f(y, z)`` slice."""
    return _ColumnKernel(plan, grid)(np.asarray(column), trace)


def reconstruct_volume(echo: EchoVolume, grid: ReconGrid, plan: SpectralPlan | None = None,
                       workers: int | None = None) -> ImageVolume:
    """Reconstruct every column independently (optionally on a thread pool)."""
    plan = plan or make_plan(echo.geometry, echo.sweep)
    if (plan.n_y, plan.n_f) != echo.data.shape[1:]:
        raise PlanMismatch("echo dimensions do not match plan")
    kernel = _ColumnKernel(plan, grid)
    out = np.empty((echo.geometry.n_x, grid.y.size, grid.z.size), complex)

    def run(i):
        out[i] = kernel(echo.data[i])

    workers = workers or default_workers()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(run, range(out.shape[0])))
    else:
        for i in range(out.shape[0]):
            run(i)
    return ImageVolume(out, grid, np.array(echo.geometry.x_positions))


ORACLE_MAX_OPS = 2e8


def backproject_oracle(echo: EchoVolume, grid: ReconGrid) -> ImageVolume:
    """Direct matched-filter image ``sum_{y0,k} s e^{+j 2 k r}``; small grids only."""
    g = echo.geometry
    k = echo.sweep.wavenumbers
    ops = g.n_x * grid.y.size * grid.z.size * g.n_y * k.size
    if ops > ORACLE_MAX_OPS:
        raise ValueError(f"oracle grid too large ({ops:.3g} ops > {ORACLE_MAX_OPS:.3g})")
    out = np.zeros((g.n_x, grid.y.size, grid.z.size), complex)
    dy2 = (grid.y[:, None] - g.element_y[None, :]) ** 2
    for iz, z in enumerate(grid.z):
        r = np.sqrt(dy2 + z * z)
        ph = np.exp(2j * r[:, :, None] * k)  # (ny_img, n_y0, n_f)
        out[:, :, iz] = np.einsum("xak,yak->xy", echo.data, ph)
    return ImageVolume(out, grid, np.array(g.x_positions))


def peak_correlation(fast: np.ndarray, oracle: np.ndarray, radius: int = 3) -> float:
    """Normalised complex correlation |<a, b>| / (|a| |b|) around the oracle peak."""
    a = np.asarray(fast)
    b = np.asarray(oracle)
    if a.shape != b.shape:
        raise ValueError("shape mismatch")
    peak = np.unravel_index(np.argmax(np.abs(b)), b.shape)
    sl = tuple(slice(max(0, p - radius), p + radius + 1) for p in peak)
    a, b = a[sl].ravel(), b[sl].ravel()
    den = np.linalg.norm(a) * np.linalg.norm(b)
    return float(abs(np.vdot(a, b)) / den) if den else 0.0


def magnitude_db(image, dynamic_range_db: float = 18.0) -> np.ndarray:
    """Map |v| to [0, 1]: 0 dB -> 1, -dynamic_range dB (or lower) -> 0."""
    data = image.data if isinstance(image, ImageVolume) else np.asarray(image)
    mag = np.abs(data)
    peak = mag.max() if mag.size else 0.0
    if not peak > 0:
        raise AllZeroImage("image has no nonzero voxel")
    with np.errstate(divide="ignore"):
        db = 20 * np.log10(mag / peak)
    db = np.clip(db, -dynamic_range_db, 0.0)
    return (db + dynamic_range_db) / dynamic_range_db
