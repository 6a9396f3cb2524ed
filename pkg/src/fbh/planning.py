"""Sampling criteria, FLOP accounting and real-time budget for a line-scan imager."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .forward import C_MM_PER_S

# engineering allowance on the half-wavelength element-spacing rule
PRACTICAL_Y_TOLERANCE = 0.05


@dataclass(frozen=True)
class SamplingPlan:
    dx: float  # mm
    dy: float  # mm
    df: float  # MHz
    dx_res_min: float  # mm, finest x resolution to support
    wavelength_min: float  # mm
    array_height: float  # mm, L_y
    domain_height: float  # mm, D_y
    standoff: float  # mm, Z_0
    r_max: float  # mm

    def __post_init__(self):
        for name, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"{name} must be positive, got {v}")


@dataclass(frozen=True)
class Criterion:
    name: str
    rule: str
    value: float
    limit: float
    passed: bool
    margin: float  # (limit - value) / limit; negative when the limit is exceeded
    warning: str = ""


@dataclass(frozen=True)
class SamplingReport:
    criteria: tuple[Criterion, ...]

    @property
    def passed(self) -> bool:
        by = {c.name: c for c in self.criteria}
        y_ok = by["y_angular"].passed or by["y_practical"].passed
        return by["x"].passed and by["f"].passed and y_ok

    def to_dict(self) -> dict:
        return {"passed": self.passed, "criteria": [asdict(c) for c in self.criteria]}

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingReport":
        return cls(tuple(Criterion(**c) for c in d["criteria"]))


def _criterion(name, rule, value, limit, tol=0.0):
    margin = (limit - value) / limit
    passed = value <= limit * (1 + tol)
    warning = ""
    if passed and value > limit:
        warning = f"exceeds {rule} by {-margin:.1%} (within {tol:.0%} allowance)"
    return Criterion(name, rule, float(value), float(limit), bool(passed), float(margin), warning)


def validate_sampling(plan: SamplingPlan) -> SamplingReport:
    """Check the x, y and frequency sampling intervals.

    y is judged by the near-field angular rule ``lam_min / (4 sin(theta_max))``
    and by the half-wavelength rule used in practice; either one suffices.
    """
    half = (plan.array_height + plan.domain_height) / 2
    sin_max = half / math.hypot(half, plan.standoff)
    df_limit_mhz = C_MM_PER_S / (2 * plan.r_max) / 1e6
    return SamplingReport((
        _criterion("x", "dx <= 0.5 * dx_res_min", plan.dx, 0.5 * plan.dx_res_min),
        _criterion("y_angular", "dy <= lam_min / (4 sin theta_max)", plan.dy,
                   plan.wavelength_min / (4 * sin_max)),
        _criterion("y_practical", "dy <= lam_min / 2", plan.dy, plan.wavelength_min / 2,
                   PRACTICAL_Y_TOLERANCE),
        _criterion("f", "df <= c / (2 R_max)", plan.df, df_limit_mhz),
    ))


@dataclass(frozen=True)
class Stage:
    name: str
    multiplications: float
    additions: float

    @property
    def flops(self) -> float:
        return self.multiplications + self.additions


@dataclass(frozen=True)
class CostReport:
    n_y: int
    n_f: int
    n_z: int
    stages: tuple[Stage, ...] = field(default=())

    @property
    def multiplications(self) -> float:
        return sum(s.multiplications for s in self.stages)

    @property
    def additions(self) -> float:
        return sum(s.additions for s in self.stages)

    @property
    def total(self) -> float:
        return self.multiplications + self.additions

    @property
    def closed_form(self) -> float:
        return closed_form_flops(self.n_y, self.n_f, self.n_z)

    def to_dict(self) -> dict:
        return {
            "n_y": self.n_y, "n_f": self.n_f, "n_z": self.n_z,
            "stages": [asdict(s) for s in self.stages],
            "multiplications": self.multiplications, "additions": self.additions,
            "total_flops": self.total, "closed_form_flops": self.closed_form,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CostReport":
        return cls(d["n_y"], d["n_f"], d["n_z"], tuple(Stage(**s) for s in d["stages"]))


def closed_form_flops(n_y: int, n_f: int, n_z: int) -> float:
    return n_y * (17 * n_f + 7 * n_z + 5 * n_f * math.log2(n_y * n_y * n_f))


def flop_cost(n_y: int, n_f: int, n_z: int) -> CostReport:
    """Per-column FLOP count of the reconstruction, stage by stage."""
    if min(n_y, n_f, n_z) < 1:
        raise ValueError("counts must be >= 1")
    fy = n_f * n_y
    ly, lf = math.log2(n_y), math.log2(n_f)
    stages = (
        Stage("1-D FFT over y0", 2 * fy * ly, 3 * fy * ly),
        Stage("multiply by exp(-j kz z0)", 4 * fy, 2 * fy),
        Stage("Stolt interpolation", 6 * fy, 5 * fy),
        Stage("1-D IFFT over ky", 2 * fy * ly, 3 * fy * ly),
        Stage("1-D FFT over kz", 2 * fy * lf, 3 * fy * lf),
        Stage("multiply by (2z / j lam) exp(-j k0 (z - z0))", 4 * n_z * n_y, 2 * n_z * n_y),
        Stage("conjugation", 0.0, float(n_z * n_y)),
    )
    return CostReport(n_y, n_f, n_z, stages)


@dataclass(frozen=True)
class LatencyBudget:
    compute_time_s: float
    interval_s: float
    real_time: bool
    headroom: float  # interval / compute time

    def to_dict(self) -> dict:
        return asdict(self)


def latency_budget(report: CostReport | float, compute_rate: float, belt_speed: float,
                   dx: float) -> LatencyBudget:
    """Per-column compute time against the belt's inter-column interval.

    ``compute_rate`` is in FLOP/s, ``belt_speed`` in mm/s, ``dx`` in mm.
    A non-positive compute rate is never real-time.
    """
    flops = report.total if isinstance(report, CostReport) else float(report)
    if belt_speed <= 0 or dx <= 0:
        raise ValueError("belt_speed and dx must be positive")
    interval = dx / belt_speed
    if compute_rate <= 0:
        return LatencyBudget(math.inf, interval, False, 0.0)
    t = flops / compute_rate
    return LatencyBudget(t, interval, t <= interval, interval / t if t > 0 else math.inf)


def throughput(belt_speed: float, target_spacing: float) -> float:
    """People per hour for belt speed (mm/s) and spacing between people (mm)."""
    if belt_speed <= 0 or target_spacing <= 0:
        raise ValueError("inputs must be positive")
    return 3600.0 * belt_speed / target_spacing


def kmh_to_mm_s(v: float) -> float:
    return v * 1e6 / 3600.0
