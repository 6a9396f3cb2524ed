"""Per-column reconstruction time at prototype scale, compared with the belt-speed budget."""
from __future__ import annotations

import argparse
import dataclasses
import time
from dataclasses import dataclass

import numpy as np

from fbh.forward import (PROTOTYPE_BEAM, PROTOTYPE_SWEEP, EchoVolume, Scene, prototype_geometry,
                         simulate_echo)
from fbh.planning import flop_cost, latency_budget
from fbh.recon import make_grid, make_plan, reconstruct_volume


@dataclass
class BenchConfig:
    n_columns: int = 64
    repeats: int = 3
    workers: int = 1
    stolt: str = "linear"
    belt_speed_mm_s: float = 500.0
    x_step_mm: float = 5.2


def run(cfg: BenchConfig) -> dict:
    geo = prototype_geometry()
    col = simulate_echo(Scene.points((0.0, 0.0, 1200.0)), geo, PROTOTYPE_SWEEP,
                        PROTOTYPE_BEAM).data[0]
    plan = make_plan(geo, PROTOTYPE_SWEEP, stolt=cfg.stolt)
    grid = make_grid(plan, 1100.0)
    echo = EchoVolume(np.repeat(col[None], cfg.n_columns, axis=0),
                      prototype_geometry(n_x=cfg.n_columns), PROTOTYPE_SWEEP, PROTOTYPE_BEAM)
    reconstruct_volume(EchoVolume(col[None], geo, PROTOTYPE_SWEEP, PROTOTYPE_BEAM), grid, plan)
    best = float("inf")
    for _ in range(cfg.repeats):
        t0 = time.perf_counter()
        reconstruct_volume(echo, grid, plan, workers=cfg.workers)
        best = min(best, (time.perf_counter() - t0) / cfg.n_columns)
    cost = flop_cost(geo.n_y, PROTOTYPE_SWEEP.count, grid.z.size)
    budget = latency_budget(cost, 6.5e12, cfg.belt_speed_mm_s, cfg.x_step_mm)
    return {"ms_per_column": best * 1e3, "budget_ms": budget.interval_s * 1e3,
            "model_mflops": cost.total / 1e6, "n_z": int(grid.z.size)}


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    for f in dataclasses.fields(BenchConfig):
        ap.add_argument("--" + f.name.replace("_", "-"), type=type(f.default), default=f.default)
    cfg = BenchConfig(**vars(ap.parse_args()))
    r = run(cfg)
    verdict = "within" if r["ms_per_column"] <= r["budget_ms"] else "over"
    print(f"{r['ms_per_column']:.2f} ms per column ({r['n_z']} z samples, "
          f"{r['model_mflops']:.2f} MFLOPs modelled); budget {r['budget_ms']:.1f} ms: {verdict}")


if __name__ == "__main__":
    main()
