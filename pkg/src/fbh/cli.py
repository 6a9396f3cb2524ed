"""Command-line front end.

Exit codes: 0 success, 1 domain or validation failure, 2 usage error.
``--json`` prints a machine-readable document that reconstructs the
corresponding domain object (see the ``*_from_json`` helpers).
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import DEMO_SCENE_YAML, load_config, parse_config
from .container import digest, load_bank, load_echo, load_image, save_bank, save_echo
from .deconv import capture_psf_bank, deconvolve, profile_fwhm
from .display import emit_image
from .errors import FBHError
from .forward import add_noise, default_workers, simulate_echo
from .planning import (CostReport, SamplingPlan, SamplingReport, flop_cost, latency_budget,
                       validate_sampling)
from .quasioptics import LensSpec, design_lens, write_profile_csv
from .recon import (backproject_oracle, default_z0, make_grid, make_plan, peak_correlation,
                    reconstruct_volume)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)


def _workers(v):
    n = int(v)
    if n < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return n


def _positive(v):
    x = float(v)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {v}")
    return x


# ---- subcommands -----------------------------------------------------------

def cmd_design_lens(a) -> int:
    spec = LensSpec(a.s1, a.w01, a.w02, a.wavelength, a.n, a.aperture_factor, a.lens_length)
    d = design_lens(spec, a.samples)
    if a.profile_csv:
        base = Path(a.profile_csv)
        write_profile_csv(base, d.object_profile)
        write_profile_csv(base.with_name(base.stem + "_image" + base.suffix), d.image_profile)
    s = d.summary()
    if a.json:
        print(_dump(s))
        return 0
    rows = [("focal length f", "focal_length_mm", "mm"),
            ("image distance s2", "image_distance_mm", "mm"),
            ("thickness T", "thickness_mm", "mm"),
            ("aperture D", "aperture_mm", "mm"),
            ("beam radius at lens", "beam_radius_at_lens_mm", "mm"),
            ("focal plane s1+T+s2", "predicted_focal_plane_mm", "mm")]
    for label, key, unit in rows:
        print(f"{label:24s} {s[key]:10.2f} {unit}")
    print(f"{'interception efficiency':24s} {100 * s['interception_efficiency']:10.2f} %")
    return 0


def lens_from_json(doc: dict) -> LensSpec:
    return LensSpec(doc["object_distance_mm"], doc["object_waist_mm"], doc["image_waist_mm"],
                    doc["wavelength_mm"], doc["refractive_index"], doc["aperture_factor"],
                    doc["lens_length_mm"])


def _echo_summary(echo, raw: bytes) -> dict:
    return {"shape": list(echo.data.shape), "digest": digest(raw).hex(),
            "noise_seed": echo.noise_seed, "z0_hint": echo.z0_hint}


def cmd_simulate(a) -> int:
    cfg = load_config(a.config)
    echo = simulate_echo(cfg.scene, cfg.geometry, cfg.sweep, cfg.beam, workers=a.workers)
    snr = a.snr_db if a.snr_db is not None else cfg.snr_db
    if snr is not None:
        echo = add_noise(echo, snr, a.seed if a.seed is not None else cfg.seed)
    raw = save_echo(a.output, echo)
    s = _echo_summary(echo, raw)
    print(_dump(s) if a.json else f"wrote {a.output}: {tuple(s['shape'])} digest {s['digest']}")
    return 0


def _plan_and_grid(echo, a):
    plan = make_plan(echo.geometry, echo.sweep, stolt=a.stolt, jacobian=a.jacobian,
                     window=a.window, y_upsample=a.y_upsample)
    z0 = default_z0(echo) if a.z0 is None else a.z0
    return plan, make_grid(plan, z0, a.nz)


def _image_summary(image, paths) -> dict:
    mag = np.abs(image.data)
    ix, iy, iz = np.unravel_index(int(np.argmax(mag)), mag.shape)
    return {"shape": list(image.data.shape), "provenance": image.provenance,
            "peak": {"x": float(image.x_positions[ix]), "y": float(image.grid.y[iy]),
                     "z": float(image.grid.z[iz]), "magnitude": float(mag[ix, iy, iz])},
            "files": [str(p) for p in paths]}


def cmd_reconstruct(a) -> int:
    raw = Path(a.echo).read_bytes()
    echo = load_echo(a.echo)
    plan, grid = _plan_and_grid(echo, a)
    image = reconstruct_volume(echo, grid, plan, workers=a.workers)
    image.provenance = digest(raw).hex()
    paths = emit_image(image, a.dynamic_range, a.output)
    s = _image_summary(image, paths)
    if a.json:
        print(_dump(s))
    else:
        p = s["peak"]
        print(f"image {tuple(s['shape'])} peak at x={p['x']:.1f} y={p['y']:.1f} "
              f"z={p['z']:.1f} mm; wrote {len(paths)} files to {a.output}")
    return 0


def cmd_compare_oracle(a) -> int:
    echo = load_echo(a.echo)
    plan, grid = _plan_and_grid(echo, a)
    fast = reconstruct_volume(echo, grid, plan, workers=a.workers)
    oracle = backproject_oracle(echo, grid)
    corr = peak_correlation(fast.data, oracle.data, a.radius)
    pf = np.unravel_index(int(np.argmax(np.abs(fast.data))), fast.data.shape)
    po = np.unravel_index(int(np.argmax(np.abs(oracle.data))), oracle.data.shape)
    same = tuple(map(int, pf)) == tuple(map(int, po))
    ok = corr >= a.min_correlation and same
    s = {"correlation": corr, "fast_peak": list(map(int, pf)), "oracle_peak": list(map(int, po)),
         "same_peak": same, "min_correlation": a.min_correlation, "passed": ok}
    if a.json:
        print(_dump(s))
    else:
        print(f"correlation {corr:.4f} (min {a.min_correlation}); fast peak {s['fast_peak']} "
              f"oracle peak {s['oracle_peak']}: {'PASS' if ok else 'FAIL'}")
    return 0 if ok else 1


def cmd_capture_psf(a) -> int:
    cfg = load_config(a.config)
    depths = a.depths or cfg.psf_depths
    if not depths:
        raise FBHError("no PSF depths given (use --depths or psf.depths_mm)")
    bank = capture_psf_bank(cfg.geometry, cfg.sweep, cfg.beam, depths, workers=a.workers)
    save_bank(a.output, bank)
    widths = [profile_fwhm(p, bank.x_pitch) for p in bank.profiles]
    s = {"depths": bank.depths.tolist(), "fwhm_mm": widths, "length": bank.profiles.shape[1],
         "geometry_hash": bank.geometry_hash}
    if a.json:
        print(_dump(s))
    else:
        for z, w in zip(s["depths"], widths):
            print(f"z = {z:8.1f} mm   x FWHM = {w:6.2f} mm")
    return 0


def cmd_deconvolve(a) -> int:
    image = load_image(a.image)
    bank = load_bank(a.bank)
    out = deconvolve(image, bank, a.epsilon, a.magnitude_only)
    paths = emit_image(out, a.dynamic_range, a.output, stem="deconvolved")
    s = _image_summary(out, paths)
    s["epsilon"] = a.epsilon
    print(_dump(s) if a.json else f"deconvolved {tuple(s['shape'])}; wrote {len(paths)} files")
    return 0


def cmd_validate(a) -> int:
    plan = SamplingPlan(a.dx, a.dy, a.df, a.dx_res, a.lambda_min, a.array_height,
                        a.domain_height, a.standoff, a.r_max)
    rep = validate_sampling(plan)
    if a.json:
        print(_dump(rep.to_dict()))
    else:
        print(f"{'criterion':12s} {'value':>10s} {'limit':>10s} {'margin':>8s}  result")
        for c in rep.criteria:
            tag = "pass" if c.passed else "FAIL"
            note = f"  ({c.warning})" if c.warning else ""
            print(f"{c.name:12s} {c.value:10.4f} {c.limit:10.4f} {c.margin:8.1%}  {tag}{note}")
        print("overall:", "pass" if rep.passed else "FAIL")
    return 0 if rep.passed else 1


def report_from_json(doc: dict) -> SamplingReport:
    return SamplingReport.from_dict(doc)


def cmd_cost(a) -> int:
    rep = flop_cost(a.n_y, a.n_f, a.n_z)
    bud = latency_budget(rep, a.rate, a.belt_speed, a.dx)
    if a.json:
        d = rep.to_dict()
        d["latency"] = {k: (None if isinstance(v, float) and math.isinf(v) else v)
                        for k, v in bud.to_dict().items()}
        print(_dump(d))
        return 0
    for s in rep.stages:
        print(f"{s.name:46s} {s.multiplications:14.0f} x {s.additions:14.0f} +")
    print(f"total {rep.total / 1e6:.2f} MFLOPs per column")
    print(f"latency {bud.compute_time_s * 1e6:.3f} us at {a.rate:.3g} FLOP/s; "
          f"interval {bud.interval_s * 1e3:.2f} ms; real-time: {'yes' if bud.real_time else 'no'}")
    return 0


def cost_from_json(doc: dict) -> CostReport:
    return CostReport.from_dict(doc)


def cmd_pipeline(a) -> int:
    cfg = load_config(a.config) if a.config else parse_config(DEMO_SCENE_YAML)
    out = Path(a.output)
    out.mkdir(parents=True, exist_ok=True)
    echo = simulate_echo(cfg.scene, cfg.geometry, cfg.sweep, cfg.beam, workers=a.workers)
    if cfg.snr_db is not None:
        echo = add_noise(echo, cfg.snr_db, cfg.seed)
    raw = save_echo(out / "echo.fbec", echo)
    r = cfg.recon
    plan = make_plan(cfg.geometry, cfg.sweep, stolt=r.stolt, jacobian=r.jacobian,
                     window=r.window, y_upsample=r.y_upsample)
    grid = make_grid(plan, default_z0(echo) if r.z0 is None else r.z0, r.nz)
    image = reconstruct_volume(echo, grid, plan, workers=a.workers)
    image.provenance = digest(raw).hex()
    files = emit_image(image, r.dynamic_range_db, out / "image", stem="image")
    s = {"echo_digest": image.provenance, "image": _image_summary(image, files)}
    if cfg.psf_depths:
        bank = capture_psf_bank(cfg.geometry, cfg.sweep, cfg.beam, cfg.psf_depths,
                                workers=a.workers)
        save_bank(out / "psf_bank.fbec", bank)
        dec = deconvolve(image, bank, cfg.epsilon)
        dfiles = emit_image(dec, r.dynamic_range_db, out / "deconvolved", stem="deconvolved")
        s["deconvolved"] = _image_summary(dec, dfiles)
        s["psf_fwhm_mm"] = [profile_fwhm(p, bank.x_pitch) for p in bank.profiles]
    print(_dump(s) if a.json else f"pipeline outputs in {out}")
    return 0


# ---- parser ----------------------------------------------------------------

def _recon_flags(p):
    p.add_argument("--z0", type=float, default=None, help="reconstruction reference depth (mm)")
    p.add_argument("--nz", type=int, default=None, help="number of z voxels")
    p.add_argument("--window", action="store_true", help="Hann taper over y0 and frequency")
    p.add_argument("--jacobian", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--stolt", choices=("linear", "sinc"), default="linear")
    p.add_argument("--y-upsample", type=_workers, default=1)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fbh", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("--workers", type=_workers, default=None,
                        help="thread count (default: FBH_WORKERS or 1)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design-lens", parents=[common], help="Gaussian-beam lens design")
    p.add_argument("--s1", type=_positive, default=300.0, help="object distance (mm)")
    p.add_argument("--w01", type=_positive, default=8.51, help="object waist radius (mm)")
    p.add_argument("--w02", type=_positive, default=17.02, help="image waist radius (mm)")
    p.add_argument("--wavelength", type=_positive, default=11.11, help="mm")
    p.add_argument("--n", type=_positive, default=1.45, help="refractive index")
    p.add_argument("--aperture-factor", type=_positive, default=2.5)
    p.add_argument("--lens-length", type=_positive, default=1600.0)
    p.add_argument("--samples", type=int, default=512)
    p.add_argument("--profile-csv", default=None, help="write x_mm,z_mm surface profiles")
    p.set_defaults(func=cmd_design_lens)

    p = sub.add_parser("simulate", parents=[common], help="scene config -> ECHO container")
    p.add_argument("config")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", parents=[common], help="ECHO -> IMGV + PGM")
    p.add_argument("echo")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--dynamic-range", type=_positive, default=18.0, help="display range (dB)")
    _recon_flags(p)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("compare-oracle", parents=[common], help="fast vs direct backprojection")
    p.add_argument("echo")
    p.add_argument("--radius", type=int, default=3)
    p.add_argument("--min-correlation", type=float, default=0.95)
    _recon_flags(p)
    p.set_defaults(func=cmd_compare_oracle)

    p = sub.add_parser("capture-psf", parents=[common], help="rod PSF bank -> PSFB container")
    p.add_argument("config", help="scene config supplying geometry, sweep and beam")
    p.add_argument("--depths", type=_positive, nargs="+", default=None)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_capture_psf)

    p = sub.add_parser("deconvolve", parents=[common], help="IMGV + PSFB -> IMGV + PGM")
    p.add_argument("image")
    p.add_argument("bank")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--epsilon", type=float, default=1e-2)
    p.add_argument("--magnitude-only", action="store_true")
    p.add_argument("--dynamic-range", type=_positive, default=18.0)
    p.set_defaults(func=cmd_deconvolve)

    p = sub.add_parser("validate", parents=[common], help="sampling criteria table")
    p.add_argument("--dx", type=_positive, default=5.2, help="belt step (mm)")
    p.add_argument("--dy", type=_positive, default=5.2, help="element pitch (mm)")
    p.add_argument("--df", type=_positive, default=64.0, help="frequency step (MHz)")
    p.add_argument("--dx-res", type=_positive, default=11.35, help="finest x resolution (mm)")
    p.add_argument("--lambda-min", type=_positive, default=9.993, help="mm")
    p.add_argument("--array-height", type=_positive, default=960.0, help="mm")
    p.add_argument("--domain-height", type=_positive, default=2000.0, help="mm")
    p.add_argument("--standoff", type=_positive, default=1200.0, help="mm")
    p.add_argument("--r-max", type=_positive, default=2340.0, help="mm")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("cost", parents=[common], help="FLOP count and real-time budget")
    p.add_argument("n_y", type=int)
    p.add_argument("n_f", type=int)
    p.add_argument("n_z", type=int)
    p.add_argument("--rate", type=float, default=6.5e12, help="compute rate (FLOP/s)")
    p.add_argument("--belt-speed", type=_positive, default=500.0, help="mm/s")
    p.add_argument("--dx", type=_positive, default=5.2, help="belt step (mm)")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("pipeline", parents=[common], help="end-to-end demo scenario")
    p.add_argument("config", nargs="?", default=None, help="scene config (default: built-in)")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_pipeline)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "workers", None) is None:
        args.workers = default_workers()
    try:
        return args.func(args)
    except FBHError as exc:
        print(f"fbh: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"fbh: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
