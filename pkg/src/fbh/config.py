"""YAML scene configuration with line-anchored validation errors.

Example::

    schema: 1
    sweep: {f_start_ghz: 24, f_stop_ghz: 30, f_step_ghz: 0.064}
    array: {n_elements: 185, pitch_mm: 5.2, n_x: 11, x_step_mm: 5.2, tx_rx_offset_mm: 0}
    beam: {waist_mm: 8.51, wavelength_mm: 11.11, focus_mm: 1200}
    scatterers:
      - {x: 0, y: 0, z: 1200, re: 1, im: 0}
    rods:
      - {z: 1200, y_span: 960, pitch: 2.5}
    reconstruction: {z0_mm: null, stolt: linear, jacobian: true, window: false}
    noise: {snr_db: null, seed: 0}
    psf: {depths_mm: [1100, 1150, 1200, 1250, 1300], epsilon: 0.01}
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ConfigError
from .forward import (ArrayGeometry, FrequencySweep, RodTarget, Scene, make_geometry,
                      rod_pitch)
from .quasioptics import BeamParams

SCHEMA_VERSION = 1


class _LineDict(dict):
    line = None


class _LineLoader(yaml.SafeLoader):
    pass


def _construct_mapping(loader, node):
    d = _LineDict(loader.construct_mapping(node, deep=True))
    d.line = node.start_mark.line + 1
    return d


_LineLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, _construct_mapping)


@dataclass
class ReconOptions:
    z0: float | None = None
    nz: int | None = None
    stolt: str = "linear"
    jacobian: bool = True
    window: bool = False
    y_upsample: int = 1
    dynamic_range_db: float = 18.0


@dataclass
class SceneConfig:
    scene: Scene
    geometry: ArrayGeometry
    sweep: FrequencySweep
    beam: BeamParams
    recon: ReconOptions = field(default_factory=ReconOptions)
    snr_db: float | None = None
    seed: int = 0
    psf_depths: list = field(default_factory=list)
    epsilon: float = 1e-2


def _get(d, key, kind=float, default=..., section=""):
    where = getattr(d, "line", None)
    if key not in d:
        if default is ...:
            raise ConfigError(f"missing key '{section}{key}'", where)
        return default
    v = d[key]
    if v is None and default is not ...:
        return default
    try:
        if kind is bool:
            if not isinstance(v, bool):
                raise TypeError
            return v
        return kind(v)
    except (TypeError, ValueError):
        raise ConfigError(f"'{section}{key}' must be {kind.__name__}, got {v!r}", where) from None


def _section(doc, key, required=True):
    v = doc.get(key)
    if v is None:
        if required:
            raise ConfigError(f"missing section '{key}'", getattr(doc, "line", None))
        return _LineDict()
    if not isinstance(v, dict):
        raise ConfigError(f"section '{key}' must be a mapping", getattr(doc, "line", None))
    return v


def parse_config(text: str) -> SceneConfig:
    try:
        doc = yaml.load(text, Loader=_LineLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}",
                          None if mark is None else mark.line + 1) from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping", 1)
    schema = _get(doc, "schema", int, section="")
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema {schema} (expected {SCHEMA_VERSION})", doc.line)

    sw = _section(doc, "sweep")
    try:
        sweep = FrequencySweep(_get(sw, "f_start_ghz", section="sweep."),
                               _get(sw, "f_stop_ghz", section="sweep."),
                               _get(sw, "f_step_ghz", section="sweep."))
    except ValueError as exc:
        raise ConfigError(str(exc), sw.line) from None

    ar = _section(doc, "array")
    try:
        geometry = make_geometry(
            _get(ar, "n_elements", int, section="array."), _get(ar, "pitch_mm", section="array."),
            _get(ar, "n_x", int, 1, "array."), _get(ar, "x_step_mm", float, 5.2, "array."),
            _get(ar, "tx_rx_offset_mm", float, 0.0, "array."),
            _get(ar, "y_center_mm", float, 0.0, "array."),
            _get(ar, "x_center_mm", float, 0.0, "array."))
    except ValueError as exc:
        raise ConfigError(str(exc), ar.line) from None

    bm = _section(doc, "beam")
    try:
        beam = BeamParams(_get(bm, "waist_mm", section="beam."),
                          _get(bm, "wavelength_mm", section="beam."),
                          _get(bm, "focus_mm", float, 0.0, "beam."))
    except ValueError as exc:
        raise ConfigError(str(exc), bm.line) from None

    pts = doc.get("scatterers") or []
    rods = doc.get("rods") or []
    if not isinstance(pts, list) or not isinstance(rods, list):
        raise ConfigError("'scatterers' and 'rods' must be lists", doc.line)
    pos, refl = [], []
    for p in pts:
        if not isinstance(p, dict):
            raise ConfigError("scatterer entries must be mappings", doc.line)
        z = _get(p, "z", section="scatterers[].")
        if z <= 0:
            raise ConfigError(f"scatterer z must be > 0, got {z}", p.line)
        pos.append((_get(p, "x", float, 0.0), _get(p, "y", float, 0.0), z))
        refl.append(complex(_get(p, "re", float, 1.0), _get(p, "im", float, 0.0)))
    rod_list = []
    for r in rods:
        if not isinstance(r, dict):
            raise ConfigError("rod entries must be mappings", doc.line)
        z = _get(r, "z", section="rods[].")
        pitch = _get(r, "pitch", float, rod_pitch(sweep), "rods[].")
        if z <= 0 or pitch <= 0:
            raise ConfigError("rod z and pitch must be > 0", r.line)
        rod_list.append(RodTarget(z, _get(r, "y_span", float, 0.0), pitch,
                                  complex(_get(r, "reflectivity", float, 1.0)),
                                  _get(r, "y_center", float, 0.0), _get(r, "x", float, 0.0)))
    try:
        scene = Scene(np.array(pos, float).reshape(-1, 3), np.array(refl, complex), rod_list)
    except ValueError as exc:
        raise ConfigError(str(exc), doc.line) from None

    rc = _section(doc, "reconstruction", required=False)
    recon = ReconOptions(
        z0=_get(rc, "z0_mm", float, None, "reconstruction."),
        nz=_get(rc, "nz", int, None, "reconstruction."),
        stolt=_get(rc, "stolt", str, "linear", "reconstruction."),
        jacobian=_get(rc, "jacobian", bool, True, "reconstruction."),
        window=_get(rc, "window", bool, False, "reconstruction."),
        y_upsample=_get(rc, "y_upsample", int, 1, "reconstruction."),
        dynamic_range_db=_get(rc, "dynamic_range_db", float, 18.0, "reconstruction."),
    )
    if recon.stolt not in ("linear", "sinc"):
        raise ConfigError(f"reconstruction.stolt must be linear or sinc, got {recon.stolt!r}",
                          rc.line)

    nz = _section(doc, "noise", required=False)
    ps = _section(doc, "psf", required=False)
    depths = ps.get("depths_mm") or []
    if not isinstance(depths, list):
        raise ConfigError("psf.depths_mm must be a list", ps.line)
    return SceneConfig(scene, geometry, sweep, beam, recon,
                       _get(nz, "snr_db", float, None, "noise."), _get(nz, "seed", int, 0, "noise."),
                       [float(z) for z in depths], _get(ps, "epsilon", float, 1e-2, "psf."))


def load_config(path) -> SceneConfig:
    with open(path) as fh:
        return parse_config(fh.read())


DEMO_SCENE_YAML = """\
schema: 1
sweep: {f_start_ghz: 24.0, f_stop_ghz: 30.0, f_step_ghz: 0.064}
array: {n_elements: 185, pitch_mm: 5.2, n_x: 61, x_step_mm: 5.2, tx_rx_offset_mm: 20.0}
beam: {waist_mm: 8.51, wavelength_mm: 11.11, focus_mm: 1200.0}
scatterers:
  - {x: 0.0, y: -5.5, z: 1200.0}
  - {x: 0.0, y: 5.5, z: 1200.0}
  - {x: 20.8, y: 100.0, z: 1150.0, re: 0.7}
  - {x: -31.2, y: -150.0, z: 1250.0, re: 0.5, im: 0.5}
reconstruction: {stolt: linear, jacobian: true, window: false, y_upsample: 1}
noise: {snr_db: null, seed: 0}
psf: {depths_mm: [1100.0, 1150.0, 1200.0, 1250.0, 1300.0], epsilon: 0.01}
"""
