import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fbh.errors import NegativeDiscriminant
from fbh.quasioptics import (HPBW_FACTOR, PROTOTYPE_LENS, BeamParams, LensSpec, beam_radius,
                             contour_profiles, design_lens, effective_focal_length, hpbw,
                             image_distance, interception_efficiency, lens_thickness,
                             rayleigh_length, read_profile_csv, waist_magnification,
                             write_profile_csv)

BEAM = BeamParams(8.51, 11.11)


def test_beam_radius_at_waist():
    assert beam_radius(BEAM, 0.0) == 8.51


def test_beam_radius_at_lens_plane_gives_aperture():
    w = beam_radius(BEAM, 300.0)
    assert w == pytest.approx(124.96, abs=0.01)
    assert 2.5 * w == pytest.approx(312.40, abs=0.05)


def test_beam_radius_one_rayleigh_length():
    assert beam_radius(BEAM, BEAM.rayleigh_length) == pytest.approx(8.51 * math.sqrt(2), rel=1e-12)


def test_beam_radius_respects_waist_position():
    b = BeamParams(8.51, 11.11, 1200.0)
    assert beam_radius(b, 1200.0) == 8.51
    assert beam_radius(b, 1300.0) == pytest.approx(beam_radius(BEAM, 100.0))


def test_rayleigh_length_values():
    assert rayleigh_length(8.51, 11.11) == pytest.approx(math.pi * 8.51 ** 2 / 11.11)
    assert rayleigh_length(8.51, 11.11) == pytest.approx(20.48, abs=0.01)
    w0 = 3.0
    assert rayleigh_length(w0, math.pi * w0 ** 2) == pytest.approx(1.0)
    assert rayleigh_length(2 * w0, 1.0) == pytest.approx(4 * rayleigh_length(w0, 1.0))


@pytest.mark.parametrize("w, expected, tol", [(10.0, 11.77, 0.005), (8.51, 10.02, 0.005),
                                              (1.0, 1.1774, 5e-5)])
def test_hpbw_examples(w, expected, tol):
    assert hpbw(w) == pytest.approx(expected, abs=tol)


def test_focal_length_prototype():
    assert effective_focal_length(PROTOTYPE_LENS) == pytest.approx(201.40, abs=0.05)


def test_focal_length_matches_independent_evaluation():
    s1, lam, w1, w2 = 300.0, 11.11, 8.51, 17.02
    zr = math.pi * w1 * w1 / lam
    # root of (1 - r) f^2 - 2 s1 f + (s1^2 + zr^2) ... solved by the quadratic formula
    a, b, c = 1 - (w1 / w2) ** 2, -2 * s1, s1 * s1 + zr * zr
    f = (-b - math.sqrt(b * b - 4 * a * c)) / (2 * a)
    assert effective_focal_length(PROTOTYPE_LENS) == pytest.approx(f, rel=1e-12)


def test_focal_length_unit_magnification():
    spec = LensSpec(300.0, 8.51, 8.51, 11.11)
    zr = spec.rayleigh_length
    assert effective_focal_length(spec) == pytest.approx((300 ** 2 + zr ** 2) / 600, rel=1e-12)


def test_focal_length_unreachable_magnification():
    # a big waist one Rayleigh length away cannot be magnified much further
    spec = LensSpec(1.0, 30.0, 300.0, 1.0)
    with pytest.raises(NegativeDiscriminant):
        effective_focal_length(spec)


def test_image_distance_examples():
    assert image_distance(201.40, 300.0, 20.48) == pytest.approx(595.79, abs=0.5)
    assert image_distance(150.0, 150.0, 20.0) == pytest.approx(150.0)
    assert image_distance(150.0, 300.0, 1e7) == pytest.approx(150.0, abs=1e-6)


def test_lens_thickness_examples():
    assert lens_thickness(1.45, 300.0, 595.79, 312.40) == pytest.approx(112.12, abs=0.1)
    assert lens_thickness(1.45, 300.0, 595.79, 0.0) == 0.0


@given(st.floats(1.0, 500.0), st.floats(1.0, 500.0))
def test_lens_thickness_increasing_in_aperture(d1, d2):
    lo, hi = sorted((d1, d2))
    if hi - lo > 1e-6:
        assert lens_thickness(1.45, 300.0, 595.79, hi) > lens_thickness(1.45, 300.0, 595.79, lo)


def test_contour_vertices_and_edge_gap():
    d = design_lens(PROTOTYPE_LENS)
    front, back = contour_profiles(1.45, 300.0, d.image_distance, d.thickness, d.aperture, 513)
    assert front[256, 0] == pytest.approx(0.0, abs=1e-12)
    assert front[256, 1] == pytest.approx(300.0)
    assert back[256, 1] == pytest.approx(300.0 + d.thickness)
    gap = abs(front[-1, 1] - back[-1, 1])
    assert gap <= 0.01 * d.thickness


def test_interception_efficiency_examples():
    assert interception_efficiency(2.5 * 10, 10) == pytest.approx(0.956, abs=0.001)
    assert interception_efficiency(1e6, 10) == pytest.approx(1.0)
    assert interception_efficiency(20, 10) == pytest.approx(1 - math.exp(-2), abs=1e-12)
    assert interception_efficiency(20, 10) == pytest.approx(0.865, abs=0.0005)


def test_design_lens_prototype():
    d = design_lens(PROTOTYPE_LENS)
    assert d.focal_length == pytest.approx(201.40, abs=0.05)
    assert d.image_distance == pytest.approx(595.79, abs=0.5)
    assert d.thickness == pytest.approx(112.12, abs=0.1)
    assert d.aperture == pytest.approx(312.40, abs=0.5)
    assert d.predicted_focal_plane == pytest.approx(1007.87, abs=0.5)
    assert d.interception_efficiency == interception_efficiency(d.aperture, d.beam_radius_at_lens)
    assert d.object_profile.shape == (512, 2)


def test_profile_csv_roundtrip(tmp_path):
    d = design_lens(PROTOTYPE_LENS, samples=33)
    p = tmp_path / "front.csv"
    write_profile_csv(p, d.object_profile)
    assert p.read_text().splitlines()[0] == "x_mm,z_mm"
    np.testing.assert_array_equal(read_profile_csv(p), d.object_profile)


@pytest.mark.parametrize("kwargs", [dict(object_distance=-1), dict(object_waist=0),
                                    dict(image_waist=1.0), dict(refractive_index=1.0)])
def test_lens_spec_validation(kwargs):
    base = dict(object_distance=300.0, object_waist=8.51, image_waist=17.02, wavelength=11.11)
    base.update(kwargs)
    with pytest.raises(ValueError):
        LensSpec(**base)


# ---- properties -------------------------------------------------------------

waists = st.floats(1.0, 50.0)
lams = st.floats(1.0, 20.0)


@given(waists, lams, st.floats(0.0, 5000.0))
def test_beam_radius_even(w0, lam, z):
    b = BeamParams(w0, lam)
    assert beam_radius(b, z) == pytest.approx(beam_radius(b, -z), rel=1e-14)


@given(waists, lams, st.floats(1e-3, 5000.0), st.floats(1e-3, 5000.0))
def test_beam_radius_increasing(w0, lam, z1, z2):
    b = BeamParams(w0, lam)
    lo, hi = sorted((z1, z2))
    if hi > lo * (1 + 1e-9):
        assert beam_radius(b, hi) > beam_radius(b, lo)


@given(st.floats(1e-3, 1e4))
def test_hpbw_ratio(w):
    assert hpbw(w) / w == pytest.approx(1.1774, abs=1e-4)
    assert HPBW_FACTOR == pytest.approx(math.sqrt(2 * math.log(2)))


specs = st.builds(
    lambda s1, w1, m, lam, n: LensSpec(s1, w1, w1 * m, lam, n),
    st.floats(200.0, 600.0), st.floats(5.0, 15.0), st.floats(1.0, 3.0),
    st.floats(5.0, 15.0), st.floats(1.2, 2.0))


@given(specs)
def test_design_is_deterministic_and_edge_matched(spec):
    try:
        a = design_lens(spec, samples=65)
    except NegativeDiscriminant:
        return
    b = design_lens(spec, samples=65)
    assert a.summary() == b.summary()
    np.testing.assert_array_equal(a.object_profile, b.object_profile)
    gap = abs(a.object_profile[-1, 1] - a.image_profile[-1, 1])
    assert gap <= 0.01 * a.thickness


@given(specs)
def test_waist_magnification_roundtrip(spec):
    try:
        f = effective_focal_length(spec)
    except NegativeDiscriminant:
        return
    m = waist_magnification(f, spec.object_distance, spec.rayleigh_length)
    assert m == pytest.approx(spec.image_waist / spec.object_waist, rel=0.01)
