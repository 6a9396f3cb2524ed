import json
import subprocess
import sys

import numpy as np
import pytest

from fbh.cli import cost_from_json, lens_from_json, main, report_from_json
from fbh.config import DEMO_SCENE_YAML, parse_config
from fbh.container import digest, load_bank, load_echo, load_image, save_echo
from fbh.display import emit_image, read_pgm, to_gray, write_pgm
from fbh.errors import AllZeroImage, ConfigError, IoFailure
from fbh.forward import PROTOTYPE_BEAM, EchoVolume, FrequencySweep, make_geometry
from fbh.planning import flop_cost
from fbh.quasioptics import PROTOTYPE_LENS
from fbh.recon import ImageVolume, ReconGrid

SMALL = """\
schema: 1
sweep: {f_start_ghz: 24, f_stop_ghz: 30, f_step_ghz: 0.4}
array: {n_elements: 16, pitch_mm: 5.2, n_x: 13, x_step_mm: 5.2, tx_rx_offset_mm: 0}
beam: {waist_mm: 8.51, wavelength_mm: 11.11, focus_mm: 1200}
scatterers:
  - {x: 0, y: 2.6, z: 1200}
  - {x: 5.2, y: -10.4, z: 1230, re: 0.5, im: -0.2}
reconstruction: {nz: 16}
noise: {snr_db: 30, seed: 11}
psf: {depths_mm: [1200], epsilon: 0.01}
"""


def _image(data):
    nx, ny, nz = data.shape
    grid = ReconGrid(5.2 * np.arange(ny), 1100.0 + 13.8 * np.arange(nz), 1100.0)
    return ImageVolume(data, grid, 5.2 * np.arange(nx))


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


# ---- PGM ------------------------------------------------------------------------

def test_pgm_gray_levels_and_header(tmp_path):
    data = np.zeros((2, 5, 3), complex)
    data[0, 1, 2] = 1.0
    data[0, 3, 0] = 10 ** (-18 / 20)
    data[1, 0, 1] = 10 ** (-9 / 20)
    files = emit_image(_image(data), 18.0, tmp_path)
    assert [f.name for f in files] == ["image_x0000.pgm", "image_x0001.pgm", "image.fbec"]
    raw = files[0].read_bytes()
    assert raw.startswith(b"P5\n5 3\n255\n")
    g0, g1 = read_pgm(files[0]), read_pgm(files[1])
    assert g0.shape == (3, 5)  # z rows, y columns
    assert g0[2, 1] == 255
    assert g0[0, 3] == 0
    assert g1[1, 0] == 128  # -9 dB maps to 0.5 -> round(127.5)
    assert load_image(files[2]).data.shape == (2, 5, 3)


def test_pgm_roundtrip(tmp_path):
    g = np.arange(12, dtype=np.uint8).reshape(3, 4)
    write_pgm(tmp_path / "a.pgm", g)
    np.testing.assert_array_equal(read_pgm(tmp_path / "a.pgm"), g)
    np.testing.assert_array_equal(to_gray(np.array([0.0, 0.5, 1.0, 2.0])), [0, 128, 255, 255])


def test_emit_all_zero(tmp_path):
    with pytest.raises(AllZeroImage):
        emit_image(_image(np.zeros((1, 2, 2), complex)), 18.0, tmp_path)


def test_emit_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(IoFailure):
        emit_image(_image(np.ones((1, 2, 2), complex)), 18.0, blocker / "sub")


# ---- config ----------------------------------------------------------------------

def test_config_parses_demo_scene():
    cfg = parse_config(DEMO_SCENE_YAML)
    assert cfg.geometry.n_y == 185 and cfg.geometry.n_x == 61
    assert cfg.sweep.count == 94
    assert cfg.scene.positions.shape == (4, 3)
    assert cfg.scene.reflectivity[3] == 0.5 + 0.5j
    assert cfg.beam == PROTOTYPE_BEAM
    assert cfg.psf_depths == [1100.0, 1150.0, 1200.0, 1250.0, 1300.0]


def test_config_rods_only():
    cfg = parse_config(SMALL.split("scatterers:")[0] + "rods:\n  - {z: 1200, y_span: 50}\n")
    assert cfg.scene.positions.shape == (0, 3)
    assert len(cfg.scene.rods) == 1
    assert cfg.scene.rods[0].pitch == pytest.approx(cfg.sweep.wavelength_min / 4)


@pytest.mark.parametrize("text, line, fragment", [
    ("schema: 2\n", 1, "schema"),
    ("schema: 1\nsweep: {f_start_ghz: 24, f_stop_ghz: 30}\n", 2, "f_step_ghz"),
    ("schema: 1\nsweep: {f_start_ghz: 24, f_stop_ghz: 30, f_step_ghz: 1}\n"
     "array:\n  n_elements: many\n  pitch_mm: 5.2\n", 4, "n_elements"),
    (SMALL.replace("- {x: 5.2, y: -10.4, z: 1230", "- {x: 5.2, y: -10.4, z: 0"), 7, "z"),
    ("schema: 1\nsweep: [1, 2\n", 3, "YAML"),
    (SMALL.replace("stolt", "x").replace("{nz: 16}", "{nz: 16, stolt: cubic}"), 8, "stolt"),
])
def test_config_errors_are_line_anchored(text, line, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.line == line
    assert str(exc.value).startswith(f"line {line}:")
    assert fragment in str(exc.value)


# ---- CLI -----------------------------------------------------------------------

def test_cli_design_lens(capsys, tmp_path):
    code, out, _ = run(capsys, "design-lens", "--profile-csv", tmp_path / "lens.csv")
    assert code == 0
    assert "201.40" in out and "595.79" in out and "112.12" in out
    assert (tmp_path / "lens.csv").read_text().startswith("x_mm,z_mm")
    assert (tmp_path / "lens_image.csv").exists()
    code, out, _ = run(capsys, "design-lens", "--json")
    assert lens_from_json(json.loads(out)) == PROTOTYPE_LENS


def test_cli_cost(capsys):
    code, out, _ = run(capsys, "cost", 394, 88, 88)
    assert code == 0 and "4.94 MFLOPs" in out
    code, out, _ = run(capsys, "cost", 394, 88, 88, "--json")
    doc = json.loads(out)
    assert cost_from_json(doc) == flop_cost(394, 88, 88)
    assert doc["latency"]["real_time"] is True


def test_cli_validate(capsys):
    code, out, _ = run(capsys, "validate", "--json")
    assert code == 0
    assert report_from_json(json.loads(out)).passed
    code, out, _ = run(capsys, "validate", "--r-max", 3000)
    assert code == 1 and "FAIL" in out


@pytest.mark.parametrize("argv, flag", [
    (["cost", "394", "88"], "n_z"),
    (["design-lens", "--s1", "-3"], "--s1"),
    (["reconstruct", "e.fbec", "-o", "x", "--stolt", "cubic"], "--stolt"),
    (["reconstruct", "e.fbec", "-o", "x", "--workers", "0"], "--workers"),
    (["frobnicate"], "frobnicate"),
])
def test_cli_usage_errors(capsys, argv, flag):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
    assert flag in capsys.readouterr().err


def test_cli_reconstruct_zero_echo(capsys, tmp_path):
    sweep = FrequencySweep(24.0, 30.0, 2.0)
    e = EchoVolume(np.zeros((2, 4, sweep.count), complex), make_geometry(4, 5.2, n_x=2), sweep,
                   PROTOTYPE_BEAM)
    save_echo(tmp_path / "z.fbec", e)
    code, _, err = run(capsys, "reconstruct", tmp_path / "z.fbec", "-o", tmp_path / "img")
    assert code == 1
    assert "AllZeroImage" in err


def test_cli_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "reconstruct", tmp_path / "absent.fbec", "-o", tmp_path / "o")
    assert code == 1 and err


def test_cli_bad_config_exit_code(capsys, tmp_path):
    (tmp_path / "bad.yaml").write_text("schema: 1\nsweep: {}\n")
    code, _, err = run(capsys, "simulate", tmp_path / "bad.yaml", "-o", tmp_path / "e.fbec")
    assert code == 1 and "line 2" in err


def test_cli_end_to_end_small(capsys, tmp_path):
    cfg = tmp_path / "scene.yaml"
    cfg.write_text(SMALL)
    code, out, _ = run(capsys, "simulate", cfg, "-o", tmp_path / "e.fbec", "--json")
    assert code == 0
    doc = json.loads(out)
    raw = (tmp_path / "e.fbec").read_bytes()
    assert doc["digest"] == digest(raw).hex()
    echo = load_echo(tmp_path / "e.fbec")
    assert list(echo.data.shape) == doc["shape"] and echo.noise_seed == 11

    code, out, _ = run(capsys, "reconstruct", tmp_path / "e.fbec", "-o", tmp_path / "img",
                       "--nz", 16, "--json")
    assert code == 0
    doc = json.loads(out)
    img = load_image(tmp_path / "img" / "image.fbec")
    assert img.provenance == digest(raw).hex() == doc["provenance"]
    assert list(img.data.shape) == doc["shape"] == [13, 16, 16]
    assert doc["peak"]["y"] == pytest.approx(2.6)

    code, out, _ = run(capsys, "compare-oracle", tmp_path / "e.fbec", "--nz", 16, "--json")
    assert code == 0 and json.loads(out)["passed"]

    code, out, _ = run(capsys, "capture-psf", cfg, "-o", tmp_path / "bank.fbec", "--json")
    assert code == 0
    bank = load_bank(tmp_path / "bank.fbec")
    assert bank.depths.tolist() == json.loads(out)["depths"] == [1200.0]

    code, out, _ = run(capsys, "deconvolve", tmp_path / "img" / "image.fbec",
                       tmp_path / "bank.fbec", "-o", tmp_path / "dec", "--json")
    assert code == 0
    dec = load_image(tmp_path / "dec" / "deconvolved.fbec")
    assert list(dec.data.shape) == json.loads(out)["shape"]
    for eps in ("0", "-1"):
        code, _, err = run(capsys, "deconvolve", tmp_path / "img" / "image.fbec",
                           tmp_path / "bank.fbec", "-o", tmp_path / "dec2", "--epsilon", eps)
        assert code == 1 and "EpsilonNonPositive" in err


def test_cli_is_deterministic_across_workers(capsys, tmp_path, monkeypatch):
    cfg = tmp_path / "scene.yaml"
    cfg.write_text(SMALL)
    outs = []
    for i, workers in enumerate(("1", "3")):
        monkeypatch.setenv("FBH_WORKERS", workers)
        d = tmp_path / f"run{i}"
        assert run(capsys, "simulate", cfg, "-o", d / "e.fbec")[0] == 1  # parent dir missing
        d.mkdir()
        assert run(capsys, "simulate", cfg, "-o", d / "e.fbec")[0] == 0
        assert run(capsys, "reconstruct", d / "e.fbec", "-o", d / "img", "--nz", 16)[0] == 0
        outs.append([(d / "e.fbec").read_bytes()]
                    + [p.read_bytes() for p in sorted((d / "img").iterdir())])
    assert outs[0] == outs[1]


def test_cli_compare_oracle_refuses_large_grid(capsys, tmp_path):
    geo = make_geometry(185, 5.2, n_x=40)
    sweep = FrequencySweep(24.0, 30.0, 0.064)
    e = EchoVolume(np.ones((40, 185, sweep.count), complex), geo, sweep, PROTOTYPE_BEAM)
    save_echo(tmp_path / "big.fbec", e)
    code, _, err = run(capsys, "compare-oracle", tmp_path / "big.fbec", "--z0", 1100)
    assert code == 1 and "too large" in err


def test_console_script_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "fbh.cli", "cost", "394", "88", "88"],
                       capture_output=True, text=True, cwd=tmp_path)
    assert r.returncode == 0 and "MFLOPs" in r.stdout
    r = subprocess.run([sys.executable, "-m", "fbh.cli", "cost"], capture_output=True, text=True)
    assert r.returncode == 2
