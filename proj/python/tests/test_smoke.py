import math

import numpy as np
import pytest

import tacktrap as tt


def test_collection_matches_cone_between_hole_and_rim():
    R, a, h, z = 4e-3, 3e-3, 0.375e-3, 2.25e-3

    def polar(r):
        return math.atan2(r, R - math.sqrt(R * R - r * r) - z)

    expect = 0.5 * (math.cos(polar(a)) - math.cos(polar(h)))
    f = tt.collection_fraction(z)
    assert f["geometric"] == pytest.approx(expect, rel=1e-9)
    assert f["weighted"] == pytest.approx(f["geometric"])


def test_monte_carlo_close_to_quadrature():
    q = tt.collection_fraction(2e-3, emission="dipole")
    mc = tt.collection_fraction(2e-3, emission="dipole", samples=200000, seed=3)
    assert abs(mc["weighted"] - q["weighted"]) < 4 * mc["weighted_error"]


def test_na_equivalent():
    omega, na, above = tt.na_equivalent(0.24)
    assert omega == pytest.approx(4 * math.pi * 0.24)
    assert na == pytest.approx(math.sqrt(1 - 0.52**2))
    assert not above


def test_two_ion_spacing():
    k, q, m = 8.9875517923e9, 1.602176634e-19, 137.905247 * 1.66053906660e-27
    w = 2 * math.pi * 200e3
    d = (2 * k * q * q / (m * w * w)) ** (1 / 3)
    out = tt.relax_crystal(2)
    p = out["positions"]
    assert p.shape == (2, 3)
    assert np.linalg.norm(p[0] - p[1]) == pytest.approx(d, rel=1e-6)


def test_seven_ion_shells():
    assert tt.relax_crystal(7)["shells"] == [1, 6]


def test_trap_solve_on_coarse_grid():
    rc = tt.default_config(["grid.spacing=0.04mm"])
    out = tt.solve_trap(rc)
    assert out["psi_eV"].shape == (out["z"].size, out["r"].size)
    assert 1.7e-3 < out["minimum_z"] < 3e-3
    assert out["axial_hz"] / out["radial_hz"] == pytest.approx(2.0, rel=0.05)


def test_config_errors_raise():
    with pytest.raises(tt.TackError, match="ConfigError"):
        tt.default_config(["drive.frequency=-1MHz"])
    with pytest.raises(tt.TackError, match="IoError"):
        tt.load_config("/nonexistent.json")


def test_override_matches_hash():
    a = tt.default_config(["ion_z=2mm"])
    b = tt.parse_config(a.resolved)
    assert a.hash == b.hash
    assert a.hash != tt.default_config().hash


def test_corrector_design():
    out = tt.design_corrector(tt.default_config())
    assert out["direction_spread"] < 1e-4
    assert out["fit_residual_rms"] < 1e-6
    assert out["table"].startswith("# material_index=")


def test_cli_exit_codes(tmp_path):
    assert tt.run_cli(["budget", "/nonexistent.json", "--output-dir", str(tmp_path)]) == 4
    cfg = tmp_path / "c.json"
    cfg.write_text(tt.default_config().resolved)
    assert tt.run_cli(["budget", str(cfg), "--output-dir", str(tmp_path)]) == 0
    assert (tmp_path / "budget.csv").exists()
