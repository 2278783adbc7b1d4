import os
import subprocess
import sys

import numpy as np
import pytest

from snapshot_plots import SnapshotFormatError, read_snapshot, render


def run_cli(args):
    proc = subprocess.run(args, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    return proc


def write_snapshot(path, values, chart="sphere", zeta=1.0,
                   mu_range=(0.0, np.pi), nu_range=(0.0, 2 * np.pi)):
    n_mu, n_nu = values.shape
    dmu = (mu_range[1] - mu_range[0]) / n_mu
    dnu = (nu_range[1] - nu_range[0]) / n_nu
    mu = mu_range[0] + (np.arange(n_mu) + 0.5) * dmu
    nu = nu_range[0] + np.arange(n_nu) * dnu
    with open(path, "w") as fh:
        fh.write(f"# grid {mu_range[0]:.17g} {mu_range[1]:.17g} "
                 f"{nu_range[0]:.17g} {nu_range[1]:.17g} {n_mu} {n_nu} "
                 f"chart={chart} zeta={zeta:.17g} time=0\n")
        for i in range(n_mu):
            for j in range(n_nu):
                fh.write(f"{i},{j},{mu[i]:.17g},{nu[j]:.17g},"
                         f"{values[i, j]:.17g}\n")


@pytest.fixture(scope="module")
def equilibrium_snapshots(tmp_path_factory):
    """Fields emitted by the simulation CLI for both reference flows."""
    base = tmp_path_factory.mktemp("snaps")
    out_a = os.path.join(base, "zonal")
    out_b = os.path.join(base, "tilted")
    run_cli(["surfvort", "equilibrium", "sphere", "--B0", "1", "--A1", "0",
             "--B1", "0", "--R", "1", "--Nmu", "48", "--Nnu", "96",
             "--output", out_a])
    run_cli(["surfvort", "equilibrium", "sphere", "--B0", "0", "--A1", "1",
             "--B1", "1", "--R", "1", "--Nmu", "48", "--Nnu", "96",
             "--output", out_b])
    geo_out = os.path.join(base, "torus")
    run_cli(["surfvort", "geometry", "--chart", "torus", "--r0", "2",
             "--T", "0.25", "--Nmu", "48", "--Nnu", "48",
             "--output", geo_out])
    return {"zonal": out_a, "tilted": out_b, "torus": geo_out}


def test_renders_equilibrium_figures(equilibrium_snapshots, tmp_path):
    # the four flow panels: |u| and omega for both parameter sets
    for label in ("zonal", "tilted"):
        for field in ("speed", "omega"):
            src = os.path.join(equilibrium_snapshots[label], f"{field}.csv")
            dst = os.path.join(tmp_path, f"{label}_{field}.png")
            proc = subprocess.run(["plots", src, "-o", dst],
                                  capture_output=True, text=True)
            assert proc.returncode == 0, proc.stderr
            assert os.path.getsize(dst) > 1000


def test_zonal_speed_is_phi_banded(equilibrium_snapshots):
    meta, speed = read_snapshot(
        os.path.join(equilibrium_snapshots["zonal"], "speed.csv"))
    assert np.abs(speed - speed[:, :1]).max() < 1e-12
    assert np.abs(speed[:, 0] - 0.5 * np.sin(meta["mu"])).max() < 1e-10


def test_torus_ricci_contour_and_sign_structure(equilibrium_snapshots,
                                                tmp_path):
    src = os.path.join(equilibrium_snapshots["torus"], "ricci.csv")
    dst = os.path.join(tmp_path, "ricci.png")
    proc = subprocess.run(["plots", src, "-o", dst, "--vmin", "-3",
                           "--vmax", "3"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert os.path.getsize(dst) > 1000
    meta, ricci = read_snapshot(src)
    vt = meta["nu"]
    outer = np.abs(np.cos(vt)) > 0.2
    assert (np.sign(ricci[:, outer]) == np.sign(np.cos(vt))[None, outer]).all()
    near_quarter = np.abs(np.cos(vt)) < 0.05
    if near_quarter.any():
        assert np.abs(ricci[:, near_quarter]).max() < 0.3


def test_surface3d_rendering(equilibrium_snapshots, tmp_path):
    src = os.path.join(equilibrium_snapshots["tilted"], "omega.csv")
    dst = os.path.join(tmp_path, "omega3d.png")
    proc = subprocess.run(["plots", src, "-o", dst, "--surface3d"],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert os.path.getsize(dst) > 1000


def test_uniform_field_renders(tmp_path):
    src = os.path.join(tmp_path, "flat.csv")
    write_snapshot(src, np.zeros((16, 16)))
    dst = os.path.join(tmp_path, "flat.png")
    assert render(src, dst) == dst
    assert os.path.getsize(dst) > 1000


def test_malformed_header_exits_nonzero(tmp_path):
    src = os.path.join(tmp_path, "bad.csv")
    with open(src, "w") as fh:
        fh.write("garbage\n1,2,3\n")
    proc = subprocess.run(["plots", src, "-o", os.path.join(tmp_path, "x.png")],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "snapshot" in proc.stderr


def test_row_count_mismatch_raises(tmp_path):
    src = os.path.join(tmp_path, "short.csv")
    write_snapshot(src, np.ones((8, 8)))
    lines = open(src).read().splitlines()
    with open(src, "w") as fh:
        fh.write("\n".join(lines[:-5]) + "\n")
    with pytest.raises(SnapshotFormatError):
        read_snapshot(src)


def test_renderer_is_read_only(tmp_path):
    src = os.path.join(tmp_path, "field.csv")
    rng = np.random.default_rng(0)
    write_snapshot(src, rng.normal(size=(16, 16)))
    before = open(src, "rb").read()
    render(src, os.path.join(tmp_path, "field.png"))
    assert open(src, "rb").read() == before


def test_vmin_vmax_flags(tmp_path):
    src = os.path.join(tmp_path, "field.csv")
    write_snapshot(src, np.linspace(-2, 2, 256).reshape(16, 16))
    dst = os.path.join(tmp_path, "clip.png")
    proc = subprocess.run(["plots", src, "-o", dst, "--vmin", "-1",
                           "--vmax", "1"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert os.path.getsize(dst) > 1000
