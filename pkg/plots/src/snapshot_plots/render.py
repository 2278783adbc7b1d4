"""Render surfvort CSV field snapshots as filled contour figures.

Reads the snapshot format emitted by the simulation CLI:

    # grid mu_min mu_max nu_min nu_max Nmu Nnu chart=<name> zeta=<v> time=<t>
    i,j,mu,nu,value
    ...

and writes a raster image of filled contours over (mu, nu), or over the
embedded surface with --surface3d for the built-in sphere and torus charts.
Color limits are auto-derived from the data unless --vmin/--vmax are given.
The renderer never modifies its inputs.
"""

from __future__ import annotations

import argparse
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


class SnapshotFormatError(ValueError):
    pass


def read_snapshot(path):
    """Parse a snapshot file into (meta dict, Nmu x Nnu value array)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# grid "):
            raise SnapshotFormatError(f"{path}: missing snapshot header")
        parts = header[len("# grid "):].split()
        if len(parts) != 9:
            raise SnapshotFormatError(f"{path}: malformed snapshot header")
        meta = {
            "mu_min": float(parts[0]), "mu_max": float(parts[1]),
            "nu_min": float(parts[2]), "nu_max": float(parts[3]),
            "Nmu": int(parts[4]), "Nnu": int(parts[5]),
        }
        for tok in parts[6:]:
            key, _, val = tok.partition("=")
            meta[key] = val if key == "chart" else float(val)
        n_mu, n_nu = meta["Nmu"], meta["Nnu"]
        values = np.empty((n_mu, n_nu))
        mu = np.empty(n_mu)
        nu = np.empty(n_nu)
        count = 0
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                i_s, j_s, mu_s, nu_s, v_s = line.split(",")
                i, j = int(i_s), int(j_s)
                values[i, j] = float(v_s)
                mu[i] = float(mu_s)
                nu[j] = float(nu_s)
            except (ValueError, IndexError) as exc:
                raise SnapshotFormatError(f"{path}: bad row {line!r}") from exc
            count += 1
        if count != n_mu * n_nu:
            raise SnapshotFormatError(
                f"{path}: expected {n_mu * n_nu} rows, found {count}")
    meta["mu"] = mu
    meta["nu"] = nu
    return meta, values


def _embedding(meta):
    """(x, y, z) node positions for the built-in charts, for --surface3d."""
    chart = meta.get("chart", "")
    mu, nu = np.meshgrid(meta["mu"], meta["nu"], indexing="ij")
    zeta = meta.get("zeta", 1.0)
    if chart == "sphere":
        R = zeta
        return (R * np.sin(mu) * np.cos(nu), R * np.sin(mu) * np.sin(nu),
                R * np.cos(mu))
    if chart == "torus":
        # mu = toroidal angle, nu = poloidal angle, zeta = minor radius;
        # the major radius is recovered from the mean generating circle
        s = zeta
        # r0 is not stored in the snapshot; default to 2x minor radius ratio
        r0 = meta.get("r0", 2.0)
        r = r0 + s * np.cos(nu)
        return (r * np.cos(mu), r * np.sin(mu), s * np.sin(nu))
    raise SnapshotFormatError(
        f"no embedding available for chart {chart!r}; drop --surface3d")


def render(path, out_path, vmin=None, vmax=None, surface3d=False, title=None):
    """Render one snapshot to an image file; returns the output path."""
    meta, values = read_snapshot(path)
    if vmin is None:
        vmin = float(values.min())
    if vmax is None:
        vmax = float(values.max())
    if vmax - vmin < 1e-300:        # uniform field: pad the range
        pad = max(1e-12, abs(vmax) * 1e-6 + 1e-12)
        vmin, vmax = vmin - pad, vmax + pad
    levels = np.linspace(vmin, vmax, 41)
    clipped = np.clip(values, vmin, vmax)
    if surface3d:
        fig = plt.figure(figsize=(7, 6))
        ax = fig.add_subplot(projection="3d")
        x, y, z = _embedding(meta)
        # close the periodic seam for a watertight surface
        x = np.concatenate([x, x[:, :1]], axis=1)
        y = np.concatenate([y, y[:, :1]], axis=1)
        z = np.concatenate([z, z[:, :1]], axis=1)
        c = np.concatenate([clipped, clipped[:, :1]], axis=1)
        norm = plt.Normalize(vmin=vmin, vmax=vmax)
        colors = plt.cm.RdBu_r(norm(c))
        surf = ax.plot_surface(x, y, z, facecolors=colors, rstride=1,
                               cstride=1, linewidth=0, antialiased=False,
                               shade=False)
        mappable = plt.cm.ScalarMappable(norm=norm, cmap="RdBu_r")
        mappable.set_array(c)
        fig.colorbar(mappable, ax=ax, shrink=0.7)
        ax.set_box_aspect((np.ptp(x), np.ptp(y), max(np.ptp(z), 1e-3)))
        ax.set_axis_off()
    else:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        cs = ax.contourf(meta["nu"], meta["mu"], clipped, levels=levels,
                         cmap="RdBu_r", extend="both")
        fig.colorbar(cs, ax=ax)
        ax.set_xlabel("nu")
        ax.set_ylabel("mu")
    chart = meta.get("chart", "?")
    t = meta.get("time", 0.0)
    ax.set_title(title or f"{chart}  t = {t:g}")
    fig.tight_layout()
    fig.savefig(out_path, dpi=130)
    plt.close(fig)
    return out_path


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="plots", description="render a field snapshot CSV as contours")
    parser.add_argument("snapshot", help="snapshot CSV path")
    parser.add_argument("-o", "--output", required=True, help="image path")
    parser.add_argument("--vmin", type=float, default=None)
    parser.add_argument("--vmax", type=float, default=None)
    parser.add_argument("--surface3d", action="store_true",
                        help="render on the embedded surface")
    parser.add_argument("--title", default=None)
    args = parser.parse_args(argv)
    try:
        render(args.snapshot, args.output, vmin=args.vmin, vmax=args.vmax,
               surface3d=args.surface3d, title=args.title)
    except (SnapshotFormatError, OSError) as exc:
        print(f"plots: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
