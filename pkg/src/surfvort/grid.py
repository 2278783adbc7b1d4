"""Structured (mu, nu) grids, spectral derivative stencils, the coordinate
bracket [f, g] = f_mu g_nu - f_nu g_mu, and surface quadrature.

Fully periodic directions use FFT differentiation.  Sphere grids use the
half-offset colatitude nodes theta_j = (j + 1/2) * dtheta with the
across-pole continuation f(-theta, phi) = f(theta, phi + pi); derivatives
are evaluated spectrally on the glide-doubled domain theta in [0, 2*pi).
Vector-type fields pick up a sign under the continuation, controlled by the
`parity` argument.

Quadrature on pole grids replaces the midpoint weight sin(theta_j)*dtheta by
exact cosine-interpolant weights, which integrate smooth surface fields to
rounding (the plain midpoint rule is only O(dtheta^2) against the |sin|
kink of the doubled measure).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    pass


class PeriodicGrid2D:
    """Structured doubly periodic (or pole-handled) grid on (mu, nu).

    pole_rule "sphere-offset" places mu nodes at (j + 1/2)*dmu over (0, pi)
    with no node at either pole; mu is then not periodic itself but closed
    through the across-pole continuation.
    """

    def __init__(self, Nmu, Nnu, mu_range=(0.0, 2 * np.pi),
                 nu_range=(0.0, 2 * np.pi), mu_periodic=True,
                 nu_periodic=True, pole_rule="none"):
        if Nmu < 8 or Nnu < 8 or Nmu % 2 or Nnu % 2:
            raise GridError("Nmu, Nnu must be even and >= 8")
        if pole_rule not in ("none", "sphere-offset"):
            raise GridError(f"unknown pole_rule {pole_rule!r}")
        if pole_rule == "sphere-offset":
            mu_range = (0.0, np.pi)
            mu_periodic = False
            if not nu_periodic:
                raise GridError("sphere-offset grids need periodic nu")
        elif not (mu_periodic and nu_periodic):
            raise GridError("open directions are not supported; use periodic "
                            "ranges or the sphere-offset pole rule")
        self.Nmu, self.Nnu = int(Nmu), int(Nnu)
        self.mu_range = (float(mu_range[0]), float(mu_range[1]))
        self.nu_range = (float(nu_range[0]), float(nu_range[1]))
        self.mu_periodic = mu_periodic
        self.nu_periodic = nu_periodic
        self.pole_rule = pole_rule

        Lmu = self.mu_range[1] - self.mu_range[0]
        Lnu = self.nu_range[1] - self.nu_range[0]
        self.dmu = Lmu / Nmu
        self.dnu = Lnu / Nnu
        if pole_rule == "sphere-offset":
            self.mu = self.mu_range[0] + (np.arange(Nmu) + 0.5) * self.dmu
        else:
            self.mu = self.mu_range[0] + np.arange(Nmu) * self.dmu
        self.nu = self.nu_range[0] + np.arange(Nnu) * self.dnu
        self.MU, self.NU = np.meshgrid(self.mu, self.nu, indexing="ij")

        # FFT wavenumbers; Nyquist derivative zeroed for real fields
        self.k_nu = 2 * np.pi / Lnu * np.fft.fftfreq(Nnu, 1.0 / Nnu)
        self._dk_nu = 1j * self.k_nu.copy()
        self._dk_nu[Nnu // 2] = 0.0
        if pole_rule == "sphere-offset":
            self.k_mu = np.fft.fftfreq(2 * Nmu, 1.0 / (2 * Nmu))  # domain 2*pi
            self._dk_mu = 1j * self.k_mu.copy()
            self._dk_mu[Nmu] = 0.0
        else:
            self.k_mu = 2 * np.pi / Lmu * np.fft.fftfreq(Nmu, 1.0 / Nmu)
            self._dk_mu = 1j * self.k_mu.copy()
            self._dk_mu[Nmu // 2] = 0.0

        # strict 2/3-rule cutoffs (alias-free triple products)
        n_mu_modes = 2 * Nmu if pole_rule == "sphere-offset" else Nmu
        self.dealias_kmu = (n_mu_modes - 1) // 3
        self.dealias_knu = (Nnu - 1) // 3
        self._pole_weights = None

    # -- double-Fourier-sphere helpers --------------------------------------

    def _dfs_extend(self, values, parity=1):
        flipped = values[::-1, :]
        shifted = np.roll(flipped, self.Nnu // 2, axis=1)
        return np.concatenate([values, parity * shifted], axis=0)

    def shape(self):
        return (self.Nmu, self.Nnu)

    # -- derivatives ----------------------------------------------------------

    def d_mu(self, values, parity=1):
        """Spectral d/dmu.  `parity` is the field's sign under the across-pole
        continuation (+1 scalars, -1 theta-vector components); ignored on
        fully periodic grids."""
        values = np.asarray(values, dtype=float)
        if self.pole_rule == "sphere-offset":
            ext = self._dfs_extend(values, parity)
            fh = np.fft.fft(ext, axis=0)
            out = np.fft.ifft(self._dk_mu[:, None] * fh, axis=0).real
            return out[: self.Nmu]
        fh = np.fft.fft(values, axis=0)
        return np.fft.ifft(self._dk_mu[:, None] * fh, axis=0).real

    def d_nu(self, values):
        values = np.asarray(values, dtype=float)
        fh = np.fft.fft(values, axis=1)
        return np.fft.ifft(self._dk_nu[None, :] * fh, axis=1).real

    def truncate(self, values, kmu=None, knu=None, parity=1):
        """Zero all Fourier modes above the dealias cutoffs."""
        kmu = self.dealias_kmu if kmu is None else kmu
        knu = self.dealias_knu if knu is None else knu
        values = np.asarray(values, dtype=float)
        if self.pole_rule == "sphere-offset":
            work = self._dfs_extend(values, parity)
        else:
            work = values
        fh = np.fft.fft2(work)
        mask_mu = np.abs(self.k_mu if self.pole_rule == "sphere-offset"
                         else self.k_mu / (2 * np.pi / (self.mu_range[1] - self.mu_range[0]))) > kmu
        mask_nu = np.abs(self.k_nu / (2 * np.pi / (self.nu_range[1] - self.nu_range[0]))) > knu
        fh[mask_mu, :] = 0.0
        fh[:, mask_nu] = 0.0
        out = np.fft.ifft2(fh).real
        return out[: self.Nmu] if self.pole_rule == "sphere-offset" else out

    # -- pole quadrature weights ---------------------------------------------

    def pole_row_weights(self):
        """Weights W_j with sum_j W_j p(theta_j) = int_0^pi p sin(theta) dtheta,
        exact for even-glide (cosine-series) p up to the grid bandwidth."""
        if self._pole_weights is None:
            N = self.Nmu
            j = np.arange(N)
            theta = (j + 0.5) * np.pi / N
            W = np.full(N, 2.0 / N)
            for k in range(2, N, 2):
                W -= (2.0 / N) * 2.0 * np.cos(k * theta) / (k * k - 1.0)
            self._pole_weights = W
        return self._pole_weights


@dataclass
class ScalarField:
    """Real field on a structured (mu, nu) grid at fixed zeta."""

    grid: PeriodicGrid2D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.shape():
            raise GridError(f"field shape {self.values.shape} != grid "
                            f"{self.grid.shape()}")
        if not np.all(np.isfinite(self.values)):
            raise GridError("field contains non-finite values")

    def copy(self):
        return ScalarField(self.grid, self.values.copy())


def field_from_function(grid: PeriodicGrid2D, fn) -> ScalarField:
    return ScalarField(grid, np.asarray(fn(grid.MU, grid.NU), dtype=float))


def d_mu(f: ScalarField, parity=1) -> ScalarField:
    return ScalarField(f.grid, f.grid.d_mu(f.values, parity=parity))


def d_nu(f: ScalarField) -> ScalarField:
    return ScalarField(f.grid, f.grid.d_nu(f.values))


def bracket(f: ScalarField, g: ScalarField, dealias=False) -> ScalarField:
    """Coordinate bracket [f, g] = f_mu g_nu - f_nu g_mu.

    With dealias=True both inputs are truncated at the grid's 2/3-rule
    cutoffs before differentiation, so the quadratic products are alias-free.
    """
    if f.grid is not g.grid:
        raise GridError("bracket operands must share a grid")
    grid = f.grid
    fv, gv = f.values, g.values
    if dealias:
        fv = grid.truncate(fv)
        gv = grid.truncate(gv)
    out = (grid.d_mu(fv) * grid.d_nu(gv) - grid.d_nu(fv) * grid.d_mu(gv))
    return ScalarField(grid, out)


def quadrature_weights(grid: PeriodicGrid2D, chart) -> np.ndarray:
    """Node weights w with sum(f * w) ~ int f dmu dnu / J over the surface.

    Fully periodic grids use the literal (dmu dnu / J) trapezoid weights,
    which are spectrally exact there.  Sphere-offset grids replace the
    midpoint factor sin(theta_j)*dtheta by the exact pole row weights.
    """
    invJ = 1.0 / chart.jacobian(grid.MU, grid.NU, chart.zeta0)
    w = invJ * grid.dmu * grid.dnu
    if grid.pole_rule == "sphere-offset":
        W = grid.pole_row_weights()
        correction = W / (np.sin(grid.mu) * grid.dmu)
        w = w * correction[:, None]
    return w


def surface_integral(f: ScalarField, chart, weights=None) -> float:
    """Integral of f against the measure dmu dnu / J on the zeta0 surface."""
    w = quadrature_weights(f.grid, chart) if weights is None else weights
    if not np.all(np.isfinite(w)):
        raise GridError("singular Jacobian on the grid")
    return float(np.sum(f.values * w))


# -- snapshot files -----------------------------------------------------------

def write_snapshot(path, field: ScalarField, chart_name, zeta, time):
    """CSV snapshot: header line with grid extents, then rows i,j,mu,nu,value."""
    g = field.grid
    header = (f"# grid {g.mu_range[0]:.17g} {g.mu_range[1]:.17g} "
              f"{g.nu_range[0]:.17g} {g.nu_range[1]:.17g} {g.Nmu} {g.Nnu} "
              f"chart={chart_name} zeta={zeta:.17g} time={time:.17g}")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for i in range(g.Nmu):
            for j in range(g.Nnu):
                fh.write(f"{i},{j},{g.mu[i]:.17g},{g.nu[j]:.17g},"
                         f"{field.values[i, j]:.17g}\n")


def read_snapshot(path):
    """Parse a snapshot file; returns (meta dict, values array)."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("# grid "):
            raise GridError(f"{path}: malformed snapshot header")
        parts = header[len("# grid "):].split()
        if len(parts) != 9:
            raise GridError(f"{path}: malformed snapshot header")
        meta = {
            "mu_min": float(parts[0]), "mu_max": float(parts[1]),
            "nu_min": float(parts[2]), "nu_max": float(parts[3]),
            "Nmu": int(parts[4]), "Nnu": int(parts[5]),
        }
        for tok in parts[6:]:
            key, val = tok.split("=", 1)
            meta[key] = val if key == "chart" else float(val)
        values = np.empty((meta["Nmu"], meta["Nnu"]))
        mu = np.empty(meta["Nmu"])
        nu = np.empty(meta["Nnu"])
        count = 0
        for line in fh:
            i_s, j_s, mu_s, nu_s, v_s = line.split(",")
            i, j = int(i_s), int(j_s)
            values[i, j] = float(v_s)
            mu[i] = float(mu_s)
            nu[j] = float(nu_s)
            count += 1
        if count != meta["Nmu"] * meta["Nnu"]:
            raise GridError(f"{path}: expected {meta['Nmu'] * meta['Nnu']} "
                            f"rows, got {count}")
    meta["mu"] = mu
    meta["nu"] = nu
    return meta, values


def grid_for_chart(chart, Nmu, Nnu) -> PeriodicGrid2D:
    """Grid matching a built-in chart's domain and pole rule."""
    d = chart.domain
    return PeriodicGrid2D(Nmu, Nnu, mu_range=d.mu_range, nu_range=d.nu_range,
                          mu_periodic=d.mu_periodic, nu_periodic=d.nu_periodic,
                          pole_rule=d.pole_rule)
