"""Surface differential operators: the normal Laplacian, its inverse
(Poisson solve), the curvature diffusion operator, and the restricted
3-D Laplacian diffusion under a separable zeta-ansatz.

The normal Laplacian is discretized in flux form,

    Lap f = J * [ d_mu( J (g_nunu f_mu - g_munu f_nu) )
                + d_nu( J (g_mumu f_nu - g_munu f_mu) ) ],

with the grid's spectral stencils, so the discrete operator is self-adjoint
under the surface measure dmu dnu / J and negative semidefinite with the
constants as nullspace.

Two inversion paths are provided.  For charts whose coefficients are uniform
along one periodic grid axis (all built-ins), the operator block-diagonalizes
over the Fourier modes of that axis; the blocks are assembled from the actual
discrete operator, symmetrized in the quadrature inner product, and
LU-factorized once, giving machine-residual solves.  A Jacobi-preconditioned
conjugate-gradient fallback covers general charts.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


from .grid import PeriodicGrid2D, ScalarField, quadrature_weights


class NonOrthogonalChartError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


class GeometryCache:
    """Per-node samples of the metric quantities needed by the operators.

    All fields are evaluated once from the chart's analytic callbacks on the
    zeta0 surface.  The cache also owns the lazily built Poisson solver
    factorization.
    """

    def __init__(self, chart, grid: PeriodicGrid2D):
        self.chart = chart
        self.grid = grid
        MU, NU, z0 = grid.MU, grid.NU, chart.zeta0
        gcov = chart.metric_cov(MU, NU, z0)
        self.g_mumu = gcov[..., 0, 0]
        self.g_nunu = gcov[..., 1, 1]
        self.g_munu = gcov[..., 0, 1]
        self.J = chart.jacobian(MU, NU, z0)
        gcon = chart.metric_con(MU, NU, z0)
        self.g_zz = gcon[..., 2, 2]
        self.sqrt_gzz = np.sqrt(self.g_zz)
        self.ricci = chart.ricci_scalar_field(MU, NU, z0)
        self.gamma = gcov[..., :2, :2]
        self.gamma_inv = chart.induced_metric_inv(MU, NU, z0)
        self.sqrt_gamma = chart.sqrt_det_gamma(MU, NU, z0)
        dgzz = chart.g_zz_grad(MU, NU, z0)
        self.dgzz_mu = dgzz[..., 0]
        self.dgzz_nu = dgzz[..., 1]
        # flux coefficients of the normal Laplacian
        self.fA = self.J * self.g_nunu
        self.fB = self.J * self.g_mumu
        self.fC = self.J * self.g_munu
        self.quad_weights = quadrature_weights(grid, chart)
        self.area = float(np.sum(self.quad_weights))
        self._solver = None
        self._jacobi_diag = None

    def integral(self, values) -> float:
        return float(np.sum(values * self.quad_weights))

    def mean(self, values) -> float:
        return self.integral(values) / self.area

    def advection_factor(self, convention: str):
        """Bracket prefactor: J (euclidean_J) or 1/sqrt|gamma| (riemannian)."""
        if convention == "euclidean_J":
            return self.J
        if convention == "riemannian_sqrtg":
            return self.J / self.sqrt_gzz
        raise ValueError(f"unknown advection convention {convention!r}")

    # -- discrete normal Laplacian -------------------------------------------

    def apply_laplacian(self, values: np.ndarray) -> np.ndarray:
        g = self.grid
        fmu = g.d_mu(values)
        fnu = g.d_nu(values)
        flux_mu = self.fA * fmu - self.fC * fnu
        flux_nu = self.fB * fnu - self.fC * fmu
        return self.J * (g.d_mu(flux_mu) + g.d_nu(flux_nu))

    # -- solver assembly -------------------------------------------------------

    def _uniform_axis(self):
        """Axis along which all operator coefficients are constant, or None."""
        for axis in (1, 0):
            ok = True
            for arr in (self.fA, self.fB, self.fC, self.J):
                ref = arr.take([0], axis=axis)
                if not np.allclose(arr, ref, rtol=1e-13, atol=1e-13 * np.abs(arr).max() if np.abs(arr).max() else 1e-13):
                    ok = False
                    break
            if ok:
                return axis
        return None

    def _build_solver(self):
        axis = self._uniform_axis()
        if axis is None:
            return None
        g = self.grid
        n_block = g.Nmu if axis == 1 else g.Nnu     # block dimension
        n_modes = g.Nnu if axis == 1 else g.Nmu
        # kernel from delta fields: coefficients are uniform along `axis`, so
        # one delta per block row gives every mode's column after an FFT
        kern = np.empty((n_block, n_block, n_modes))
        for i0 in range(n_block):
            delta = np.zeros(g.shape())
            if axis == 1:
                delta[i0, 0] = 1.0
            else:
                delta[0, i0] = 1.0
            out = self.apply_laplacian(delta)
            kern[:, i0, :] = out if axis == 1 else out.T
        blocks = np.fft.fft(kern, axis=2)           # [i, i0, m]
        wrow = (self.quad_weights[:, 0] if axis == 1
                else self.quad_weights[0, :])
        # Mean-mode block: the nullspace holds the constants plus one spurious
        # profile.  On periodic grids that second profile is the exact Nyquist
        # sawtooth and the min-norm pseudo-inverse already lands in the smooth
        # gauge; on pole grids it is the (non-band-limited) point-vortex
        # harmonic, so the block is restricted to the dealias band first.
        if self.grid.pole_rule == "sphere-offset" and axis == 1:
            T0 = self._profile_truncation(axis)
            L0 = T0 @ blocks[:, :, 0].real @ T0
            pinv0 = T0 @ np.linalg.pinv(L0, rcond=1e-9) @ T0
        else:
            pinv0 = np.linalg.pinv(blocks[:, :, 0].real, rcond=1e-10)
        # inverses of the real-FFT mode blocks 1 .. n_modes/2 - 1, stacked for
        # batched application; the Nyquist mode carries no derivative
        # information and is zeroed
        half = n_modes // 2
        stack = np.ascontiguousarray(np.moveaxis(blocks[:, :, 1:half], 2, 0))
        inv_stack = np.linalg.inv(stack)
        return {"axis": axis, "inv": inv_stack, "pinv0": pinv0, "wrow": wrow,
                "n_modes": n_modes}

    def _profile_truncation(self, axis, parity=1):
        """Dealias-band projector for single-axis profiles.

        On pole grids `parity` is the (-1)^m sign the profile's phi-mode picks
        up under the across-pole continuation."""
        g = self.grid
        if axis == 1:       # profiles along mu
            n = g.Nmu
            if g.pole_rule == "sphere-offset":
                kmax = g.dealias_kmu
                T = np.empty((n, n))
                for i in range(n):
                    p = np.zeros(n)
                    p[i] = 1.0
                    ext = np.concatenate([p, parity * p[::-1]])
                    fh = np.fft.fft(ext)
                    fh[np.abs(np.fft.fftfreq(2 * n, 1.0 / (2 * n))) > kmax] = 0.0
                    T[:, i] = np.fft.ifft(fh).real[:n]
                return T
            kmax = g.dealias_kmu
        else:               # profiles along nu
            n = g.Nnu
            kmax = g.dealias_knu
        freqs = np.abs(np.fft.fftfreq(n, 1.0 / n))
        mask = freqs <= kmax
        F = np.fft.fft(np.eye(n), axis=0)
        return (np.fft.ifft(F * mask[:, None], axis=0).real).T

    def solver(self):
        if self._solver is None:
            self._solver = self._build_solver()
        return self._solver

    def jacobi_diagonal(self, n_probe=64, seed=0):
        """Estimated diag of the Laplacian via Rademacher probing."""
        if self._jacobi_diag is None:
            rng = np.random.default_rng(seed)
            acc = np.zeros(self.grid.shape())
            for _ in range(n_probe):
                z = rng.choice([-1.0, 1.0], size=self.grid.shape())
                acc += z * self.apply_laplacian(z)
            d = acc / n_probe
            scale = np.abs(d).max()
            d = np.where(np.abs(d) < 1e-3 * scale, -1e-3 * scale, d)
            self._jacobi_diag = np.where(d > 0, -d, d)
        return self._jacobi_diag


def normal_laplacian(psi: ScalarField, cache: GeometryCache) -> ScalarField:
    """Normal Laplacian of the stream function; omega^zeta = -lap(psi)."""
    if psi.grid is not cache.grid:
        raise ValueError("field and cache grids differ")
    return ScalarField(psi.grid, cache.apply_laplacian(psi.values))


def vorticity_from_stream(psi: ScalarField, cache: GeometryCache) -> ScalarField:
    out = normal_laplacian(psi, cache)
    out.values *= -1.0
    return out


def poisson_solve(omega: ScalarField, cache: GeometryCache, method="auto",
                  rtol=1e-10, max_iter=None) -> ScalarField:
    """Solve lap(psi) = -omega for the zero-mean stream function.

    The mean of omega (against dmu dnu / J) is projected out first: on a
    closed surface the constant component of the vorticity is outside the
    operator's range.  method "direct" uses the Fourier-block factorization,
    "cg" the preconditioned conjugate gradient; "auto" prefers direct when
    the chart allows it.
    """
    if omega.grid is not cache.grid:
        raise ValueError("field and cache grids differ")
    b = -(omega.values - cache.mean(omega.values))
    if method == "auto":
        method = "direct" if cache.solver() is not None else "cg"
    if method == "direct":
        sol = cache.solver()
        if sol is None:
            raise SolverError("no uniform coefficient axis; use method='cg'")
        psi = _solve_direct(b, sol)
    elif method == "cg":
        psi = _solve_cg(b, cache, rtol=rtol, max_iter=max_iter)
    else:
        raise ValueError(f"unknown method {method!r}")
    psi -= cache.mean(psi)
    return ScalarField(omega.grid, psi)


def _solve_direct(b, sol, adjoint=False):
    axis = sol["axis"]
    work = b if axis == 1 else b.T
    n_modes = sol["n_modes"]
    half = n_modes // 2
    rhs = np.fft.rfft(work, axis=1)                 # [block_row, mode 0..half]
    out = np.zeros_like(rhs)
    p0 = sol["pinv0"].T if adjoint else sol["pinv0"]
    out[:, 0] = p0 @ rhs[:, 0].real
    inv = sol["inv"]
    if adjoint:
        inv = inv.conj().transpose(0, 2, 1)
    sols = inv @ np.moveaxis(rhs[:, 1:half], 1, 0)[..., None]
    out[:, 1:half] = np.moveaxis(sols[..., 0], 0, 1)
    psi = np.fft.irfft(out, n=n_modes, axis=1)
    return psi if axis == 1 else psi.T


def poisson_solve_adjoint(omega: ScalarField, cache: GeometryCache) -> ScalarField:
    """Adjoint of the solve map in the quadrature inner product.

    The discrete solve S is self-adjoint under dmu dnu / J only to spectral
    accuracy; the energy-exact tendency projection in the dynamics needs
    S* = W^-1 S^T W exactly, which per Fourier block is the conjugate
    transposed solve."""
    sol = cache.solver()
    if sol is None:
        # CG path: the flux-form operator is exactly self-adjoint on fully
        # periodic grids, so S* = S there
        return poisson_solve(omega, cache, method="cg")
    w = cache.quad_weights
    b = -(omega.values - cache.mean(omega.values))
    psi = _solve_direct(b * w, sol, adjoint=True) / w
    psi -= cache.mean(psi)
    return ScalarField(omega.grid, psi)


def _strip_nyquist(values, grid):
    """Zero both Nyquist bins; their derivatives vanish identically, so they
    carry no information and would float freely through the solve."""
    fh = np.fft.fft(values, axis=1)
    fh[:, grid.Nnu // 2] = 0.0
    values = np.fft.ifft(fh, axis=1).real
    if grid.pole_rule == "sphere-offset":
        ext = grid._dfs_extend(values)
        fh = np.fft.fft(ext, axis=0)
        fh[grid.Nmu] = 0.0
        values = np.fft.ifft(fh, axis=0).real[: grid.Nmu]
    else:
        fh = np.fft.fft(values, axis=0)
        fh[grid.Nmu // 2] = 0.0
        values = np.fft.ifft(fh, axis=0).real
    return values


def _solve_cg(b, cache: GeometryCache, rtol=1e-10, max_iter=None):
    w = cache.quad_weights
    area = cache.area
    grid = cache.grid

    def project(v):
        v = _strip_nyquist(v, grid)
        return v - np.sum(v * w) / area

    def dot(u, v):
        return float(np.sum(u * v * w))

    b = project(b)
    bnorm = np.sqrt(dot(b, b))
    if bnorm == 0.0:
        return np.zeros_like(b)
    n = b.size
    max_iter = 10 * n if max_iter is None else max_iter
    diag = cache.jacobi_diagonal()
    x = np.zeros_like(b)
    r = b.copy()
    z = project(r / diag)
    p = z.copy()
    rz = dot(r, z)
    for it in range(max_iter):
        Ap = project(cache.apply_laplacian(p))
        alpha = rz / dot(p, Ap)
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.sqrt(dot(r, r))
        if rnorm <= rtol * bnorm:
            return x
        z = project(r / diag)
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(f"CG stalled after {max_iter} iterations; "
                      f"final relative residual {rnorm / bnorm:.3e}")


# -- curvature diffusion --------------------------------------------------------

def flat_surface_diffusion(omega: ScalarField, cache: GeometryCache) -> ScalarField:
    """The flat-surface part: D_Sigma w = (1/g^zz)[lap w - grad g^zz . grad_perp w],
    acting on w = omega / sqrt(g^zz)."""
    g = cache.grid
    w = omega.values / cache.sqrt_gzz
    lap = cache.apply_laplacian(w)
    w_mu = g.d_mu(w)
    w_nu = g.d_nu(w)
    # tangential gradient of w, index raised with the induced metric
    grad_mu = cache.gamma_inv[..., 0, 0] * w_mu + cache.gamma_inv[..., 0, 1] * w_nu
    grad_nu = cache.gamma_inv[..., 1, 0] * w_mu + cache.gamma_inv[..., 1, 1] * w_nu
    cross = cache.dgzz_mu * grad_mu + cache.dgzz_nu * grad_nu
    return ScalarField(g, (lap - cross) / cache.g_zz)


def curvature_diffusion(omega: ScalarField, cache: GeometryCache) -> ScalarField:
    """Full curvature-consistent diffusion term: D_Sigma omega + (R/sqrt g^zz) omega."""
    out = flat_surface_diffusion(omega, cache)
    out.values += cache.ricci / cache.sqrt_gzz * omega.values
    return out


def dissipation_functional_vorticity(omega: ScalarField, cache: GeometryCache) -> float:
    """Energy dissipation functional of the curvature operator:
    (1/2) int [ |grad_perp w|^2 - R w^2 ] dmu dnu / J, w = omega/sqrt(g^zz)."""
    g = cache.grid
    w = omega.values / cache.sqrt_gzz
    w_mu = g.d_mu(w)
    w_nu = g.d_nu(w)
    grad2 = (cache.gamma_inv[..., 0, 0] * w_mu**2
             + 2 * cache.gamma_inv[..., 0, 1] * w_mu * w_nu
             + cache.gamma_inv[..., 1, 1] * w_nu**2)
    return 0.5 * cache.integral(grad2 - cache.ricci * w * w)


# -- restricted Laplacian under the separable ansatz ----------------------------

@dataclass
class ZetaProfile:
    """Analytic zeta profile h with first and second derivatives."""

    h: Callable[[float], float]
    dh: Callable[[float], float]
    d2h: Callable[[float], float]

    @classmethod
    def constant(cls, value=1.0):
        return cls(lambda z: value, lambda z: 0.0, lambda z: 0.0)

    @classmethod
    def quadratic(cls):
        """h(zeta) = zeta^2, the sphere convention Psi = R^2 xi."""
        return cls(lambda z: z * z, lambda z: 2.0 * z, lambda z: 2.0)

    def at(self, zeta):
        return float(self.h(zeta)), float(self.dh(zeta)), float(self.d2h(zeta))


def restricted_laplacian_diffusion(psi: ScalarField, h: ZetaProfile,
                                   cache: GeometryCache, chart=None) -> ScalarField:
    """Diffusion term of the 3-D Laplacian route under Psi = h(zeta) psi(mu, nu).

    Returns Delta(omega).grad(zeta) = -D Psi + lap(omega^zeta / g^zz), where
    D is the fourth-order operator whose zeta-derivatives are evaluated
    analytically through h and the chart metric.  Orthogonal charts only.
    """
    chart = cache.chart if chart is None else chart
    if not chart.orthogonal:
        raise NonOrthogonalChartError(
            f"chart {chart.name!r} is not orthogonal; the restricted "
            "Laplacian ansatz is defined for orthogonal charts only")
    g = cache.grid
    MU, NU, z0 = g.MU, g.NU, chart.zeta0
    h0, h1, h2 = h.at(z0)
    A = chart._fn("fluxA")(MU, NU, z0)
    B = chart._fn("fluxB")(MU, NU, z0)
    A_z = chart._fn("fluxA_z")(MU, NU, z0)
    A_zz = chart._fn("fluxA_zz")(MU, NU, z0)
    B_z = chart._fn("fluxB_z")(MU, NU, z0)
    B_zz = chart._fn("fluxB_zz")(MU, NU, z0)
    # c1 = A * d_z(B d_z(A h)), c2 = B * d_z(A d_z(B h)), at zeta0
    c1 = A * (B_z * (A_z * h0 + A * h1)
              + B * (A_zz * h0 + 2 * A_z * h1 + A * h2))
    c2 = B * (A_z * (B_z * h0 + B * h1)
              + A * (B_zz * h0 + 2 * B_z * h1 + B * h2))
    psi_mu = g.d_mu(psi.values)
    psi_nu = g.d_nu(psi.values)
    dpsi_op = cache.J * (g.d_mu(c1 * psi_mu) + g.d_nu(c2 * psi_nu))
    omega = -h0 * cache.apply_laplacian(psi.values)
    lap_part = cache.apply_laplacian(omega / cache.g_zz)
    return ScalarField(g, -dpsi_op + lap_part)
