"""Killing-field-based diffusion on the induced 2-D metric: strain tensor,
the energy dissipation functional

    U = (1/4) int K_ij gamma^ik gamma^jl K_kl sqrt|gamma| dmu dnu,

its negative functional gradient (the diffusion operator acting on tangent
fields), and the unit-sphere projected Laplacian used as the consistency
oracle.

Tangent fields carry contravariant components on the surface grid.  On
sphere grids the theta component changes sign under the across-pole
continuation; the component parities are tracked so that derivatives stay
spectrally accurate through the poles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import PeriodicGrid2D, ScalarField
from .operators import GeometryCache


class ChartError(ValueError):
    pass


@dataclass
class TangentField:
    """Contravariant components (u^mu, u^nu) on the surface grid."""

    grid: PeriodicGrid2D
    u_mu: np.ndarray
    u_nu: np.ndarray

    def __post_init__(self):
        self.u_mu = np.asarray(self.u_mu, dtype=float)
        self.u_nu = np.asarray(self.u_nu, dtype=float)

    @property
    def parities(self):
        if self.grid.pole_rule == "sphere-offset":
            return (-1, +1)
        return (+1, +1)


def from_stream(psi: ScalarField, cache: GeometryCache) -> TangentField:
    """Divergence-free field u = (psi_nu d_mu - psi_mu d_nu)/sqrt|gamma|."""
    g = psi.grid
    sq = cache.sqrt_gamma
    return TangentField(g, g.d_nu(psi.values) / sq, -g.d_mu(psi.values) / sq)


def _curvature_fields(cache: GeometryCache):
    """Per-node induced Christoffel (both kinds), Ricci and chi tensors."""
    if not hasattr(cache, "_riemann_fields"):
        chart, grid = cache.chart, cache.grid
        cur = chart.curvature(grid.MU, grid.NU, chart.zeta0)
        cache._riemann_fields = (cur["Gamma2"], cur["Gamma1"], cur["ricci"],
                                 cur["chi"])
    return cache._riemann_fields


def component_gradients(u: TangentField, cache: GeometryCache):
    """du[k, l] = d u^l / d x^k as per-node 2x2 arrays."""
    g = u.grid
    pm, pn = u.parities
    du = np.empty(g.shape() + (2, 2))
    du[..., 0, 0] = g.d_mu(u.u_mu, parity=pm)
    du[..., 0, 1] = g.d_mu(u.u_nu, parity=pn)
    du[..., 1, 0] = g.d_nu(u.u_mu)
    du[..., 1, 1] = g.d_nu(u.u_nu)
    return du


def strain_tensor(u: TangentField, cache: GeometryCache) -> np.ndarray:
    """K_ij = gamma_jk (d_i u^k + u^p Gamma^k_ip) + (i <-> j)."""
    G2, _, _, _ = _curvature_fields(cache)
    du = component_gradients(u, cache)
    uvec = np.stack([u.u_mu, u.u_nu], axis=-1)
    # nabla[i, k] = d_i u^k + u^p Gamma^k_ip
    nabla = du + np.einsum("...p,...kip->...ik", uvec, G2)
    K = (np.einsum("...jk,...ik->...ij", cache.gamma, nabla)
         + np.einsum("...ik,...jk->...ij", cache.gamma, nabla))
    return K


def dissipation_functional(u: TangentField, cache: GeometryCache) -> float:
    """U = (1/4) int K_ij gamma^ik gamma^jl K_kl sqrt|gamma| dmu dnu."""
    K = strain_tensor(u, cache)
    Kup = np.einsum("...ik,...jl,...kl->...ij", cache.gamma_inv,
                    cache.gamma_inv, K)
    dens = np.einsum("...ij,...ij->...", K, Kup)
    w = cache.quad_weights * cache.sqrt_gzz   # = sqrt|gamma| dmu dnu
    return float(0.25 * np.sum(dens * w))


def component_laplacian(values: np.ndarray, cache: GeometryCache, parity=1):
    """Scalar Laplace-Beltrami of one covariant component field."""
    g = cache.grid
    sq = cache.sqrt_gamma
    f_mu = g.d_mu(values, parity=parity)
    f_nu = g.d_nu(values)
    flux_mu = sq * (cache.gamma_inv[..., 0, 0] * f_mu
                    + cache.gamma_inv[..., 0, 1] * f_nu)
    flux_nu = sq * (cache.gamma_inv[..., 1, 0] * f_mu
                    + cache.gamma_inv[..., 1, 1] * f_nu)
    return (g.d_mu(flux_mu, parity=parity) + g.d_nu(flux_nu)) / sq


def killing_diffusion_operator(u: TangentField, cache: GeometryCache) -> TangentField:
    """-dU/du with the index raised: the tangent-field diffusion operator.

    dU/du^m = -lap_M u_m - (2 R_lm - chi_lm) u^l + 2 (d_k u^l) gamma^ik Gamma_lim.
    """
    _, G1, ricci, chi = _curvature_fields(cache)
    du = component_gradients(u, cache)
    uvec = np.stack([u.u_mu, u.u_nu], axis=-1)
    ucov = np.einsum("...mc,...c->...m", cache.gamma, uvec)
    pm, pn = u.parities
    lap = np.stack([component_laplacian(ucov[..., 0], cache, parity=pm),
                    component_laplacian(ucov[..., 1], cache, parity=pn)],
                   axis=-1)
    curv = np.einsum("...lm,...l->...m", 2.0 * ricci - chi, uvec)
    grad_term = 2.0 * np.einsum("...kl,...ik,...lim->...m", du,
                                cache.gamma_inv, G1)
    out_cov = lap + curv - grad_term        # = -dU/du^m
    out = np.einsum("...pm,...m->...p", cache.gamma_inv, out_cov)
    return TangentField(u.grid, out[..., 0], out[..., 1])


def divergence(u: TangentField, cache: GeometryCache) -> np.ndarray:
    g = u.grid
    pm, _ = u.parities
    sq = cache.sqrt_gamma
    return (g.d_mu(sq * u.u_mu, parity=-pm) + g.d_nu(sq * u.u_nu)) / sq


def sphere_projected_laplacian(u: TangentField, cache: GeometryCache) -> TangentField:
    """Projection of the R^3 vector Laplacian onto the unit sphere,
    evaluated through its displayed covariant components."""
    if cache.chart.name != "sphere" or abs(cache.chart.zeta0 - 1.0) > 1e-12:
        raise ChartError("the projected Laplacian oracle is specific to the "
                         "unit sphere chart")
    g = u.grid
    th = g.MU
    cot = np.cos(th) / np.sin(th)
    u_th = u.u_mu                       # gamma_thth = 1 on the unit sphere
    u_ph = np.sin(th) ** 2 * u.u_nu
    pm, pn = u.parities
    lap_th = component_laplacian(u_th, cache, parity=pm)
    lap_ph = component_laplacian(u_ph, cache, parity=pn)
    du_th_dth = g.d_mu(u_th, parity=pm)
    du_ph_dth = g.d_mu(u_ph, parity=pn)
    du_th_dph = g.d_nu(u_th)
    out_th = (lap_th + 2.0 * u_th + u_th * (cot ** 2 - 1.0)
              + 2.0 * cot * du_th_dth)
    out_ph = (lap_ph + 2.0 * u_ph + 2.0 * cot * (du_th_dph - du_ph_dth))
    return TangentField(g, out_th, out_ph / np.sin(th) ** 2)


def tangent_inner(u: TangentField, v: TangentField, cache: GeometryCache) -> float:
    """<u, v> = int gamma_ab u^a v^b sqrt|gamma| dmu dnu."""
    uu = np.stack([u.u_mu, u.u_nu], axis=-1)
    vv = np.stack([v.u_mu, v.u_nu], axis=-1)
    dens = np.einsum("...ab,...a,...b->...", cache.gamma, uu, vv)
    w = cache.quad_weights * cache.sqrt_gzz
    return float(np.sum(dens * w))
