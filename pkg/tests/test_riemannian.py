import numpy as np
import pytest

from surfvort import geometry as geo
from surfvort import grid as gr
from surfvort import operators as op
from surfvort import riemannian as rie

from conftest import sphere_xyz


def representable_stream(grid, seed=1, n_terms=None):
    """Random stream function whose velocity components stay pole-regular:
    azimuthal modes m = 0 or m >= 2 only (m = +-1 flows have cot(theta)
    component functions, which no componentwise lat-lon discretization can
    represent)."""
    X, Y, Z = sphere_xyz(grid)
    basis = [Z, Z ** 2, Z ** 3, X * X - Y * Y, X * Y, (X * X - Y * Y) * Z,
             X * Y * Z, X ** 3 - 3 * X * Y ** 2, (X * X - Y * Y) * Z * Z]
    rng = np.random.default_rng(seed)
    c = rng.normal(size=len(basis))
    return gr.ScalarField(grid, sum(ci * bi for ci, bi in zip(c, basis)))


# -- strain tensor ------------------------------------------------------------------

def test_sphere_rotation_killing_strain(sphere_cache_small):
    cache = sphere_cache_small
    g = cache.grid
    u = rie.TangentField(g, np.zeros(g.shape()), np.ones(g.shape()))
    assert np.abs(rie.strain_tensor(u, cache)).max() < 1e-12


def test_torus_axial_killing_strain(torus_cache):
    g = torus_cache.grid
    u = rie.TangentField(g, np.ones(g.shape()), np.zeros(g.shape()))
    assert np.abs(rie.strain_tensor(u, torus_cache)).max() < 1e-12


def test_flat_shear_strain(flat_cache):
    # periodic shear u = (sin(2 pi y), 0): K12 = K21 = 2 pi cos(2 pi y)
    g = flat_cache.grid
    u = rie.TangentField(g, np.sin(2 * np.pi * g.NU), np.zeros(g.shape()))
    K = rie.strain_tensor(u, flat_cache)
    expect = 2 * np.pi * np.cos(2 * np.pi * g.NU)
    assert np.abs(K[..., 0, 1] - expect).max() < 1e-10
    assert np.abs(K[..., 1, 0] - expect).max() < 1e-10
    assert np.abs(K[..., 0, 0]).max() < 1e-12
    assert np.abs(K[..., 1, 1]).max() < 1e-12


def test_zero_field_zero_strain(flat_cache):
    g = flat_cache.grid
    u = rie.TangentField(g, np.zeros(g.shape()), np.zeros(g.shape()))
    assert np.abs(rie.strain_tensor(u, flat_cache)).max() == 0.0


# -- dissipation functional ----------------------------------------------------------

def test_flat_shear_dissipation_value(flat_cache):
    # U = (1/4) int 2 (2 pi cos 2 pi y)^2 dx dy = pi^2 on the unit square
    g = flat_cache.grid
    u = rie.TangentField(g, np.sin(2 * np.pi * g.NU), np.zeros(g.shape()))
    assert rie.dissipation_functional(u, flat_cache) == pytest.approx(
        np.pi ** 2, rel=1e-12)


def test_dissipation_nonnegative_and_killing_zero(sphere_cache_small):
    cache = sphere_cache_small
    g = cache.grid
    uk = rie.TangentField(g, np.zeros(g.shape()), np.ones(g.shape()))
    assert rie.dissipation_functional(uk, cache) < 1e-24
    u = rie.from_stream(representable_stream(g, seed=4), cache)
    assert rie.dissipation_functional(u, cache) > 0.0


# -- diffusion operator ---------------------------------------------------------------

def test_flat_operator_is_componentwise_laplacian(flat_cache):
    g = flat_cache.grid
    u = rie.TangentField(g, np.sin(2 * np.pi * g.NU),
                         np.cos(2 * np.pi * g.MU))
    out = rie.killing_diffusion_operator(u, flat_cache)
    assert np.abs(out.u_mu + 4 * np.pi ** 2 * u.u_mu).max() < 1e-10
    assert np.abs(out.u_nu + 4 * np.pi ** 2 * u.u_nu).max() < 1e-10


def test_killing_fields_are_fixed_points(sphere_cache_small, torus_cache):
    g = sphere_cache_small.grid
    uk = rie.TangentField(g, np.zeros(g.shape()), np.ones(g.shape()))
    out = rie.killing_diffusion_operator(uk, sphere_cache_small)
    assert max(np.abs(out.u_mu).max(), np.abs(out.u_nu).max()) < 1e-6
    gt = torus_cache.grid
    ut = rie.TangentField(gt, np.ones(gt.shape()), np.zeros(gt.shape()))
    outt = rie.killing_diffusion_operator(ut, torus_cache)
    assert max(np.abs(outt.u_mu).max(), np.abs(outt.u_nu).max()) < 1e-10


def test_sphere_consistency_with_projected_laplacian(sphere_cache):
    cache = sphere_cache
    g = cache.grid
    worst = 0.0
    for seed in range(5):
        psi = representable_stream(g, seed=seed)
        u = rie.from_stream(psi, cache)
        a = rie.killing_diffusion_operator(u, cache)
        b = rie.sphere_projected_laplacian(u, cache)
        scale = max(np.abs(b.u_mu).max(), np.abs(b.u_nu).max())
        worst = max(worst,
                    np.abs(a.u_mu - b.u_mu).max() / scale,
                    np.abs(a.u_nu - b.u_nu).max() / scale)
    assert worst < 1e-5


def test_zonal_flow_consistency(sphere_cache):
    u = rie.from_stream(gr.ScalarField(sphere_cache.grid,
                                       np.cos(sphere_cache.grid.MU)),
                        sphere_cache)
    a = rie.killing_diffusion_operator(u, sphere_cache)
    b = rie.sphere_projected_laplacian(u, sphere_cache)
    assert np.abs(a.u_mu - b.u_mu).max() < 1e-7
    assert np.abs(a.u_nu - b.u_nu).max() < 1e-7


def test_projected_laplacian_chart_guard(torus_cache):
    g = torus_cache.grid
    u = rie.TangentField(g, np.zeros(g.shape()), np.zeros(g.shape()))
    with pytest.raises(rie.ChartError):
        rie.sphere_projected_laplacian(u, torus_cache)


def test_projected_laplacian_zero(sphere_cache_small):
    g = sphere_cache_small.grid
    u = rie.TangentField(g, np.zeros(g.shape()), np.zeros(g.shape()))
    out = rie.sphere_projected_laplacian(u, sphere_cache_small)
    assert np.abs(out.u_mu).max() == 0.0
    assert np.abs(out.u_nu).max() == 0.0


# -- variational consistency -----------------------------------------------------------

@pytest.mark.parametrize("which", ["sphere", "torus"])
def test_variational_consistency(which, sphere_cache_small, torus_cache):
    cache = sphere_cache_small if which == "sphere" else torus_cache
    g = cache.grid
    if which == "sphere":
        psi0 = representable_stream(g, seed=7)
        dpsi = representable_stream(g, seed=9)
    else:
        psi0 = gr.ScalarField(g, np.cos(g.NU) + 0.3 * np.sin(g.MU + g.NU))
        dpsi = gr.ScalarField(g, np.sin(g.NU + 2 * g.MU) - 0.2 * np.cos(g.NU))
    u0 = rie.from_stream(psi0, cache)
    du = rie.from_stream(dpsi, cache)
    eps = 1e-6
    up = rie.TangentField(g, u0.u_mu + eps * du.u_mu, u0.u_nu + eps * du.u_nu)
    um = rie.TangentField(g, u0.u_mu - eps * du.u_mu, u0.u_nu - eps * du.u_nu)
    fd = (rie.dissipation_functional(up, cache)
          - rie.dissipation_functional(um, cache)) / (2 * eps)
    out = rie.killing_diffusion_operator(u0, cache)
    pairing = -rie.tangent_inner(out, du, cache)
    scale = (abs(fd) + np.sqrt(rie.tangent_inner(out, out, cache)
                               * rie.tangent_inner(du, du, cache)))
    assert abs(fd - pairing) < 1e-6 * scale


def test_from_stream_divergence_free(sphere_cache_small, torus_cache):
    for cache, seed in ((sphere_cache_small, 2), (torus_cache, 3)):
        g = cache.grid
        if cache.chart.name == "sphere":
            psi = representable_stream(g, seed=seed)
        else:
            psi = gr.ScalarField(g, np.cos(g.NU) + 0.5 * np.sin(g.MU + 2 * g.NU))
        u = rie.from_stream(psi, cache)
        div = rie.divergence(u, cache)
        scale = max(np.abs(u.u_mu).max(), np.abs(u.u_nu).max())
        assert np.abs(div).max() < 1e-9 * max(scale, 1.0)
