import numpy as np
import pytest

from surfvort import geometry as geo


def random_points(chart, n, seed=0):
    rng = np.random.default_rng(seed)
    lo_m, hi_m = chart.domain.mu_range
    lo_n, hi_n = chart.domain.nu_range
    margin = 0.05 * (hi_m - lo_m)
    mu = rng.uniform(lo_m + margin, hi_m - margin, n)
    nu = rng.uniform(lo_n, hi_n, n)
    zeta = np.full(n, chart.zeta0)
    return np.stack([mu, nu, zeta], axis=1)


# -- metric_at ------------------------------------------------------------------

def test_flat_metric_identity():
    chart = geo.flat_chart()
    m = geo.metric_at(chart, (0.3, 0.8, 0.0))
    assert np.allclose(m.g_cov, np.eye(3))
    assert m.J == pytest.approx(1.0)


def test_torus_zt_paper_contravariant_components():
    chart = geo.torus_zt_chart(r0=2.0)
    z, T = 0.3, 0.25
    r = 2.0 + np.sqrt(2 * T - z * z)
    m = geo.metric_at(chart, (0.7, z, T))
    assert m.g_con[0, 0] == pytest.approx(1.0 / r ** 2, rel=1e-12)
    assert m.g_con[1, 1] == pytest.approx(1.0, rel=1e-12)
    assert m.g_con[1, 2] == pytest.approx(z, rel=1e-12)
    assert m.g_con[2, 2] == pytest.approx(2 * T, rel=1e-12)
    assert m.J == pytest.approx(1.0 - 2.0 / r, rel=1e-12)


def test_sphere_metric_sample():
    chart = geo.sphere_chart(R=2.0)
    m = geo.metric_at(chart, (np.pi / 2, 0.3, 2.0))
    assert m.g_con[0, 0] == pytest.approx(0.25, rel=1e-13)
    assert m.g_con[1, 1] == pytest.approx(0.25, rel=1e-13)
    assert m.g_con[2, 2] == pytest.approx(1.0, rel=1e-13)
    assert m.J == pytest.approx(0.25, rel=1e-12)


@pytest.mark.parametrize("maker,kwargs", [
    (geo.flat_chart, {}),
    (geo.sphere_chart, {"R": 1.7}),
    (geo.torus_chart, {"r0": 2.0, "T": 0.25}),
])
def test_inverse_metric_identity_random_points(maker, kwargs):
    chart = maker(**kwargs)
    for point in random_points(chart, 1000, seed=4):
        m = geo.metric_at(chart, point)
        assert np.abs(m.g_cov @ m.g_con - np.eye(3)).max() < 1e-12
        assert abs(m.J * np.sqrt(abs(m.det)) - 1.0) < 1e-12


def test_singular_point_error_on_torus_zt():
    chart = geo.torus_zt_chart(r0=2.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        with pytest.raises(geo.SingularPointError):
            geo.metric_at(chart, (0.0, np.sqrt(0.5), 0.25))  # z^2 = 2T, r = r0


# -- christoffel_at -------------------------------------------------------------

def test_flat_christoffel_vanishes():
    chart = geo.flat_chart()
    c = geo.christoffel_at(chart, (0.2, 0.4, 0.0))
    assert np.abs(c.christoffel2).max() < 1e-14
    assert np.abs(c.ricci_tensor).max() < 1e-14
    assert abs(c.ricci_scalar) < 1e-14
    assert np.abs(c.chi_tensor).max() < 1e-14


def test_torus_zt_christoffel_phi_phiz():
    chart = geo.torus_zt_chart(r0=2.0)
    z, T = 0.31, 0.25
    r = 2.0 + np.sqrt(2 * T - z * z)
    drdz = -z / (r - 2.0)
    c = geo.christoffel_at(chart, (0.0, z, T))
    assert c.christoffel2[0, 0, 1] == pytest.approx(drdz / r, rel=1e-10)


def test_sphere_christoffel():
    chart = geo.sphere_chart(R=1.4)
    th = 0.9
    c = geo.christoffel_at(chart, (th, 1.1, 1.4))
    assert c.christoffel2[0, 1, 1] == pytest.approx(-np.sin(th) * np.cos(th),
                                                    rel=1e-12)
    assert c.christoffel2[1, 0, 1] == pytest.approx(np.cos(th) / np.sin(th),
                                                    rel=1e-12)


@pytest.mark.parametrize("maker", [geo.sphere_chart, geo.torus_chart])
def test_christoffel_lower_symmetry_and_compatibility(maker):
    chart = maker()
    for point in random_points(chart, 20, seed=7):
        c = geo.christoffel_at(chart, point)
        assert np.abs(c.christoffel2 - c.christoffel2.transpose(0, 2, 1)).max() < 1e-12
        assert geo.metric_compatibility_residual(chart, point) < 1e-9


def test_christoffel_first_kind_lowering():
    chart = geo.torus_chart()
    point = (0.5, 1.2, chart.zeta0)
    c = geo.christoffel_at(chart, point)
    gam = chart.induced_metric(*point)
    expect = np.einsum("ad,dbc->abc", gam, c.christoffel2)
    assert np.abs(c.christoffel1 - expect).max() < 1e-13


def test_analytic_vs_fd_christoffel_second_order():
    chart = geo.torus_chart(r0=2.0, T=0.25)
    point = (0.4, 2.2, chart.zeta0)
    exact = geo.christoffel_at(chart, point).christoffel2
    errs = []
    for h in (1e-3, 5e-4):
        fd = geo.christoffel_fd(chart, point, h=h)
        errs.append(np.abs(fd - exact).max())
    assert errs[1] < errs[0] / 3.0  # O(h^2): halving h gives ~4x


# -- ricci_scalar ----------------------------------------------------------------

def test_sphere_ricci_scalar():
    for R in (1.0, 2.5):
        chart = geo.sphere_chart(R=R)
        val = geo.ricci_scalar(chart, (0.7, 0.2, R))
        assert val == pytest.approx(2.0 / R ** 2, rel=1e-12)


def test_sphere_einstein_manifold_relation():
    chart = geo.sphere_chart(R=2.0)
    point = (1.1, 0.4, 2.0)
    c = geo.christoffel_at(chart, point)
    gam = chart.induced_metric(*point)
    assert np.abs(c.ricci_tensor - gam / 4.0).max() < 1e-11


def test_torus_ricci_closed_form_both_charts():
    r0, T = 2.0, 0.25
    s = np.sqrt(2 * T)
    chart = geo.torus_chart(r0=r0, T=T)
    for vt in (0.3, 1.8, 3.0, 4.4):
        r = r0 + s * np.cos(vt)
        z = s * np.sin(vt)
        expect = 2.0 / (r * (r - r0) * (1 + z * z / (r - r0) ** 2))
        assert geo.ricci_scalar(chart, (0.9, vt, s)) == pytest.approx(
            expect, rel=1e-10)
    zt = geo.torus_zt_chart(r0=r0)
    z = 0.31
    r = r0 + np.sqrt(2 * T - z * z)
    expect = 2.0 / (r * (r - r0) * (1 + z * z / (r - r0) ** 2))
    assert geo.ricci_scalar(zt, (0.0, z, T)) == pytest.approx(expect, rel=1e-10)


def test_torus_ricci_sphere_limit():
    # r0 -> 0 recovers 2/R^2 with R = sqrt(2T); the error decays like r0
    T = 0.5
    R = np.sqrt(2 * T)
    vt = 0.8
    prev = None
    for r0 in (1e-3, 1e-4, 1e-5):
        chart = geo.torus_chart(r0=r0, T=T)
        val = geo.ricci_scalar(chart, (0.0, vt, chart.zeta0))
        err = abs(val - 2.0 / R ** 2)
        if prev is not None:
            assert err < prev
        prev = err
    assert prev < 3e-5


# -- killing_residual -------------------------------------------------------------

def test_flat_euclidean_isometry_killing():
    chart = geo.flat_chart()

    def u(point):
        x, y, z = point
        a = np.array([0.3, -0.2, 0.5])
        b = np.array([0.1, 0.7, -0.4])
        return a + np.cross(b, np.array([x, y, z]))

    pts = [(0.1, 0.2, 0.0), (0.5, 0.9, 0.3), (0.8, 0.1, -0.2)]
    assert geo.killing_residual(chart, u, pts, mode="full") < 1e-8


def test_sphere_rotation_killing():
    chart = geo.sphere_chart(R=1.0)
    b = np.array([0.4, -0.3, 0.8])

    def u(point):
        th, ph, _ = point
        u_th = b[1] * np.cos(ph) - b[0] * np.sin(ph)
        u_ph = b[2] - np.cos(th) / np.sin(th) * (b[0] * np.cos(ph)
                                                 + b[1] * np.sin(ph))
        return (u_th, u_ph)

    pts = [(0.7, 0.3, 1.0), (1.4, 2.0, 1.0), (2.2, 5.1, 1.0)]
    assert geo.killing_residual(chart, u, pts, mode="induced") < 1e-8


def test_torus_axial_killing():
    chart = geo.torus_chart(r0=2.0, T=0.25)
    pts = [(0.3, 1.0, chart.zeta0), (2.0, 4.0, chart.zeta0)]
    assert geo.killing_residual(chart, lambda p: (1.0, 0.0), pts,
                                mode="induced") < 1e-10


def test_non_killing_field_has_residual():
    chart = geo.sphere_chart(R=1.0)
    pts = [(0.9, 0.5, 1.0)]
    res = geo.killing_residual(chart, lambda p: (np.sin(p[0]), 0.0), pts,
                               mode="induced")
    assert res > 1e-2


# -- chart construction ------------------------------------------------------------

def test_builtin_chart_dispatch():
    assert geo.builtin_chart("sphere", R=2.0).params["R"] == 2.0
    with pytest.raises(ValueError):
        geo.builtin_chart("klein-bottle")


def test_chart_from_embedding_matches_sphere():
    import sympy as sp
    th, ph, r = sp.symbols("th ph r", positive=True)
    pos = (r * sp.sin(th) * sp.cos(ph), r * sp.sin(th) * sp.sin(ph),
           r * sp.cos(th))
    dom = geo.ChartDomain((0.0, np.pi), (0.0, 2 * np.pi), False, True,
                          pole_rule="sphere-offset")
    chart = geo.chart_from_embedding("sphere2", (th, ph, r), pos, dom, 1.0)
    ref = geo.sphere_chart(R=1.0)
    pt = (0.8, 1.3, 1.0)
    assert np.allclose(chart.metric_cov(*pt), ref.metric_cov(*pt), atol=1e-12)
    assert chart.orthogonal


def test_orthogonality_flags():
    assert geo.sphere_chart().orthogonal
    assert geo.torus_chart().orthogonal
    assert geo.flat_chart().orthogonal
    assert not geo.torus_zt_chart().orthogonal
    assert not geo.scaled_flat_chart().orthogonal
