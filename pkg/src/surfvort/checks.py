"""Invariant check suites behind the `check` CLI subcommand.

Each suite returns a list of (name, passed, detail) rows; `run_suites`
prints the pass/fail table and reports overall success.
"""

from __future__ import annotations

import numpy as np

from . import geometry, hamiltonian as ham
from . import operators as op, riemannian as rie
from .grid import ScalarField, bracket, field_from_function, grid_for_chart


def _sphere_setup(Nmu=32, Nnu=64):
    chart = geometry.sphere_chart(R=1.0)
    grid = grid_for_chart(chart, Nmu, Nnu)
    return chart, grid, op.GeometryCache(chart, grid)


def _torus_setup(Nmu=32, Nnu=32):
    chart = geometry.torus_chart(r0=2.0, T=0.25)
    grid = grid_for_chart(chart, Nmu, Nnu)
    return chart, grid, op.GeometryCache(chart, grid)


def _smooth_sphere_fields(grid, n=2, seed=0):
    rng = np.random.default_rng(seed)
    X = np.sin(grid.MU) * np.cos(grid.NU)
    Y = np.sin(grid.MU) * np.sin(grid.NU)
    Z = np.cos(grid.MU)
    basis = [X, Y, Z, X * Z, Y * Z, X * Y, Z * Z, X * X - Y * Y, Z ** 3]
    out = []
    for _ in range(n):
        c = rng.normal(size=len(basis))
        out.append(ScalarField(grid, sum(ci * bi for ci, bi in zip(c, basis))))
    return out


def check_grid():
    rows = []
    chart, grid, cache = _torus_setup()
    f, g = _smooth_sphere_fields(grid, 2, seed=3)  # generic periodic fields
    br_fg = bracket(f, g)
    br_gf = bracket(g, f)
    rows.append(("bracket antisymmetry (nodewise)",
                 np.array_equal(br_fg.values, -br_gf.values), "exact"))
    ib = abs(np.sum(br_fg.values) * grid.dmu * grid.dnu)
    rows.append(("integral of bracket vanishes", ib < 1e-10, f"{ib:.2e}"))
    sphere_chart, sgrid, scache = _sphere_setup()
    area = scache.area
    err = abs(area - 4 * np.pi) / (4 * np.pi)
    rows.append(("sphere area quadrature", err < 1e-10, f"rel {err:.2e}"))
    df = sgrid.d_mu(np.cos(sgrid.MU)) + np.sin(sgrid.MU)
    rows.append(("pole-continued derivative of cos(theta)",
                 np.abs(df).max() < 1e-10, f"{np.abs(df).max():.2e}"))
    return rows


def check_operators():
    rows = []
    for label, (chart, grid, cache) in (("sphere", _sphere_setup()),
                                        ("torus", _torus_setup())):
        f, g = _smooth_sphere_fields(grid, 2, seed=5)
        w = cache.quad_weights
        a = np.sum(f.values * cache.apply_laplacian(g.values) * w)
        b = np.sum(g.values * cache.apply_laplacian(f.values) * w)
        rel = abs(a - b) / max(np.sum(np.abs(f.values
                                             * cache.apply_laplacian(g.values)) * w), 1e-300)
        rows.append((f"self-adjointness ({label})", rel < 1e-10, f"{rel:.2e}"))
        fz = f.values - cache.mean(f.values)
        quad = np.sum(fz * cache.apply_laplacian(fz) * w)
        rows.append((f"negativity ({label})", quad <= 1e-12, f"{quad:.2e}"))
        om = ScalarField(grid, fz)
        psi = op.poisson_solve(om, cache)
        res = np.linalg.norm(cache.apply_laplacian(psi.values) + om.values)
        rel = res / np.linalg.norm(om.values)
        rows.append((f"poisson roundtrip ({label})", rel < 1e-8, f"{rel:.2e}"))
    chart, grid, cache = _torus_setup()
    f = _smooth_sphere_fields(grid, 1, seed=9)[0]
    om = ScalarField(grid, f.values - cache.mean(f.values))
    psi_d = op.poisson_solve(om, cache, method="direct")
    psi_c = op.poisson_solve(om, cache, method="cg")
    diff = np.abs(psi_d.values - psi_c.values).max()
    scale = np.abs(psi_d.values).max()
    rows.append(("CG agrees with direct solve", diff < 1e-8 * max(scale, 1),
                 f"{diff:.2e}"))
    return rows


def check_hamiltonian():
    rows = []
    chart = geometry.flat_chart()
    grid = grid_for_chart(chart, 32, 32)
    cache = op.GeometryCache(chart, grid)
    om = field_from_function(grid, lambda x, y: (
        np.sin(2 * np.pi * x) + 0.5 * np.cos(4 * np.pi * y)
        + 0.3 * np.sin(2 * np.pi * (x + y))))
    om.values -= cache.mean(om.values)
    H = ham.energy_functional(cache)
    kernels = [np.cos(2 * np.pi * grid.MU), np.sin(2 * np.pi * grid.NU)]
    F = ham.quadratic_functional(1.0 + 0.3 * kernels[0], cache, "F")
    G = ham.linear_functional(kernels[1], cache, "G")
    res = ham.antisymmetry_residual(F, G, om, cache)
    rows.append(("bracket antisymmetry", res < 1e-10, f"{res:.2e}"))
    for p in (1, 2, 3):
        C = ham.casimir_functional(lambda v, p=p: v ** p,
                                   lambda v, p=p: p * v ** (p - 1), cache)
        val = abs(ham.poisson_bracket(C, H, om, cache))
        rows.append((f"Casimir f=omega^{p} commutes with H", val < 1e-10,
                     f"{val:.2e}"))
    res = ham.anti_self_adjointness_residual(om, kernels[0], kernels[1], cache)
    rows.append(("anti-self-adjointness of J[omega, J .]", res < 1e-10,
                 f"{res:.2e}"))
    chart, sgrid, scache = _sphere_setup()
    om_s = _smooth_sphere_fields(sgrid, 1, seed=2)[0]
    om_s.values -= scache.mean(om_s.values)
    res = ham.hamiltonian_rhs_check(ScalarField(sgrid, om_s.values), scache)
    rows.append(("bracket-generated rhs matches dynamics", res < 1e-10,
                 f"{res:.2e}"))
    return rows


def check_killing_diffusion():
    rows = []
    chart, grid, cache = _sphere_setup(48, 96)
    X = np.sin(grid.MU) * np.cos(grid.NU)
    Y = np.sin(grid.MU) * np.sin(grid.NU)
    Z = np.cos(grid.MU)
    psi = ScalarField(grid, 0.8 * Z * Z + 0.4 * X * Y - 0.3 * Z ** 3
                      + 0.2 * (X * X - Y * Y) * Z)
    u = rie.from_stream(psi, cache)
    a = rie.killing_diffusion_operator(u, cache)
    b = rie.sphere_projected_laplacian(u, cache)
    scale = max(np.abs(b.u_mu).max(), np.abs(b.u_nu).max())
    rel = max(np.abs(a.u_mu - b.u_mu).max(),
              np.abs(a.u_nu - b.u_nu).max()) / scale
    rows.append(("sphere consistency with projected Laplacian", rel < 1e-5,
                 f"rel {rel:.2e}"))
    uk = rie.TangentField(grid, np.zeros(grid.shape()), np.ones(grid.shape()))
    K = np.abs(rie.strain_tensor(uk, cache)).max()
    rows.append(("rotation Killing field has zero strain", K < 1e-12,
                 f"{K:.2e}"))
    out = rie.killing_diffusion_operator(uk, cache)
    mag = max(np.abs(out.u_mu).max(), np.abs(out.u_nu).max())
    rows.append(("Killing field is a diffusion fixed point", mag < 1e-6,
                 f"{mag:.2e}"))
    div = np.abs(rie.divergence(a, cache)).max()
    rows.append(("divergence of operator output (reported)", True,
                 f"{div:.2e}"))
    return rows


SUITES = {
    "grid": check_grid,
    "operators": check_operators,
    "hamiltonian": check_hamiltonian,
    "killing-diffusion": check_killing_diffusion,
}


def run_suites(names, stream=None):
    import sys
    stream = stream or sys.stdout
    if "all" in names:
        names = list(SUITES)
    ok = True
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown check suite {name!r}")
        rows = SUITES[name]()
        stream.write(f"[{name}]\n")
        for label, passed, detail in rows:
            mark = "PASS" if passed else "FAIL"
            stream.write(f"  {mark}  {label:<48s} {detail}\n")
            ok = ok and passed
    return ok
