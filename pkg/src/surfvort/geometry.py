"""Analytic coordinate charts (mu, nu, zeta) for level-set surfaces in R^3.

A chart carries the covariant metric g_ij of the curvilinear system
(mu, nu, zeta), where the surface of interest is a level set zeta = const.
Everything else is derived from g_ij: first and second metric derivatives
are taken symbolically, while inverses, determinants, Christoffel symbols,
Ricci and chi tensors are assembled numerically (symbolic inversion of a
messy 3x3 metric is both slow and prone to catastrophic cancellation).

Built-in charts: flat plane (x, y, z), sphere (theta, phi, R), axisymmetric
torus in unit-speed form (phi, vartheta, s) with r = r0 + s*cos(vartheta),
and the (phi, z, T) torus chart used for metric cross-checks (outer branch).

All evaluation is pure; Chart objects are immutable after construction and
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import sympy as sp


class SingularPointError(ValueError):
    """Metric determinant below the chart's determinant floor."""


DET_FLOOR = 1e-14

_IDX2 = (0, 1)


def _lambdify(coords, expr) -> Callable:
    f = sp.lambdify(coords, expr, modules="numpy")

    def wrapped(mu, nu, zeta):
        shape = np.broadcast_shapes(np.shape(mu), np.shape(nu), np.shape(zeta))
        out = np.asarray(f(mu, nu, zeta), dtype=float)
        if out.shape != shape:
            out = np.broadcast_to(out, shape).copy()
        return out

    return wrapped


@dataclass
class MetricSample:
    """Metric data at one point: g_ij, g^ij, |g|, J = 1/sqrt|g|, g^zetazeta."""

    g_cov: np.ndarray
    g_con: np.ndarray
    det: float
    J: float
    g_zz: float


@dataclass
class CurvatureSample:
    """Induced-metric curvature data at one point.

    christoffel2[c, a, b] = Gamma^c_ab, christoffel1[a, b, c] = Gamma_abc
    (first index lowered), ricci_tensor = R_ab of the 2-D induced metric,
    ricci_scalar its trace, chi_tensor the curvature correction entering the
    Killing-field diffusion operator.
    """

    christoffel2: np.ndarray
    christoffel1: np.ndarray
    ricci_tensor: np.ndarray
    ricci_scalar: float
    chi_tensor: np.ndarray


@dataclass(frozen=True)
class ChartDomain:
    mu_range: tuple
    nu_range: tuple
    mu_periodic: bool
    nu_periodic: bool
    pole_rule: str = "none"  # "none" | "sphere-offset"


class Chart:
    """Immutable analytic chart built from a symbolic covariant metric."""

    def __init__(self, name, coords, g_cov_expr, domain, zeta0,
                 params=None, embedding=None, det_floor=DET_FLOOR):
        self.name = name
        self.coords = tuple(coords)
        self.g_cov_expr = sp.Matrix(g_cov_expr)
        self.domain = domain
        self.zeta0 = float(zeta0)
        self.params = dict(params or {})
        self.embedding_expr = embedding
        self.det_floor = det_floor
        self.orthogonal = self._detect_orthogonal()
        self._fns = {}
        self._sym = {"g_cov": self.g_cov_expr}
        if embedding is not None:
            self._sym["embedding"] = sp.Matrix(embedding)

    def _detect_orthogonal(self):
        """Numeric probe for vanishing off-diagonal metric entries near the
        zeta0 surface (symbolic zero-testing is unreliable for messy charts)."""
        entries = [self.g_cov_expr[i, j]
                   for i in range(3) for j in range(3) if i < j]
        if all(e == 0 for e in entries):
            return True
        fns = [sp.lambdify(self.coords, e, modules="numpy") for e in entries]
        rng = np.random.default_rng(1234)
        lo_m, hi_m = self.domain.mu_range
        lo_n, hi_n = self.domain.nu_range
        span = 0.2 * (1.0 + abs(self.zeta0))
        n = 40
        mu = rng.uniform(lo_m + 0.05 * (hi_m - lo_m),
                         hi_m - 0.05 * (hi_m - lo_m), n)
        nu = rng.uniform(lo_n, hi_n, n)
        zeta = self.zeta0 + rng.uniform(-span, span, n)
        scale = 0.0
        worst = 0.0
        with np.errstate(all="ignore"):
            diag = [sp.lambdify(self.coords, self.g_cov_expr[i, i], "numpy")
                    for i in range(3)]
            for d in diag:
                vals = np.asarray(d(mu, nu, zeta), dtype=float)
                vals = vals[np.isfinite(vals)]
                if vals.size:
                    scale = max(scale, np.abs(vals).max())
            for f in fns:
                vals = np.asarray(f(mu, nu, zeta), dtype=float)
                vals = np.broadcast_to(vals, mu.shape)
                vals = vals[np.isfinite(vals)]
                if vals.size:
                    worst = max(worst, np.abs(vals).max())
        return worst <= 1e-10 * max(scale, 1.0)

    # -- symbolic derivations (lazy, cached) --------------------------------

    def _symbol(self, key):
        if key in self._sym:
            return self._sym[key]
        mu, nu, zeta = self.coords
        g = self.g_cov_expr
        if key == "det":
            val = g.det()
        elif key == "J":
            val = 1 / sp.sqrt(self._symbol("det"))
        elif key == "gamma":
            val = g[:2, :2]
        elif key == "d2gamma":
            gam = self._symbol("gamma")
            xs = (mu, nu)
            val = [[[[sp.diff(gam[a, b], xs[k], xs[l]) for b in _IDX2]
                     for a in _IDX2] for l in range(2)] for k in range(2)]
        elif key == "dg":
            val = [[[sp.diff(g[i, j], x) for j in range(3)] for i in range(3)]
                   for x in self.coords]
        elif key == "fluxA":            # J * g_nunu
            val = self._symbol("J") * g[1, 1]
        elif key == "fluxB":            # J * g_mumu
            val = self._symbol("J") * g[0, 0]
        elif key == "fluxA_z":
            val = sp.diff(self._symbol("fluxA"), zeta)
        elif key == "fluxA_zz":
            val = sp.diff(self._symbol("fluxA"), zeta, 2)
        elif key == "fluxB_z":
            val = sp.diff(self._symbol("fluxB"), zeta)
        elif key == "fluxB_zz":
            val = sp.diff(self._symbol("fluxB"), zeta, 2)
        elif key == "dgamma":
            gam = self._symbol("gamma")
            val = [[[sp.diff(gam[a, b], x) for b in _IDX2] for a in _IDX2]
                   for x in (mu, nu)]
        else:
            raise KeyError(key)
        self._sym[key] = val
        return val

    def _fn(self, key):
        if key in self._fns:
            return self._fns[key]
        expr = self._symbol(key)
        if isinstance(expr, sp.MatrixBase):
            fns = [[_lambdify(self.coords, expr[i, j]) for j in range(expr.cols)]
                   for i in range(expr.rows)]

            def call(mu, nu, zeta, fns=fns, r=expr.rows, c=expr.cols):
                shape = np.broadcast_shapes(np.shape(mu), np.shape(nu), np.shape(zeta))
                out = np.empty(shape + (r, c))
                for i in range(r):
                    for j in range(c):
                        out[..., i, j] = fns[i][j](mu, nu, zeta)
                return out

            self._fns[key] = call
        elif isinstance(expr, list):
            flat = np.asarray(expr, dtype=object)
            fns = np.empty(flat.shape, dtype=object)
            for idx in np.ndindex(flat.shape):
                fns[idx] = _lambdify(self.coords, flat[idx])

            def call(mu, nu, zeta, fns=fns):
                shape = np.broadcast_shapes(np.shape(mu), np.shape(nu), np.shape(zeta))
                out = np.empty(shape + fns.shape)
                for idx in np.ndindex(fns.shape):
                    out[(Ellipsis,) + idx] = fns[idx](mu, nu, zeta)
                return out

            self._fns[key] = call
        else:
            self._fns[key] = _lambdify(self.coords, expr)
        return self._fns[key]

    # -- numeric evaluation --------------------------------------------------

    def metric_cov(self, mu, nu, zeta):
        return self._fn("g_cov")(mu, nu, zeta)

    def metric_con(self, mu, nu, zeta):
        return np.linalg.inv(self._fn("g_cov")(mu, nu, zeta))

    def jacobian(self, mu, nu, zeta):
        # numeric determinant: the symbolic one can cancel catastrophically
        # for non-diagonal metrics
        det = np.linalg.det(self._fn("g_cov")(mu, nu, zeta))
        return 1.0 / np.sqrt(np.abs(det))

    def induced_metric(self, mu, nu, zeta):
        return self._fn("gamma")(mu, nu, zeta)

    def induced_metric_inv(self, mu, nu, zeta):
        return np.linalg.inv(self._fn("gamma")(mu, nu, zeta))

    def curvature(self, mu, nu, zeta):
        """Christoffel symbols and curvature tensors of the induced metric.

        Assembled numerically from the analytic first and second derivatives
        of gamma_ab, so arbitrarily messy charts stay cheap.  Returns a dict
        with Gamma2[..., c, a, b], Gamma1[..., a, b, c], dGamma2[..., e, c,
        a, b], ricci[..., l, m], ricci_scalar[...], chi[..., l, m].
        """
        gam = self._fn("gamma")(mu, nu, zeta)
        dg = self._fn("dgamma")(mu, nu, zeta)       # [..., k, a, b]
        d2g = self._fn("d2gamma")(mu, nu, zeta)     # [..., k, l, a, b]
        gi = np.linalg.inv(gam)
        # T[d, a, b] = d_a gamma_db + d_b gamma_da - d_d gamma_ab
        T = (np.einsum("...adb->...dab", dg) + np.einsum("...bda->...dab", dg)
             - dg)
        Gamma2 = 0.5 * np.einsum("...cd,...dab->...cab", gi, T)
        Gamma1 = np.einsum("...ad,...dbc->...abc", gam, Gamma2)
        dgi = -np.einsum("...cm,...emn,...nd->...ecd", gi, dg, gi)
        # dT[e, d, a, b] = d_e T[d, a, b]
        dT = (np.einsum("...eadb->...edab", d2g)
              + np.einsum("...ebda->...edab", d2g)
              - np.einsum("...edab->...edab", d2g))
        dGamma2 = 0.5 * (np.einsum("...ecd,...dab->...ecab", dgi, T)
                         + np.einsum("...cd,...edab->...ecab", gi, dT))
        # R_lm = d_s Gamma^s_lm - d_l Gamma^s_ms + Gamma^i_is Gamma^s_lm
        #        - Gamma^s_li Gamma^i_sm
        tr_gamma = np.einsum("...iis->...s", Gamma2)
        ricci = (np.einsum("...sslm->...lm", dGamma2)
                 - np.einsum("...lsms->...lm", dGamma2)
                 + np.einsum("...s,...slm->...lm", tr_gamma, Gamma2)
                 - np.einsum("...sli,...ism->...lm", Gamma2, Gamma2))
        scalar = np.einsum("...lm,...lm->...", gi, ricci)
        # chi_lm = (1/sq) d_k(sq gamma^ik d_m gamma_il) - d_l Gamma^k_mk
        #          + Gamma^j_il gamma^ik (d_k gamma_jm - d_j gamma_km)
        dlogsq = 0.5 * np.einsum("...ab,...kab->...k", gi, dg)
        term1 = (np.einsum("...k,...ik,...mil->...lm", dlogsq, gi, dg)
                 + np.einsum("...kik,...mil->...lm", dgi, dg)
                 + np.einsum("...ik,...kmil->...lm", gi, d2g))
        term2 = np.einsum("...lkmk->...lm", dGamma2)
        term3 = np.einsum("...jil,...ik,...kjm->...lm", Gamma2, gi, dg) \
            - np.einsum("...jil,...ik,...jkm->...lm", Gamma2, gi, dg)
        chi = term1 - term2 + term3
        return {"Gamma2": Gamma2, "Gamma1": Gamma1, "dGamma2": dGamma2,
                "ricci": ricci, "ricci_scalar": scalar, "chi": chi,
                "gamma": gam, "gamma_inv": gi}

    def g_zz_grad(self, mu, nu, zeta):
        """Tangential gradient (d_mu, d_nu) of g^zetazeta, via the
        derivative-of-inverse identity d(g^-1) = -g^-1 (dg) g^-1."""
        gcon = self.metric_con(mu, nu, zeta)
        dg = self._fn("dg")(mu, nu, zeta)   # [..., k, i, j]
        gz = gcon[..., :, 2]
        out = -np.einsum("...i,...kij,...j->...k", gz, dg, gz)
        return out[..., :2]

    def sqrt_det_gamma(self, mu, nu, zeta):
        return np.sqrt(np.linalg.det(self._fn("gamma")(mu, nu, zeta)))

    def ricci_scalar_field(self, mu, nu, zeta):
        return self.curvature(mu, nu, zeta)["ricci_scalar"]

    def g_zz(self, mu, nu, zeta):
        con = self.metric_con(mu, nu, zeta)
        return con[..., 2, 2]

    def metric_field(self, key, mu, nu, zeta):
        """Evaluate one covariant metric entry, e.g. 'g_mumu', on arrays."""
        i, j = {"g_mumu": (0, 0), "g_nunu": (1, 1), "g_munu": (0, 1),
                "g_zetazeta": (2, 2)}[key]
        return self._fn("g_cov")(mu, nu, zeta)[..., i, j]

    def embedding(self, mu, nu, zeta):
        if self.embedding_expr is None:
            raise ValueError(f"chart {self.name!r} has no embedding map")
        return self._fn("embedding")(mu, nu, zeta)

    def __repr__(self):
        return f"Chart({self.name!r}, zeta0={self.zeta0})"


# -- operations ---------------------------------------------------------------

def metric_at(chart: Chart, point) -> MetricSample:
    """Sample g_ij, g^ij, |g|, J and g^zetazeta at one point."""
    mu, nu, zeta = point
    g = np.asarray(chart.metric_cov(mu, nu, zeta), dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        det = float(np.linalg.det(g)) if np.all(np.isfinite(g)) else np.nan
    if not np.isfinite(det) or abs(det) < chart.det_floor:
        raise SingularPointError(
            f"chart {chart.name!r}: |g| = {det:.3e} below floor at {point}")
    g_con = np.linalg.inv(g)
    J = 1.0 / np.sqrt(abs(det))
    return MetricSample(g_cov=g, g_con=g_con, det=det, J=J,
                        g_zz=float(g_con[2, 2]))


def christoffel_at(chart: Chart, point) -> CurvatureSample:
    """Induced-metric Christoffel symbols and curvature tensors at a point."""
    mu, nu, zeta = point
    gam = chart.induced_metric(mu, nu, zeta)
    if abs(np.linalg.det(gam)) < chart.det_floor:
        raise SingularPointError(
            f"chart {chart.name!r}: |gamma| singular at {point}")
    cur = chart.curvature(mu, nu, zeta)
    return CurvatureSample(christoffel2=cur["Gamma2"],
                           christoffel1=cur["Gamma1"],
                           ricci_tensor=cur["ricci"],
                           ricci_scalar=float(cur["ricci_scalar"]),
                           chi_tensor=cur["chi"])


def ricci_scalar(chart: Chart, point) -> float:
    mu, nu, zeta = point
    gam = chart.induced_metric(mu, nu, zeta)
    if abs(np.linalg.det(gam)) < chart.det_floor:
        raise SingularPointError(
            f"chart {chart.name!r}: |gamma| singular at {point}")
    return float(chart.ricci_scalar_field(mu, nu, zeta))


def christoffel_fd(chart: Chart, point, h=1e-5):
    """Induced Christoffel symbols from central differences of gamma_ab.

    Fallback path for charts defined only through metric callbacks; also the
    reference for the analytic-vs-FD convergence check.
    """
    mu, nu, zeta = point
    steps = [h * (1.0 + abs(mu)), h * (1.0 + abs(nu))]
    base = [mu, nu]

    def gamma_at(a, b):
        return chart.induced_metric(a, b, zeta)

    dgam = []
    for k in range(2):
        p_hi, p_lo = list(base), list(base)
        p_hi[k] += steps[k]
        p_lo[k] -= steps[k]
        dgam.append((gamma_at(*p_hi) - gamma_at(*p_lo)) / (2 * steps[k]))
    gam_inv = np.linalg.inv(gamma_at(*base))
    G2 = np.zeros((2, 2, 2))
    for c in range(2):
        for a in range(2):
            for b in range(2):
                G2[c, a, b] = 0.5 * sum(
                    gam_inv[c, d] * (dgam[b][d, a] + dgam[a][d, b] - dgam[d][a, b])
                    for d in range(2))
    return G2


def metric_compatibility_residual(chart: Chart, point) -> float:
    """Max |nabla_c gamma_ab| with the chart's analytic Christoffel symbols."""
    mu, nu, zeta = point
    samp = christoffel_at(chart, point)
    dgam = chart._fn("dgamma")(mu, nu, zeta)        # [k][a, b]
    gam = chart.induced_metric(mu, nu, zeta)
    res = 0.0
    for c in range(2):
        for a in range(2):
            for b in range(2):
                val = float(dgam[c, a, b])
                val -= sum(samp.christoffel2[d, c, a] * gam[d, b]
                           + samp.christoffel2[d, c, b] * gam[a, d]
                           for d in range(2))
                res = max(res, abs(val))
    return res


def killing_residual(chart: Chart, u: Callable, points: Sequence,
                     mode: str = "induced", h: float = 1e-6) -> float:
    """Max-norm of the Lie derivative of the metric along u over the points.

    K_ij = g_jk du^k/dx^i + g_ki du^k/dx^j + (dg_ij/dx^k) u^k.  `u` maps a
    point to contravariant components: 2 components on the surface
    (mode="induced"), 3 for the full chart metric (mode="full").  Component
    derivatives are taken by central differences with step h scaled by
    coordinate magnitude.
    """
    n = 2 if mode == "induced" else 3
    worst = 0.0
    for point in points:
        point = tuple(float(c) for c in point)
        if mode == "induced":
            g = chart.induced_metric(*point)
            dg_full = chart._fn("dgamma")(*point)
            dg = [np.asarray(dg_full[k]) for k in range(2)]
        else:
            g = np.asarray(chart.metric_cov(*point), dtype=float)
            dg_full = chart._fn("dg")(*point)
            dg = [np.asarray(dg_full[k]) for k in range(3)]
        du = np.zeros((n, n))  # du[i, k] = du^k/dx^i
        for i in range(n):
            step = h * (1.0 + abs(point[i]))
            hi, lo = list(point), list(point)
            hi[i] += step
            lo[i] -= step
            du[i, :] = (np.asarray(u(hi), dtype=float)
                        - np.asarray(u(lo), dtype=float)) / (2 * step)
        uval = np.asarray(u(point), dtype=float)
        for i in range(n):
            for j in range(n):
                kij = (sum(g[j, k] * du[i, k] for k in range(n))
                       + sum(g[k, i] * du[j, k] for k in range(n))
                       + sum(dg[k][i, j] * uval[k] for k in range(n)))
                worst = max(worst, abs(kij))
    return worst


# -- built-in charts ----------------------------------------------------------

def flat_chart(Lx=1.0, Ly=1.0) -> Chart:
    """Cartesian chart (x, y, z); the surface is the periodic plane z = 0."""
    x, y, z = sp.symbols("x y z", real=True)
    dom = ChartDomain((0.0, Lx), (0.0, Ly), True, True)
    emb = (x, y, z)
    return Chart("flat", (x, y, z), sp.eye(3), dom, zeta0=0.0,
                 params={"Lx": Lx, "Ly": Ly}, embedding=emb)


def sphere_chart(R=1.0) -> Chart:
    """Spherical chart (theta, phi, R); surface R = const."""
    th, ph, r = sp.symbols("theta phi R", positive=True)
    g = sp.diag(r**2, r**2 * sp.sin(th)**2, 1)
    dom = ChartDomain((0.0, float(np.pi)), (0.0, 2 * float(np.pi)),
                      False, True, pole_rule="sphere-offset")
    emb = (r * sp.sin(th) * sp.cos(ph), r * sp.sin(th) * sp.sin(ph),
           r * sp.cos(th))
    return Chart("sphere", (th, ph, r), g, dom, zeta0=R, params={"R": R},
                 embedding=emb)


def torus_chart(r0=2.0, T=0.25) -> Chart:
    """Axisymmetric torus in unit-speed form (phi, vartheta, s).

    r = r0 + s*cos(vartheta), z = s*sin(vartheta); the surface label is the
    minor radius s = sqrt(2T), so |grad zeta| = 1 and J = 1/(r s).  The
    alternative (phi, z, T) labeling is `torus_zt_chart`.
    """
    ph, vt, s = sp.symbols("phi vartheta s", real=True)
    r = r0 + s * sp.cos(vt)
    g = sp.diag(r**2, s**2, 1)
    twopi = 2 * float(np.pi)
    dom = ChartDomain((0.0, twopi), (0.0, twopi), True, True)
    emb = (r * sp.cos(ph), r * sp.sin(ph), s * sp.sin(vt))
    return Chart("torus", (ph, vt, s), g, dom, zeta0=float(np.sqrt(2 * T)),
                 params={"r0": r0, "T": T}, embedding=emb)


def torus_zt_chart(r0=2.0) -> Chart:
    """Paper-style torus chart (phi, z, T), outer branch r = r0 + sqrt(2T - z^2).

    Singular on the circle r = r0 (z^2 = 2T); used for metric cross-checks,
    not for grids.
    """
    ph, z, T = sp.symbols("phi z T", real=True)
    r = r0 + sp.sqrt(2 * T - z**2)
    d = (r - r0)**2
    g = sp.Matrix([[r**2, 0, 0],
                   [0, 2 * T / d, -z / d],
                   [0, -z / d, 1 / d]])
    dom = ChartDomain((0.0, 2 * float(np.pi)), (-1.0, 1.0), True, False)
    return Chart("torus-zt", (ph, z, T), g, dom, zeta0=0.25,
                 params={"r0": r0})


def scaled_flat_chart(eps=0.3) -> Chart:
    """Flat plane z = 0 with the non-uniform label zeta = z * s(x, y).

    s = 1 + eps*sin(2 pi x)*cos(2 pi y), so g^zetazeta = s^2 varies along the
    surface while the surface itself stays flat.  Exercises the tangential
    grad(g^zetazeta) term of the curvature diffusion operator.
    """
    x, y, zeta = sp.symbols("x y zetab", real=True)
    s = 1 + eps * sp.sin(2 * sp.pi * x) * sp.cos(2 * sp.pi * y)
    # position (x, y, zeta/s); metric of (x, y, zeta)
    sx, sy = sp.diff(s, x), sp.diff(s, y)
    g = sp.Matrix([
        [1 + zeta**2 * sx**2 / s**4, zeta**2 * sx * sy / s**4, -zeta * sx / s**3],
        [zeta**2 * sx * sy / s**4, 1 + zeta**2 * sy**2 / s**4, -zeta * sy / s**3],
        [-zeta * sx / s**3, -zeta * sy / s**3, 1 / s**2],
    ])
    dom = ChartDomain((0.0, 1.0), (0.0, 1.0), True, True)
    return Chart("scaled-flat", (x, y, zeta), g, dom, zeta0=0.0,
                 params={"eps": eps})


def chart_from_embedding(name, coords, position, domain, zeta0, params=None) -> Chart:
    """Build a chart from a symbolic embedding map position(mu, nu, zeta)."""
    pos = sp.Matrix(position)
    Jac = pos.jacobian(list(coords))
    g = (Jac.T * Jac).applyfunc(lambda e: sp.expand_trig(sp.expand(e)))
    return Chart(name, coords, g, domain, zeta0, params=params,
                 embedding=tuple(position))


def builtin_chart(name: str, **kwargs) -> Chart:
    makers = {"flat": flat_chart, "sphere": sphere_chart,
              "torus": torus_chart, "torus-zt": torus_zt_chart,
              "scaled-flat": scaled_flat_chart}
    if name not in makers:
        raise ValueError(f"unknown chart {name!r}; expected one of {sorted(makers)}")
    return makers[name](**kwargs)
