"""Diffusive equilibria: closed-form sphere Helmholtz modes and flow, the
numerical eigenspace of the discrete spherical Laplacian, and the thin-torus
poloidal Fourier recurrence with its boundedness classification.

On the sphere the equilibrium vorticity solves the Helmholtz problem
lap_S w = -2 w, spanned by the l = 1 harmonics

    w = B0 cos(theta) - sin(theta) (A1 sin(phi) + B1 cos(phi)),

with stream function Psi = R^2 w / 2 and flow

    u = (B1 sin(phi) - A1 cos(phi))/2 d_theta
      + [B0 + cot(theta)(A1 sin(phi) + B1 cos(phi))]/2 d_phi,

the restriction of a rigid rotation b x x with b = (-B1/2, -A1/2, B0/2).

On the thin torus (aspect ratio alpha = r0 / sqrt(2T) >> 1) the poloidal
profile Q(vartheta) = sum c_k exp(i k vartheta) obeys

    -2 alpha k^2 c_k + c_{k-1}(2 + k - k^2) + c_{k+1}(2 - k - k^2) = 0,

which forces c_{-1} = c_0 = c_1 = 0 and propagates the free seeds c_{+-2}
outward; the coefficients diverge geometrically for alpha > 1, so the only
bounded solution is Q = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
from scipy.linalg import eig, subspace_angles

from .grid import PeriodicGrid2D, ScalarField
from .operators import GeometryCache


@dataclass
class SphereEquilibrium:
    B0: float
    A1: float
    B1: float
    R: float
    omega: ScalarField
    psi: ScalarField
    u_theta: np.ndarray
    u_phi: np.ndarray


def sphere_equilibrium(B0, A1, B1, R, grid: PeriodicGrid2D) -> SphereEquilibrium:
    th, ph = grid.MU, grid.NU
    om = B0 * np.cos(th) - np.sin(th) * (A1 * np.sin(ph) + B1 * np.cos(ph))
    psi = R * R * om / 2.0
    u_theta = 0.5 * (B1 * np.sin(ph) - A1 * np.cos(ph)) * np.ones_like(th)
    u_phi = 0.5 * (B0 + np.cos(th) / np.sin(th)
                   * (A1 * np.sin(ph) + B1 * np.cos(ph)))
    return SphereEquilibrium(B0, A1, B1, R, ScalarField(grid, om),
                             ScalarField(grid, psi), u_theta, u_phi)


def rotation_field(b, grid: PeriodicGrid2D):
    """Contravariant (theta, phi) components of b x x restricted to the sphere."""
    bx, by, bz = b
    th, ph = grid.MU, grid.NU
    u_theta = by * np.cos(ph) - bx * np.sin(ph)
    u_phi = bz - np.cos(th) / np.sin(th) * (bx * np.cos(ph) + by * np.sin(ph))
    return u_theta, u_phi


def rigid_rotation_fit(u_theta, u_phi, grid: PeriodicGrid2D):
    """Least-squares b with u ~ b x x; returns (b, relative residual).

    The phi component is weighted by sin(theta) so the cot(theta) pole
    columns stay balanced.
    """
    th, ph = grid.MU.ravel(), grid.NU.ravel()
    s, c = np.sin(th), np.cos(th)
    rows_t = np.stack([-np.sin(ph), np.cos(ph), np.zeros_like(ph)], axis=1)
    rows_p = np.stack([-c * np.cos(ph), -c * np.sin(ph), s], axis=1)
    A = np.vstack([rows_t, rows_p])
    y = np.concatenate([u_theta.ravel(), (u_phi * np.sin(grid.MU)).ravel()])
    b, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = np.linalg.norm(A @ b - y) / max(np.linalg.norm(y), 1e-300)
    return b, resid


def sphere_helmholtz_eigenspace(cache: GeometryCache, eigenvalue=-2.0,
                                window=0.5, max_m=4):
    """Eigenspace of the discrete Laplace-Beltrami operator near `eigenvalue`.

    Extracts the per-phi-mode dense blocks of R^2 * normal Laplacian (the
    spherical Laplace-Beltrami operator), eigendecomposes them, and returns
    the real fields spanning the eigenspace together with their eigenvalues.
    """
    if cache.chart.name != "sphere":
        raise ValueError("Helmholtz eigenspace extraction needs a sphere chart")
    grid = cache.grid
    R2 = cache.chart.zeta0 ** 2
    n = grid.Nmu
    fields: List[ScalarField] = []
    eigenvalues: List[float] = []
    for m in range(0, max_m + 1):
        T0 = cache._profile_truncation(axis=1, parity=(-1) ** m)
        block = np.empty((n, n), dtype=complex)
        for i0 in range(n):
            delta = np.zeros(grid.shape())
            delta[i0, :] = 1.0
            re = cache.apply_laplacian(delta * np.cos(m * grid.NU))
            im = cache.apply_laplacian(delta * np.sin(m * grid.NU))
            coef = np.fft.fft(re + 1j * im, axis=1)[:, m] / grid.Nnu
            block[:, i0] = R2 * coef
        # restrict to the dealias band: the raw m = 0 block carries the
        # spurious pole-harmonic direction
        block = T0 @ block @ T0
        vals, vecs = eig(block)
        for idx in np.argsort(np.abs(vals - eigenvalue)):
            lam = vals[idx]
            if abs(lam - eigenvalue) > window:
                break
            prof = vecs[:, idx]
            cos_part = np.real(np.outer(prof, np.exp(1j * m * grid.nu)))
            fields.append(ScalarField(grid, cos_part))
            eigenvalues.append(float(np.real(lam)))
            if m > 0:
                sin_part = np.imag(np.outer(prof, np.exp(1j * m * grid.nu)))
                fields.append(ScalarField(grid, sin_part))
                eigenvalues.append(float(np.real(lam)))
    return {"dimension": len(fields), "basis": fields,
            "eigenvalues": eigenvalues}


def eigenspace_subspace_angle(basis: List[ScalarField], analytic: List[np.ndarray],
                              cache: GeometryCache) -> float:
    """Largest principal angle between the numerical eigenspace and the
    analytic one, in the quadrature inner product."""
    sw = np.sqrt(cache.quad_weights).ravel()
    A = np.stack([f.values.ravel() * sw for f in basis], axis=1)
    B = np.stack([v.ravel() * sw for v in analytic], axis=1)
    angles = subspace_angles(A, B)
    return float(angles.max()) if len(angles) else 0.0


def rayleigh_quotient(f: ScalarField, cache: GeometryCache) -> float:
    """<f, lap_S f> / <f, f> under the surface measure."""
    R2 = cache.chart.zeta0 ** 2
    lap = R2 * cache.apply_laplacian(f.values)
    return cache.integral(f.values * lap) / cache.integral(f.values ** 2)


# -- torus recurrence -----------------------------------------------------------

@dataclass
class TorusRecurrence:
    alpha: float
    m: int
    seeds: tuple
    K: int
    coefficients: Dict[int, float]
    classification: str
    growth_ratios: List[float] = field(default_factory=list)

    def coefficient(self, k):
        return self.coefficients.get(k, 0.0)


RHO_MIN = 1.5
OVERFLOW_GUARD = 1e280


def _propagate(alpha, c2, K):
    """Forward recurrence from the seed c2 on the positive branch."""
    c = {0: 0.0, 1: 0.0, 2: float(c2)}
    ratios = []
    overflowed = False
    for k in range(2, K):
        denom = 2.0 - k - k * k
        nxt = (2 * alpha * k * k * c[k] - (2 + k - k * k) * c[k - 1]) / denom
        c[k + 1] = nxt
        if c[k] != 0.0:
            ratios.append(abs(nxt / c[k]))
        if abs(nxt) > OVERFLOW_GUARD:
            overflowed = True
            break
    return c, ratios, overflowed


def torus_recurrence(alpha, c2=1.0, cm2=0.0, K=16) -> TorusRecurrence:
    """Propagate the poloidal Fourier recurrence and classify boundedness.

    c_{-1} = c_0 = c_1 = 0 always (forced by the k = 0, +-1 equations for
    alpha > 0); the positive and negative branches propagate independently
    from c_2 and c_{-2}.  classification is "trivial-only" when the
    growth-ratio test |c_{k+1}/c_k| >= 1.5 holds over the last K/2 orders for
    every nonzero seed, "zero" when both seeds vanish, else "undetermined".
    """
    if alpha <= 0:
        raise ValueError("aspect ratio alpha must be positive")
    if K < 6:
        raise ValueError("truncation order K must be at least 6")
    coeffs = {-1: 0.0, 0: 0.0, 1: 0.0}
    ratios_all = []
    growing = []
    for seed, sign in ((c2, +1), (cm2, -1)):
        if seed == 0.0:
            continue
        c, ratios, overflowed = _propagate(alpha, seed, K)
        for k, v in c.items():
            coeffs[sign * k] = v
        tail = ratios[-(K // 2):]
        ratios_all.extend(tail)
        growing.append(overflowed or (len(tail) > 0 and min(tail) >= RHO_MIN))
    if not growing:
        classification = "zero"
    elif all(growing):
        classification = "trivial-only"
    else:
        classification = "undetermined"
    return TorusRecurrence(alpha=alpha, m=0, seeds=(c2, cm2), K=K,
                           coefficients=coeffs, classification=classification,
                           growth_ratios=ratios_all)


def fourier_sum(coefficients: Dict[int, float], theta: np.ndarray) -> np.ndarray:
    out = np.zeros_like(theta, dtype=complex)
    for k, c in coefficients.items():
        out = out + c * np.exp(1j * k * theta)
    return out.real


def torus_ode_residual(Q: np.ndarray, m: int, alpha: float) -> float:
    """Max-norm residual of the poloidal equation on a uniform vartheta grid:
    (alpha + cos t) Q'' - sin t Q' - (m^2/(alpha + cos t) - 2 cos t) Q."""
    Q = np.asarray(Q, dtype=float)
    n = Q.size
    theta = np.arange(n) * 2 * np.pi / n
    k = np.fft.fftfreq(n, 1.0 / n)
    qh = np.fft.fft(Q)
    dq = np.fft.ifft(1j * k * qh).real
    d2q = np.fft.ifft(-(k * k) * qh).real
    ac = alpha + np.cos(theta)
    res = ac * d2q - np.sin(theta) * dq - (m * m / ac - 2 * np.cos(theta)) * Q
    return float(np.abs(res).max())
