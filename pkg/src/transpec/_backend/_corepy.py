"""Pure-numpy reference backend for the hot estimator kernels.

The compiled backend in ``_core.pyx`` mirrors these routines node for node:
both use the normalized biweight smoother, 4-point Gauss-Legendre panels
between consecutive u-grid nodes for the ratio integral, and the identical
golden-section/bisection scalar solve, so their outputs agree to rounding.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtr

from ..errors import EmptyNeighborhood, VanishingDenominator

# 4-point Gauss-Legendre nodes/weights on [-1, 1]
_GL_X = np.array(
    [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526]
)
_GL_W = np.array(
    [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538]
)

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0
_SQRT2PI = np.sqrt(2.0 * np.pi)


def _bw(z):
    out = 1.0 - z * z
    np.clip(out, 0.0, None, out=out)
    return 0.9375 * out * out


def _bw_prime(z):
    inside = np.abs(z) <= 1.0
    return np.where(inside, -3.75 * z * (1.0 - z * z), 0.0)


def _bw_cdf(z):
    u = np.clip(z, -1.0, 1.0)
    return 0.9375 * (u - 2.0 * u**3 / 3.0 + u**5 / 5.0 + 8.0 / 15.0)


def s1_grid(u_grid, idx0, us, xs1, x_nodes, h_u, h_x, floor=1e-8):
    """Cumulative ratio integral s1_hat(u, x) on the grid, for every x node.

    Returns (s1, n_clamped) with s1 of shape (n_u, n_x) and s1[idx0, :] = 0
    exactly.  Quadrature nodes where the x1-derivative of the conditional
    CDF falls inside (-floor, floor) are clamped to +-floor and counted;
    the smoothed-median solve downstream is robust to the resulting spikes.
    A weight node with no observation in kernel range raises.
    """
    u_grid = np.asarray(u_grid, dtype=float)
    us = np.asarray(us, dtype=float)
    xs1 = np.asarray(xs1, dtype=float)
    x_nodes = np.asarray(x_nodes, dtype=float)
    n_u = u_grid.size

    kx = _bw((xs1[:, None] - x_nodes[None, :]) / h_x) / h_x  # (n, n_x)
    dkx = -_bw_prime((xs1[:, None] - x_nodes[None, :]) / h_x) / (h_x * h_x)
    a = kx.sum(axis=0)
    ap = dkx.sum(axis=0)
    if np.any(a <= 1e-300):
        bad = x_nodes[a <= 1e-300]
        raise EmptyNeighborhood(f"no observation within kernel range of x={bad[:3]}")

    lo = u_grid[:-1]
    hi = u_grid[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    r = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()  # (n_c*4,)

    z = (r[:, None] - us[None, :]) / h_u
    ku = _bw(z) / h_u  # (n_r, n)
    cku = _bw_cdf(z)

    num = ku @ kx  # (n_r, n_x)
    m = cku @ kx
    npx = cku @ dkx
    den = npx * a[None, :] - m * ap[None, :]
    df_dx1 = den / (a * a)[None, :]
    small = np.abs(df_dx1) < floor
    n_clamped = int(np.count_nonzero(small))
    if n_clamped:
        sign = np.where(df_dx1 < 0.0, -1.0, 1.0)
        den = np.where(small, sign * floor * (a * a)[None, :], den)

    integrand = num * a[None, :] / den
    n_c = n_u - 1
    cell = (integrand.reshape(n_c, 4, -1) * _GL_W[None, :, None]).sum(axis=1)
    cell *= half[:, None]

    s1 = np.empty((n_u, x_nodes.size))
    s1[idx0] = 0.0
    for j in range(idx0, n_u - 1):
        s1[j + 1] = s1[j] + cell[j]
    for j in range(idx0 - 1, -1, -1):
        s1[j] = s1[j + 1] - cell[j]
    return s1, n_clamped


def _objective(q, rho, vw, b):
    t = rho - q
    return float(np.sum(vw * t * (2.0 * ndtr(t / b) - 1.0)))


def _dobjective(q, rho, vw, b):
    t = rho - q
    pdf = np.exp(-0.5 * (t / b) ** 2) / (_SQRT2PI * b)
    return float(np.sum(vw * (-(2.0 * ndtr(t / b) - 1.0) - 2.0 * t * pdf)))


def qhat_minimize(rho, vw, b, tol=1e-9):
    """Smoothed weighted-median solve: golden section then derivative bisection."""
    rho = np.asarray(rho, dtype=float)
    vw = np.asarray(vw, dtype=float)
    r_lo = float(rho.min())
    r_hi = float(rho.max())
    if r_hi - r_lo < 1e-13:
        return 0.5 * (r_lo + r_hi)
    a = r_lo - 3.0 * b
    d = r_hi + 3.0 * b
    c1 = d - _INVPHI * (d - a)
    c2 = a + _INVPHI * (d - a)
    f1 = _objective(c1, rho, vw, b)
    f2 = _objective(c2, rho, vw, b)
    while d - a > tol:
        if f1 <= f2:
            d, c2, f2 = c2, c1, f1
            c1 = d - _INVPHI * (d - a)
            f1 = _objective(c1, rho, vw, b)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + _INVPHI * (d - a)
            f2 = _objective(c2, rho, vw, b)
    ga = _dobjective(a, rho, vw, b)
    gd = _dobjective(d, rho, vw, b)
    if ga < 0.0 < gd:
        for _ in range(80):
            m = 0.5 * (a + d)
            gm = _dobjective(m, rho, vw, b)
            if gm < 0.0:
                a = m
            else:
                d = m
            if d - a < 1e-13 * (1.0 + abs(m)):
                break
    return 0.5 * (a + d)


def qhat_curve(s1, idx0, idx1, vw, b, s1_floor=1e-8, tol=1e-9):
    """Q_hat at every u-grid node from the cumulative s1 matrix."""
    s1 = np.asarray(s1, dtype=float)
    denom = s1[idx1]
    if np.any(np.abs(denom) < s1_floor):
        raise VanishingDenominator(
            f"|s1_hat(1, x)| below {s1_floor:g} at some weight node"
        )
    rho = s1 / denom[None, :]
    n_u = s1.shape[0]
    q = np.empty(n_u)
    for j in range(n_u):
        row = rho[j]
        if row.max() - row.min() < 1e-13:
            q[j] = float(row[0])
        else:
            q[j] = qhat_minimize(row, vw, b, tol=tol)
    return q
