"""Limit-law objects of the minimum-distance statistic, by quadrature,
and a Nystrom eigenvalue diagnostic for the null/local-alternative law.

Everything is computed against one shared S-quadrature over the weight
window, so the kernel Gram matrices are positive semi-definite by
construction.  The Nystrom path is a diagnostic; the shipped critical
values come from the bootstrap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NonPositiveDefinite, StatisticalInputError
from .families import ParametricFamily, normalize
from .influence import InfluenceMachine
from .oracle import ModelOracle
from .parallel import substream

__all__ = ["LimitLawObjects", "limit_objects", "nystrom_limit_quantile"]


@dataclass
class LimitLawObjects:
    oracle: ModelOracle
    family: ParametricFamily
    theta0: float
    s_nodes: np.ndarray
    s_weights: np.ndarray  # w(y(s)) f_S(s) ds factors
    r_mat: np.ndarray  # (n_s, 2 + d_theta)
    gamma0: np.ndarray
    gamma0_inv: np.ndarray
    c1_0: float
    machine: InfluenceMachine
    rbar_nodes: np.ndarray
    c_const: float
    b_const: float
    var_zeta_tilde: float
    _z_chunk: int = field(default=600, repr=False)

    def R(self, s):
        """(s, 1, -dLambda/dtheta at h0^{-1}(s))."""
        s = np.atleast_1d(np.asarray(s, dtype=float))
        h0 = normalize(self.family, self.theta0)
        y = h0.invert(s)
        grad = np.asarray(self.family.grad_theta(np.atleast_1d(self.theta0), y))
        return np.concatenate([s[:, None], np.ones((s.size, 1)), -grad], axis=1)

    def psi_rows(self, u_z, x_z):
        parts = []
        for k in range(0, np.size(u_z), self._z_chunk):
            parts.append(self.machine.psi(np.asarray(u_z)[k:k + self._z_chunk],
                                          np.asarray(x_z)[k:k + self._z_chunk]))
        return np.concatenate(parts, axis=0)

    def phi(self, u_z, x_z):
        """E[w psi(z, U) R(S)] as rows, one per input point."""
        psi = self.psi_rows(u_z, x_z)
        return psi @ (self.s_weights[:, None] * self.r_mat)

    def psi_centered(self, u_z, x_z):
        psi = self.psi_rows(u_z, x_z)
        proj = self.phi(u_z, x_z) @ self.gamma0_inv @ self.r_mat.T
        return psi - proj

    def zeta_gram(self, u_z, x_z):
        """The kernel matrix zeta(z_i, z_j); PSD by construction."""
        pc = self.psi_centered(u_z, x_z)
        return (pc * self.s_weights[None, :]) @ pc.T

    def zeta(self, z1, z2):
        g = self.zeta_gram(np.array([z1[0], z2[0]]), np.array([z1[1], z2[1]]))
        return float(g[0, 1])

    def zeta_tilde(self, u_z, x_z):
        pc = self.psi_centered(u_z, x_z)
        return 2.0 * pc @ (self.s_weights * self.rbar_nodes)

    def rbar(self, s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        if self.oracle.r0 is None:
            return np.zeros(s.size)
        h0 = normalize(self.family, self.theta0)
        beta = (self.s_weights[:, None] * self.r_mat).T @ np.asarray(
            self.oracle.r0(h0.invert(self.s_nodes)))
        return np.asarray(self.oracle.r0(h0.invert(s))) - self.R(s) @ (
            self.gamma0_inv @ beta)


def limit_objects(oracle: ModelOracle, family: ParametricFamily, theta0: float,
                  n_s: int = 600, n_x_psi: int = 100,
                  b_grid=(72, 48)) -> LimitLawObjects:
    """All Theorem-level objects by quadrature over the oracle S-density."""
    s_lo, s_hi = oracle.s_window
    edges = np.linspace(s_lo, s_hi, n_s + 1)
    s_nodes = 0.5 * (edges[1:] + edges[:-1])
    ds = np.diff(edges)
    s_weights = ds * np.asarray(oracle.f_S(s_nodes))

    h0 = normalize(family, theta0)
    c1_0 = h0.scale
    y_nodes = h0.invert(s_nodes)
    grad = np.asarray(family.grad_theta(np.atleast_1d(theta0), y_nodes))
    r_mat = np.concatenate(
        [s_nodes[:, None], np.ones((n_s, 1)), -grad], axis=1)
    gamma0 = (r_mat * s_weights[:, None]).T @ r_mat
    eig = np.linalg.eigvalsh(gamma0)
    if eig.min() <= 1e-10 * max(eig.max(), 1.0):
        raise NonPositiveDefinite(f"Gamma0 eigenvalues {eig}")
    gamma0_inv = np.linalg.inv(gamma0)

    u_targets = np.asarray(oracle.T_S(s_nodes))
    machine = InfluenceMachine(oracle, u_targets, n_x=n_x_psi)

    if oracle.r0 is None:
        rbar_nodes = np.zeros(n_s)
        c_const = 0.0
    else:
        r0h = np.asarray(oracle.r0(y_nodes), dtype=float)
        beta = (s_weights[:, None] * r_mat).T @ r0h
        rbar_nodes = r0h - r_mat @ (gamma0_inv @ beta)
        c_const = float(np.sum(s_weights * rbar_nodes**2))

    obj = LimitLawObjects(
        oracle=oracle, family=family, theta0=theta0, s_nodes=s_nodes,
        s_weights=s_weights, r_mat=r_mat, gamma0=gamma0,
        gamma0_inv=gamma0_inv, c1_0=c1_0, machine=machine,
        rbar_nodes=rbar_nodes, c_const=c_const, b_const=0.0,
        var_zeta_tilde=0.0,
    )

    # Z-expectations of the diagonal kernel and of zeta_tilde^2 by tensor
    # quadrature: U is uniform with density dFS on its support, X follows
    # f_{X|U}; integrate zeta(z, z) f_{U,X} du dx.
    n_u, n_x = b_grid
    u_pad = 1e-4 * (oracle.u_high - oracle.u_low)
    uq, uw = np.polynomial.legendre.leggauss(n_u)
    uq = 0.5 * (oracle.u_high + oracle.u_low) + 0.5 * (
        oracle.u_high - oracle.u_low - 2 * u_pad) * uq
    uw = 0.5 * (oracle.u_high - oracle.u_low - 2 * u_pad) * uw
    xq, xw = np.polynomial.legendre.leggauss(n_x)
    xq = 0.5 * (oracle.x_high + oracle.x_low) + 0.5 * (
        oracle.x_high - oracle.x_low) * xq
    xw = 0.5 * (oracle.x_high - oracle.x_low) * xw
    uu = np.repeat(uq, n_x)
    xx = np.tile(xq, n_u)
    ww = np.repeat(uw, n_x) * np.tile(xw, n_u) * np.asarray(
        oracle.f_UX(uu, xx))
    pc = obj.psi_centered(uu, xx)
    diag = np.sum(pc * pc * obj.s_weights[None, :], axis=1)
    obj.b_const = float(np.sum(ww * diag))
    if oracle.r0 is not None:
        zt = 2.0 * pc @ (obj.s_weights * obj.rbar_nodes)
        obj.var_zeta_tilde = float(np.sum(ww * zt**2))
    return obj


def nystrom_limit_quantile(objects: LimitLawObjects, n_nodes: int, n_sim: int,
                           alpha: float, seed: int,
                           local: Optional[bool] = None) -> dict:
    """Critical-value diagnostic from the sampled-kernel eigenvalues.

    Draws Z-nodes, eigendecomposes the scaled Gram matrix, simulates the
    weighted chi-square series (plus the correlated normal shift and the
    constant under local alternatives), and returns the empirical
    (1 - alpha)-quantile together with the eigenvalue diagnostics.
    """
    if n_nodes < 50:
        raise StatisticalInputError("need at least 50 Nystrom nodes")
    if local is None:
        local = objects.oracle.r0 is not None
    rng = substream(seed, 0)
    u_z, x_z = objects.oracle.sample_z(rng, n_nodes)
    gram = objects.zeta_gram(u_z, x_z)
    eigvals, eigvecs = np.linalg.eigh(gram / n_nodes)
    lam = np.clip(eigvals, 0.0, None)

    sim_rng = substream(seed, 1)
    w = sim_rng.standard_normal((n_sim, n_nodes))
    base = (w**2) @ lam
    if local:
        zt = objects.zeta_tilde(u_z, x_z)
        cov = (eigvecs.T @ zt) / np.sqrt(n_nodes)
        resid_var = max(objects.var_zeta_tilde - float(cov @ cov), 0.0)
        w0 = w @ cov + np.sqrt(resid_var) * sim_rng.standard_normal(n_sim)
        draws = objects.c1_0**2 * (base + w0 + objects.c_const)
    else:
        draws = objects.c1_0**2 * base
    return {
        "quantile": float(np.quantile(draws, 1.0 - alpha)),
        "alpha": alpha,
        "eigenvalues": lam[::-1],
        "trace": float(lam.sum()),
        "b_const": objects.b_const,
        "c_const": objects.c_const,
        "n_nodes": n_nodes,
        "n_sim": n_sim,
        "local": bool(local),
    }
