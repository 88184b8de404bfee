"""The influence function of the transformation estimator, from an oracle.

Two evaluation paths are provided.  ``delta_v`` follows the seven-piece
display term by term with adaptive quadrature for the r-integrals; it is
the reference.  ``InfluenceMachine`` evaluates the same functional on a
shared panel grid for whole batches of points and targets at once, which
is what the Monte Carlo checks and the limit-law quadratures use.  The
two agree to quadrature tolerance (tested).

Both paths evaluate the two pieces of the display whose printed form is
inconsistent with E[psi] = 0 in their corrected reading: the weight
factor stays inside the x1-derivative in the D_f-term (matching the
D_p-term next to it), and the indicator bracket under the fourth
r-integral is level-dependent (matching the centering of its companion
brackets).  Only these readings make every summand group mean-zero.
"""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import QuadratureFailure, StatisticalInputError
from .oracle import ModelOracle

__all__ = ["delta_v", "psi", "InfluenceMachine"]

_GL_X = np.array(
    [-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526]
)
_GL_W = np.array(
    [0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538]
)


# --- pointwise building blocks -----------------------------------------


def _dvals(oracle: ModelOracle, q, qp, x):
    """D-ratio terms with Q(r), Q'(r) supplied; broadcasts over (r, x).

    Evaluations where the covariate density vanishes produce non-finite
    values; callers multiply by a weight that is zero there and mask.
    """
    x = np.asarray(x, dtype=float)
    e = q - oracle.g(x)
    fe = oracle.f_eps(e)
    Fe = oracle.F_eps(e)
    fx = oracle.f_x(x)
    gp = oracle.g_prime(x)
    fx1 = oracle.f_x_prime(x) if oracle.f_x_prime is not None else 0.0 * x
    with np.errstate(divide="ignore", invalid="ignore"):
        return {
            "D_p0": qp * fx1 / (fe * gp**2 * fx**2),
            "D_pu": -1.0 / (fx * fe * gp),
            "D_p1": -qp / (fx * fe * gp**2),
            "D_f0": -qp * Fe * fx1 / (fe * gp**2 * fx**2),
            "D_f1": qp * Fe / (fe * gp**2 * fx),
        }


def _weighted(m_vals, d_vals):
    """m * D with the convention 0 * non-finite = 0 (outside the weight support)."""
    with np.errstate(invalid="ignore"):
        prod = m_vals * d_vals
    return np.where(np.asarray(m_vals) == 0.0, 0.0, prod)


def _g1(oracle, m_fn, q, qp, x, h=1e-6):
    """m*D_p0 - d/dx1 (m*D_p1), the first r-integrand."""
    d0 = _dvals(oracle, q, qp, x)
    return _weighted(m_fn(x), d0["D_p0"]) - _dmdp1_dx(oracle, m_fn, q, qp, x, h)


def _g2(oracle, m_fn, q, qp, x, h=1e-6):
    """m*D_f0 - d/dx1 (m*D_f1), the second r-integrand."""
    d0 = _dvals(oracle, q, qp, x)

    def md_f1(xx):
        return _weighted(m_fn(xx), _dvals(oracle, q, qp, xx)["D_f1"])

    der = (md_f1(x + h) - md_f1(x - h)) / (2.0 * h)
    return _weighted(m_fn(x), d0["D_f0"]) - der


def _dmdp1_dx(oracle, m_fn, q, qp, x, h=1e-6):
    def md_p1(xx):
        return _weighted(m_fn(xx), _dvals(oracle, q, qp, xx)["D_p1"])

    return (md_p1(x + h) - md_p1(x - h)) / (2.0 * h)


def _df_ux_dr(oracle, q, qp, qpp, x):
    """d/dr of the joint density f_{U,X}(r, x)."""
    x = np.asarray(x, dtype=float)
    e = q - oracle.g(x)
    if oracle.f_eps_prime is None:
        raise StatisticalInputError("oracle needs f_eps_prime for this computation")
    return (oracle.f_eps_prime(e) * qp**2 + oracle.f_eps(e) * qpp) * oracle.f_x(x)


def _d_dpu_dr(oracle, q, qp, x):
    """d/dr of D_pu(r, x)."""
    x = np.asarray(x, dtype=float)
    e = q - oracle.g(x)
    if oracle.f_eps_prime is None:
        raise StatisticalInputError("oracle needs f_eps_prime for this computation")
    return oracle.f_eps_prime(e) * qp / (oracle.f_x(x) * oracle.f_eps(e) ** 2 * oracle.g_prime(x))


def _x_nodes(oracle: ModelOracle, n_x: int):
    lo, hi = oracle.v_support
    step = (hi - lo) / n_x
    return lo + step * (np.arange(n_x) + 0.5), step


def _a_integrand(oracle, m_fn, q, qp, qpp, x):
    d = _dvals(oracle, q, qp, x)
    fux = oracle.f_eps(q - oracle.g(x)) * qp * oracle.f_x(x)
    return (
        (_weighted(m_fn(x), d["D_p0"]) + _dmdp1_dx(oracle, m_fn, q, qp, x)) * fux
        + _weighted(m_fn(x), d["D_pu"]) * _df_ux_dr(oracle, q, qp, qpp, x)
    )


def _b_integrand(oracle, m_fn, q, qp, x):
    d = _dvals(oracle, q, qp, x)
    fux = oracle.f_eps(q - oracle.g(x)) * qp * oracle.f_x(x)
    return (
        _weighted(m_fn(x), d["D_p0"])
        - _weighted(m_fn(x), _d_dpu_dr(oracle, q, qp, x))
        + _dmdp1_dx(oracle, m_fn, q, qp, x)
    ) * fux


def _c_value(oracle, m_fn, u, n_x: int):
    nodes, step = _x_nodes(oracle, n_x)
    q = oracle.Q(u)
    qp = oracle.Q_prime(u)
    d = _dvals(oracle, q, qp, nodes)
    fux = oracle.f_eps(q - oracle.g(nodes)) * qp * oracle.f_x(nodes)
    return float(np.sum(_weighted(m_fn(nodes), d["D_pu"]) * fux) * step)


# --- reference path: the display, term by term --------------------------


def _vtilde(oracle: ModelOracle, which: str, u0: float) -> Callable:
    if which == "v1":
        if abs(float(oracle.Q(u0))) < 1e-12:
            raise StatisticalInputError("v1 weight undefined at u0 with Q(u0) = 0")
        return lambda x: oracle.v(x) / oracle.s1(u0, x)
    if which == "v2":
        return lambda x: oracle.v(x) * oracle.s1(u0, x) / oracle.s1(1.0, x) ** 2
    raise StatisticalInputError(f"unknown weight variant {which!r}")


def delta_v(oracle: ModelOracle, which: str, u0: float, u: float, z,
            n_x: int = 100, rtol: float = 1e-6):
    """The seven-piece correction functional, by adaptive quadrature.

    ``which`` selects the weight variant (v1 or v2) at base point u0; z is
    the observation (U_j, X_j).  Indicator pieces are evaluated exactly.
    """
    m_fn = _vtilde(oracle, which, u0)
    u_j, x_j = float(z[0]), float(z[1])
    dfu = oracle.dFS

    def q_qp(r):
        return float(oracle.Q(r)), float(oracle.Q_prime(r))

    def int_g1(r):
        q, qp = q_qp(r)
        return float(_g1(oracle, m_fn, q, qp, np.asarray(x_j)))

    def int_g2(r):
        q, qp = q_qp(r)
        return float(_g2(oracle, m_fn, q, qp, np.asarray(x_j)))

    nodes, step = _x_nodes(oracle, n_x)

    def a_fn(r):
        q, qp = q_qp(r)
        qpp = float(oracle.Q_second(r))
        return float(np.sum(_a_integrand(oracle, m_fn, q, qp, qpp, nodes)) * step)

    def b_fn(r):
        q, qp = q_qp(r)
        return float(np.sum(_b_integrand(oracle, m_fn, q, qp, nodes)) * step)

    def _quad(fn, lo, hi, idx, points=None):
        if lo == hi:
            return 0.0
        try:
            val, _ = quad(fn, lo, hi, epsrel=rtol, epsabs=1e-12, limit=200,
                          points=points if lo < hi else None)
            return float(val)
        except Exception as exc:  # pragma: no cover - diagnostic path
            raise QuadratureFailure(f"summand {idx} failed: {exc}", summand=idx)

    # (1) first r-integral, bounds depending on U_j
    s1v = _quad(int_g1, max(0.0, u_j), max(u, u_j), 1)
    # (2) second r-integral over [0, u]
    s2v = _quad(int_g2, 0.0, u, 2)
    # (3) point-evaluated jump piece
    ind_u = 1.0 if u_j <= u else 0.0
    ind_0 = 1.0 if u_j <= 0.0 else 0.0
    s3v = 0.0
    if ind_u != ind_0:
        q, qp = q_qp(u_j)
        s3v = (ind_u - ind_0) * float(m_fn(np.asarray(x_j))) * float(
            _dvals(oracle, q, qp, np.asarray(x_j))["D_pu"])
    # (4) centered level-indicator integral against A(r)
    def int4(r):
        br = ((1.0 if u_j <= r else 0.0) - ind_0) / dfu - r
        return br * a_fn(r)

    inner = sorted({u_j}) if min(0.0, u) < u_j < max(0.0, u) else None
    s4v = _quad(int4, 0.0, u, 4, points=inner)
    # (5) and (6): the global-indicator bracket times its two integrals
    br2 = ((1.0 if u_j <= 1.0 else 0.0) - ind_0) / dfu - 1.0
    s5v = -br2 * _quad(lambda r: r * b_fn(r), 0.0, u, 5)
    s6v = -br2 * u * _c_value(oracle, m_fn, u, n_x)
    return s1v + s2v + s3v + s4v + s5v + s6v


# --- batched path --------------------------------------------------------


class InfluenceMachine:
    """Panel-grid evaluation of the correction functional and of psi.

    Targets and the point 1 become panel breakpoints, so every integral
    bound that is not an observation coordinate is a cumulative-sum
    lookup; per-observation bounds cost one partial-panel rule each.
    """

    def __init__(self, oracle: ModelOracle, u_targets: Sequence[float],
                 n_x: int = 100, m_fn: Optional[Callable] = None,
                 max_panel: float = 0.01):
        self.oracle = oracle
        self.m_fn = m_fn if m_fn is not None else oracle.m_base
        req = np.atleast_1d(np.asarray(u_targets, dtype=float))
        lo_ok = req > oracle.u_low
        hi_ok = req < oracle.u_high
        if not (np.all(lo_ok) and np.all(hi_ok)):
            raise StatisticalInputError("targets must lie inside the U-support")
        self.req = req
        self.utall = np.unique(np.concatenate([req, [1.0]]))
        bp = np.unique(np.concatenate([[0.0], self.utall]))
        refined = [bp[:1]]
        for a, b in zip(bp[:-1], bp[1:]):
            k = int(np.ceil((b - a) / max_panel))
            refined.append(np.linspace(a, b, k + 1)[1:])
        self.bp = np.unique(np.concatenate(refined))
        self.idx0 = int(np.searchsorted(self.bp, 0.0))
        self._t_idx = np.searchsorted(self.bp, self.utall)
        self._req_idx = np.searchsorted(self.utall, req)
        self._one_idx = int(np.searchsorted(self.utall, 1.0))
        self.n_x = n_x

        half = 0.5 * np.diff(self.bp)
        mid = 0.5 * (self.bp[1:] + self.bp[:-1])
        self._nodes = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        self._nw = (half[:, None] * _GL_W[None, :]).ravel()
        self._q = np.asarray(oracle.Q(self._nodes))
        self._qp = np.asarray(oracle.Q_prime(self._nodes))
        self._qpp = np.asarray(oracle.Q_second(self._nodes))

        xn, step = _x_nodes(oracle, n_x)
        qc, qpc, qppc = self._q[:, None], self._qp[:, None], self._qpp[:, None]
        a_nodes = np.sum(_a_integrand(oracle, self.m_fn, qc, qpc, qppc, xn[None, :]),
                         axis=1) * step
        b_nodes = np.sum(_b_integrand(oracle, self.m_fn, qc, qpc, xn[None, :]),
                         axis=1) * step
        self._cumA = self._cumulate(a_nodes)
        self._cumRA = self._cumulate(self._nodes * a_nodes)
        self._cumRB = self._cumulate(self._nodes * b_nodes)
        self._c_at_tall = np.array(
            [_c_value(oracle, self.m_fn, u, n_x) for u in self.utall])
        self._qp_tall = np.asarray(oracle.Q_prime(self.utall))
        self._q_tall = np.asarray(oracle.Q(self.utall))
        self._fu_tall = np.asarray(oracle.F_U(self.utall))
        self._fu0 = float(oracle.F_U(0.0))
        self._fu1 = float(oracle.F_U(1.0))

    def _cumulate(self, node_vals):
        """Signed cumulative integral from 0 to each breakpoint."""
        panel = (node_vals * self._nw).reshape(-1, 4).sum(axis=1)
        cum = np.empty(self.bp.size)
        cum[self.idx0] = 0.0
        for k in range(self.idx0, self.bp.size - 1):
            cum[k + 1] = cum[k] + panel[k]
        for k in range(self.idx0 - 1, -1, -1):
            cum[k] = cum[k + 1] - panel[k]
        return cum

    def _partial_nodes(self, t):
        """4-point rule nodes/weights for the tail [bp_k, t] of t's panel."""
        t = np.asarray(t, dtype=float)
        k = np.clip(np.searchsorted(self.bp, t, side="right") - 1, 0, self.bp.size - 2)
        lo = self.bp[k]
        half = 0.5 * (t - lo)
        mid = 0.5 * (t + lo)
        nodes = mid[:, None] + half[:, None] * _GL_X[None, :]
        weights = half[:, None] * _GL_W[None, :]
        return k, nodes, weights

    def _cumA_at(self, t):
        """The cumulative A-integral at arbitrary points."""
        k, nodes, weights = self._partial_nodes(t)
        q = np.asarray(self.oracle.Q(nodes.ravel())).reshape(nodes.shape)
        qp = np.asarray(self.oracle.Q_prime(nodes.ravel())).reshape(nodes.shape)
        qpp = np.asarray(self.oracle.Q_second(nodes.ravel())).reshape(nodes.shape)
        xn, step = _x_nodes(self.oracle, self.n_x)
        vals = np.sum(
            _a_integrand(self.oracle, self.m_fn, q[..., None], qp[..., None],
                         qpp[..., None], xn[None, None, :]),
            axis=-1) * step
        return self._cumA[k] + np.sum(vals * weights, axis=1)

    def delta(self, u_z, x_z):
        """The correction functional over the full target set (n_z, n_tall)."""
        oracle = self.oracle
        u_z = np.asarray(u_z, dtype=float)
        x_z = np.asarray(x_z, dtype=float)
        n_z = u_z.size
        tall = self.utall
        dfu = oracle.dFS
        r_lo, r_hi = self.bp[0], self.bp[-1]
        u_in = np.clip(u_z, r_lo + 1e-13, r_hi - 1e-13)

        # per-observation panel integrands, cumulated over the shared grid
        g1_nodes = _g1(oracle, self.m_fn, self._q[:, None], self._qp[:, None],
                       x_z[None, :])
        g2_nodes = _g2(oracle, self.m_fn, self._q[:, None], self._qp[:, None],
                       x_z[None, :])
        cum1 = self._cumulate_batch(g1_nodes)  # (n_bp, n_z)
        cum2 = self._cumulate_batch(g2_nodes)

        # per-observation partial panels at the (clipped) own coordinate
        k, nodes, weights = self._partial_nodes(u_in)
        qn = np.asarray(oracle.Q(nodes.ravel())).reshape(nodes.shape)
        qpn = np.asarray(oracle.Q_prime(nodes.ravel())).reshape(nodes.shape)
        g1_part = _g1(oracle, self.m_fn, qn, qpn, x_z[:, None])
        cum1_at_u = cum1[k, np.arange(n_z)] + np.sum(g1_part * weights, axis=1)

        # (1)
        cum1_targets = cum1[self._t_idx, :].T  # (n_z, n_tall)
        cum1_at_max0 = np.where(u_z <= 0.0, 0.0, cum1_at_u)
        upper_is_target = u_z[:, None] <= tall[None, :]
        upper = np.where(upper_is_target, cum1_targets, cum1_at_u[:, None])
        empty = np.maximum(tall[None, :], u_z[:, None]) == np.maximum(0.0, u_z)[:, None]
        s1m = np.where(empty, 0.0, upper - cum1_at_max0[:, None])

        # (2)
        s2m = cum2[self._t_idx, :].T

        # (3)
        ind = (u_z[:, None] <= tall[None, :]).astype(float) - (u_z <= 0.0)[
            :, None].astype(float)
        q_at_u = np.asarray(oracle.Q(u_in))
        qp_at_u = np.asarray(oracle.Q_prime(u_in))
        dpu_at_u = _dvals(oracle, q_at_u, qp_at_u, x_z)["D_pu"]
        s3m = ind * (np.asarray(self.m_fn(x_z)) * dpu_at_u)[:, None]

        # (4): indicator part against A, minus the centering integral of r*A
        cumA_t = self._cumA[self._t_idx]
        cumA_at_u = self._cumA_at(u_in)
        pos = (u_z[:, None] > 0.0) & (u_z[:, None] <= np.maximum(tall[None, :], 0.0)) \
            & (tall[None, :] >= 0.0)
        neg = (u_z[:, None] <= 0.0) & (u_z[:, None] > np.minimum(tall[None, :], 0.0)) \
            & (tall[None, :] < 0.0)
        k_ind = np.where(pos, cumA_t[None, :] - cumA_at_u[:, None],
                         np.where(neg, cumA_at_u[:, None] - cumA_t[None, :], 0.0))
        s4m = k_ind / dfu - self._cumRA[self._t_idx][None, :]

        # (5) and (6)
        br2 = (((u_z <= 1.0).astype(float) - (u_z <= 0.0).astype(float)) / dfu - 1.0)
        s5m = -br2[:, None] * self._cumRB[self._t_idx][None, :]
        s6m = -br2[:, None] * (tall * self._c_at_tall)[None, :]

        return s1m + s2m + s3m + s4m + s5m + s6m

    def _cumulate_batch(self, node_vals):
        panel = (node_vals * self._nw[:, None]).reshape(-1, 4, node_vals.shape[1]).sum(axis=1)
        cum = np.empty((self.bp.size, node_vals.shape[1]))
        cum[self.idx0] = 0.0
        for k in range(self.idx0, self.bp.size - 1):
            cum[k + 1] = cum[k] + panel[k]
        for k in range(self.idx0 - 1, -1, -1):
            cum[k] = cum[k + 1] - panel[k]
        return cum

    def psi(self, u_z, x_z):
        """psi(Z, u) over the requested targets, shape (n_z, n_req)."""
        u_z = np.asarray(u_z, dtype=float)
        d = self.delta(u_z, x_z)
        d_req = d[:, self._req_idx]
        d_one = d[:, self._one_idx]
        q_req = self._q_tall[self._req_idx]
        qp_req = self._qp_tall[self._req_idx]
        fu_req = self._fu_tall[self._req_idx]
        dfu = self.oracle.dFS
        ind_req = (u_z[:, None] <= self.req[None, :]).astype(float) - (
            u_z <= 0.0)[:, None].astype(float)
        br1 = ind_req - (fu_req - self._fu0)[None, :]
        br2 = ((u_z <= 1.0).astype(float) - (u_z <= 0.0).astype(float) -
               (self._fu1 - self._fu0))[:, None]
        out = (
            d_req
            - q_req[None, :] * d_one[:, None]
            + qp_req[None, :] / dfu * br1
            - (qp_req * (fu_req - self._fu0) / dfu**2)[None, :] * br2
        )
        return out


def psi(oracle: ModelOracle, z, u, n_x: int = 100) -> float:
    """psi(Z_j, u) at a single observation and target."""
    machine = InfluenceMachine(oracle, [float(u)], n_x=n_x)
    return float(machine.psi(np.array([float(z[0])]), np.array([float(z[1])]))[0, 0])
