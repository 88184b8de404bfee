"""Closed-form model oracles for the influence and limit-law computations.

An oracle bundles a known regression function, covariate law, error law and
true transformation (d_x = 1 only), and derives everything the influence
function needs: the S-distribution, its anchored rescaling, the inverse
rescaling Q with derivatives, conditional CDFs and the D-ratio terms.
All conditional expectations downstream reduce to one-dimensional
S-integrals against these quantities.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import SingularPhi1, StatisticalInputError
from .families import ParametricFamily, get_family, invert_monotone, normalize
from .simulate import R_FUNCS, SimScenario, _fixed_hinv, _local_h

__all__ = [
    "ModelOracle",
    "standard_oracle",
    "DTerms",
    "d_terms",
    "minimize_M_quadrature",
    "central_difference",
]

_SQRT2PI = np.sqrt(2.0 * np.pi)


def _gauss_legendre(n, lo, hi):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (hi + lo) + 0.5 * (hi - lo) * x, 0.5 * (hi - lo) * w


def central_difference(f, x, h, check_tol=None):
    """Central difference with one Richardson refinement.

    With ``check_tol`` set, raises if the refinement disagrees with the
    coarse estimate by more than the tolerance (relative).
    """
    d1 = (f(x + h) - f(x - h)) / (2.0 * h)
    d2 = (f(x + 0.5 * h) - f(x - 0.5 * h)) / h
    rich = (4.0 * d2 - d1) / 3.0
    if check_tol is not None:
        scale = max(abs(rich), 1e-8)
        if abs(rich - d2) / scale > check_tol:
            raise StatisticalInputError(
                f"finite-difference derivative unstable at x={x}"
            )
    return rich


@dataclass
class ModelOracle:
    """Closed-form transformation model h(Y) = g(X) + eps with X in R."""

    g: Callable
    g_prime: Callable
    x_low: float
    x_high: float
    f_x: Callable
    F_eps: Callable
    f_eps: Callable
    h_inv: Callable  # inverse of the true transformation, S -> Y
    f_x_prime: Optional[Callable] = None
    f_eps_prime: Optional[Callable] = None
    x_sampler: Optional[Callable] = None  # (rng, size) -> draws
    eps_sampler: Optional[Callable] = None
    v_support: Tuple[float, float] = (0.1, 0.9)
    y_window_quantiles: Tuple[float, float] = (0.005, 0.995)
    n_x_quad: int = 200
    s_margin: float = 9.0
    r0: Optional[Callable] = None  # local-alternative direction on the y-scale

    def __post_init__(self):
        self._xq, self._xw = _gauss_legendre(self.n_x_quad, self.x_low, self.x_high)
        self._fx_at_q = np.asarray(self.f_x(self._xq), dtype=float)
        g_vals = np.asarray(self.g(self._xq), dtype=float)
        s_lo = float(g_vals.min()) - self.s_margin
        s_hi = float(g_vals.max()) + self.s_margin
        self.F_S0 = self.F_S(0.0)
        self.F_S1 = self.F_S(1.0)
        self.dFS = self.F_S1 - self.F_S0
        if self.dFS <= 0:
            raise StatisticalInputError("F_S does not separate the anchors 0 and 1")
        s_grid = np.linspace(s_lo, s_hi, 4001)
        t_grid = self.T_S(s_grid)
        keep = np.concatenate([[True], np.diff(t_grid) > 0.0])
        self._q_interp = PchipInterpolator(t_grid[keep], s_grid[keep], extrapolate=False)
        self.u_low = float(-self.F_S0 / self.dFS)
        self.u_high = float((1.0 - self.F_S0) / self.dFS)
        # weight window in S-space from the Y-quantile window
        qa, qb = self.y_window_quantiles
        self.s_window = (self._fs_quantile(qa), self._fs_quantile(qb))
        self.y_window = (float(self.h_inv(self.s_window[0])),
                         float(self.h_inv(self.s_window[1])))
        self.u0_window = (self.T_S(self.s_window[0]) - 0.02,
                          self.T_S(self.s_window[1]) + 0.02)

    # --- S-scale laws -------------------------------------------------
    def F_S(self, s):
        s = np.asarray(s, dtype=float)
        vals = self.F_eps(s[..., None] - self.g(self._xq)) * (self._fx_at_q * self._xw)
        out = vals.sum(axis=-1)
        return out if out.ndim else float(out)

    def f_S(self, s):
        s = np.asarray(s, dtype=float)
        vals = self.f_eps(s[..., None] - self.g(self._xq)) * (self._fx_at_q * self._xw)
        out = vals.sum(axis=-1)
        return out if out.ndim else float(out)

    def f_S_prime(self, s):
        if self.f_eps_prime is None:
            return central_difference(self.f_S, np.asarray(s, dtype=float), 1e-5)
        s = np.asarray(s, dtype=float)
        vals = self.f_eps_prime(s[..., None] - self.g(self._xq)) * (self._fx_at_q * self._xw)
        out = vals.sum(axis=-1)
        return out if out.ndim else float(out)

    def _fs_quantile(self, q):
        return float(brentq(lambda s: self.F_S(s) - q,
                            self._xq.min() - self.s_margin,
                            self._xq.max() + self.s_margin, xtol=1e-12))

    def T_S(self, s):
        out = (self.F_S(s) - self.F_S0) / self.dFS
        return out if np.ndim(out) else float(out)

    def Q(self, u):
        """Inverse of T_S; defined on the open U-support."""
        out = self._q_interp(np.asarray(u, dtype=float))
        if np.any(np.isnan(out)):
            raise StatisticalInputError("Q evaluated outside the U-support")
        return out if np.ndim(u) else float(out)

    def Q_prime(self, u):
        out = self.dFS / self.f_S(self.Q(u))
        return out if np.ndim(u) else float(out)

    def Q_second(self, u):
        q = self.Q(u)
        qp = self.dFS / self.f_S(q)
        out = -(qp**2) * self.f_S_prime(q) / self.f_S(q)
        return out if np.ndim(u) else float(out)

    def F_U(self, u):
        out = np.clip(self.F_S0 + np.asarray(u, dtype=float) * self.dFS, 0.0, 1.0)
        return out if np.ndim(u) else float(out)

    # --- conditional laws ---------------------------------------------
    def Phi(self, u, x):
        return self.F_eps(self.Q(u) - self.g(np.asarray(x, dtype=float)))

    def Phi_u(self, u, x):
        return self.f_eps(self.Q(u) - self.g(np.asarray(x, dtype=float))) * self.Q_prime(u)

    def Phi_1(self, u, x):
        x = np.asarray(x, dtype=float)
        return -self.f_eps(self.Q(u) - self.g(x)) * self.g_prime(x)

    def f_UX(self, u, x):
        x = np.asarray(x, dtype=float)
        return self.f_eps(self.Q(u) - self.g(x)) * self.Q_prime(u) * self.f_x(x)

    def p(self, u, x):
        x = np.asarray(x, dtype=float)
        return self.Phi(u, x) * self.f_x(x)

    def s1(self, u, x):
        """Closed form of the ratio integral: -Q(u) / g'(x) in the additive model."""
        x = np.asarray(x, dtype=float)
        return -np.asarray(self.Q(u)) / self.g_prime(x)

    # --- weight density -----------------------------------------------
    def v(self, x):
        """Biweight-shaped density on the v-support (zero and C1 at the edges)."""
        lo, hi = self.v_support
        z = 2.0 * (np.asarray(x, dtype=float) - lo) / (hi - lo) - 1.0
        inside = np.abs(z) <= 1.0
        return np.where(inside, 1.875 * (1.0 - z**2) ** 2 / (hi - lo), 0.0)

    def m_base(self, x):
        """v(x) / s1(1, x): the weight behind both influence summands."""
        return self.v(x) / self.s1(1.0, x)

    # --- sampling -------------------------------------------------------
    def sample_z(self, rng, size: int):
        """Draws of Z = (U, X) from the model law."""
        if self.x_sampler is None or self.eps_sampler is None:
            raise StatisticalInputError("oracle has no samplers attached")
        x = self.x_sampler(rng, size)
        s = self.g(x) + self.eps_sampler(rng, size)
        u = self.T_S(s)
        return np.asarray(u, dtype=float), np.asarray(x, dtype=float)


DTerms = dict


def d_terms(oracle: ModelOracle, u: float, x: float) -> DTerms:
    """The five ratio terms of the conditional-CDF linearization at (u, x)."""
    phi1 = float(oracle.Phi_1(u, x))
    if abs(phi1) < 1e-10:
        raise SingularPhi1(f"|Phi_1| = {abs(phi1):.3g} at (u={u}, x={x})")
    phiu = float(oracle.Phi_u(u, x))
    phi = float(oracle.Phi(u, x))
    fx = float(oracle.f_x(x))
    if oracle.f_x_prime is not None:
        fx1 = float(oracle.f_x_prime(x))
    else:
        fx1 = float(central_difference(oracle.f_x, float(x), 1e-5))
    return {
        "D_p0": phiu * fx1 / (phi1**2 * fx**2),
        "D_pu": 1.0 / (fx * phi1),
        "D_p1": -phiu / (fx * phi1**2),
        "D_f0": -phiu * phi * fx1 / (phi1**2 * fx**2),
        "D_f1": phiu * phi / (phi1**2 * fx),
    }


def standard_oracle(theta0: float, alternative: Optional[Tuple] = None,
                    n_local: Optional[int] = None,
                    family: str = "yeo-johnson", **kwargs) -> ModelOracle:
    """The simulation-design oracle: g(x) = 4x - 1, X ~ U(0,1), eps ~ N(0,1).

    ``alternative`` matches the simulation scenarios: None for the null,
    ("fixed", r_id, c) for the anchored mixture, ("local", r_id, scale)
    for the n^{-1/2}-drift (requires ``n_local``).
    """
    fam = get_family(family)
    h0 = normalize(fam, theta0)
    r0_fn = None
    if alternative is None:
        h_inv = h0.invert
    elif alternative[0] == "fixed":
        scenario = SimScenario(theta0=theta0, n=100, alternative=alternative,
                               family=family)
        h_inv = _fixed_hinv(scenario)
    elif alternative[0] == "local":
        if n_local is None:
            raise StatisticalInputError("local alternatives need n_local")
        scenario = SimScenario(theta0=theta0, n=n_local, alternative=alternative,
                               family=family)
        _, h_inv = _local_h(scenario)
        _, r_id, scale = alternative
        r_fn = R_FUNCS[r_id]
        r_at0 = float(r_fn(0.0))
        r_span = float(r_fn(1.0)) - r_at0

        def r0_fn(y):  # noqa: E731 - anchored direction of the drift
            return scale * (r_fn(y) - r_at0 - h0(y) * r_span) / h0.scale
    else:
        raise StatisticalInputError(f"unknown alternative {alternative!r}")

    return ModelOracle(
        g=lambda x: 4.0 * np.asarray(x, dtype=float) - 1.0,
        g_prime=lambda x: 4.0 * np.ones_like(np.asarray(x, dtype=float)),
        x_low=0.0,
        x_high=1.0,
        f_x=lambda x: np.where(
            (np.asarray(x, dtype=float) >= 0.0) & (np.asarray(x, dtype=float) <= 1.0),
            1.0, 0.0),
        f_x_prime=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        F_eps=lambda e: ndtr(np.asarray(e, dtype=float)),
        f_eps=lambda e: np.exp(-0.5 * np.asarray(e, dtype=float) ** 2) / _SQRT2PI,
        f_eps_prime=lambda e: -np.asarray(e, dtype=float)
        * np.exp(-0.5 * np.asarray(e, dtype=float) ** 2) / _SQRT2PI,
        x_sampler=lambda rng, size: rng.random(size),
        eps_sampler=lambda rng, size: rng.standard_normal(size),
        h_inv=h_inv,
        r0=r0_fn,
        **kwargs,
    )


def minimize_M_quadrature(oracle: ModelOracle, family: ParametricFamily,
                          n_s: int = 400, theta_grid: int = 81):
    """gamma_0 = argmin M(gamma) by S-quadrature over the weight window.

    M(gamma) = integral over the window of (s c1 + c2 - Lambda_theta(h^{-1}(s)))^2
    f_S(s) ds; (c1, c2) profiled in closed form, theta by grid plus
    golden-section refinement.
    """
    from .statistic import profile_c

    s_nodes, s_w = _gauss_legendre(n_s, *oracle.s_window)
    w = s_w * oracle.f_S(s_nodes)
    y_nodes = np.asarray(oracle.h_inv(s_nodes), dtype=float)
    box = family.theta_box
    if family.theta_dim != 1:
        raise NotImplementedError("oracle minimizer supports scalar families")

    def prof(th):
        lam = np.asarray(family.eval(np.atleast_1d(th), y_nodes), dtype=float)
        return profile_c(s_nodes, lam, w)

    thetas = np.linspace(box[0, 0], box[0, 1], theta_grid)
    objs = np.array([prof(t)[2] for t in thetas])
    i = int(np.argmin(objs))
    lo, hi = thetas[max(i - 1, 0)], thetas[min(i + 1, theta_grid - 1)]
    golden = (np.sqrt(5.0) - 1.0) / 2.0
    a, d = lo, hi
    c1p, c2p = d - golden * (d - a), a + golden * (d - a)
    f1, f2 = prof(c1p)[2], prof(c2p)[2]
    while d - a > 1e-8:
        if f1 <= f2:
            d, c2p, f2 = c2p, c1p, f1
            c1p = d - golden * (d - a)
            f1 = prof(c1p)[2]
        else:
            a, c1p, f1 = c1p, c2p, f2
            c2p = a + golden * (d - a)
            f2 = prof(c2p)[2]
    th = 0.5 * (a + d)
    c1, c2, obj = prof(th)
    return {"theta0": th, "c1": c1, "c2": c2, "M": obj}
