"""Minimum-distance statistic with the affine nuisance profiled out.

T_n = min_gamma sum_j w(Y_j) (h_hat(Y_j) c1 + c2 - Lambda_theta(Y_j))^2,
the sum normalization; the mean version T_n / n is exposed separately for
the relevant-hypothesis test.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize

from .data import Dataset
from .errors import SingularDesign, StatisticalInputError
from .families import ParametricFamily
from .npt import NptEstimate

__all__ = [
    "WeightFn",
    "GammaPoint",
    "TestConfig",
    "profile_c",
    "compute_Tn",
    "empirical_M",
]

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class WeightFn:
    """Weight on the response: flat, or with empirical quantile trimming.

    The trimmed variant recomputes its quantiles on every sample it is
    applied to (so each bootstrap sample is trimmed on its own terms).
    """

    trim_lower: float = 0.0
    trim_upper: float = 0.0

    @property
    def kind(self) -> str:
        return "flat" if self.trim_lower == 0.0 == self.trim_upper else "trimmed"

    def weights(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if self.kind == "flat":
            return np.ones_like(y)
        lo = np.quantile(y, self.trim_lower, method="higher")
        hi = np.quantile(y, 1.0 - self.trim_upper, method="lower")
        return ((y >= lo) & (y <= hi)).astype(float)

    def support(self, y) -> Tuple[float, float]:
        y = np.asarray(y, dtype=float)
        w = self.weights(y)
        kept = y[w > 0.0]
        return float(kept.min()), float(kept.max())


@dataclass(frozen=True)
class GammaPoint:
    c1: float
    c2: float
    theta: np.ndarray


@dataclass
class TestConfig:
    theta_grid: int = 41
    weight: WeightFn = field(default_factory=WeightFn)
    c1_box: Optional[Tuple[float, float]] = None
    c2_box: Optional[Tuple[float, float]] = None
    refine_tol: float = 1e-6


def _wls_objective(c1, c2, h_vals, lam_vals, w_vals):
    r = h_vals * c1 + c2 - lam_vals
    return float(np.sum(w_vals * r * r))


def profile_c(h_vals, lam_vals, w_vals, c1_box=None, c2_box=None):
    """Exact inner minimizer over (c1, c2) of the weighted squared distance.

    Unconstrained case: the 2x2 normal equations.  With boxes, the
    quadratic is minimized over the rectangle by checking the clipped
    interior solution and each edge.
    """
    h_vals = np.asarray(h_vals, dtype=float)
    lam_vals = np.asarray(lam_vals, dtype=float)
    w_vals = np.asarray(w_vals, dtype=float)
    sw = float(w_vals.sum())
    if sw <= 0.0:
        raise SingularDesign("total weight is zero")
    mh = float(np.sum(w_vals * h_vals)) / sw
    ml = float(np.sum(w_vals * lam_vals)) / sw
    dh = h_vals - mh
    var_h = float(np.sum(w_vals * dh * dh)) / sw
    if var_h < 1e-12:
        raise SingularDesign("weighted variance of h_hat values is numerically zero")
    cov = float(np.sum(w_vals * dh * (lam_vals - ml))) / sw
    c1 = cov / var_h
    c2 = ml - c1 * mh

    if c1_box is None and c2_box is None:
        return c1, c2, _wls_objective(c1, c2, h_vals, lam_vals, w_vals)

    lo1, hi1 = c1_box if c1_box is not None else (-np.inf, np.inf)
    lo2, hi2 = c2_box if c2_box is not None else (-np.inf, np.inf)
    if lo1 <= c1 <= hi1 and lo2 <= c2 <= hi2:
        return c1, c2, _wls_objective(c1, c2, h_vals, lam_vals, w_vals)

    swh2 = float(np.sum(w_vals * h_vals * h_vals))
    candidates = []

    def _c2_given(c1f):
        return float(np.clip(ml - c1f * mh, lo2, hi2))

    def _c1_given(c2f):
        c1f = float(np.sum(w_vals * h_vals * (lam_vals - c2f))) / swh2
        return float(np.clip(c1f, lo1, hi1))

    for c1f in (lo1, hi1):
        if np.isfinite(c1f):
            candidates.append((c1f, _c2_given(c1f)))
    for c2f in (lo2, hi2):
        if np.isfinite(c2f):
            candidates.append((_c1_given(c2f), c2f))
    best = min(
        candidates,
        key=lambda c: _wls_objective(c[0], c[1], h_vals, lam_vals, w_vals),
    )
    return best[0], best[1], _wls_objective(best[0], best[1], h_vals, lam_vals, w_vals)


def _profiled(theta, family, y, h_vals, w_vals, cfg):
    lam = np.asarray(family.eval(np.atleast_1d(theta), y), dtype=float)
    return profile_c(h_vals, lam, w_vals, cfg.c1_box, cfg.c2_box)


def compute_Tn(data: Dataset, h_hat: NptEstimate, family: ParametricFamily,
               cfg: TestConfig):
    """Minimize the profiled distance over theta: coarse grid, then refinement.

    Returns (T_n, gamma_hat, diagnostics).  Grid ties break toward the
    smallest theta; if refinement cannot beat the grid the grid optimum is
    kept and flagged.
    """
    w_all = cfg.weight.weights(data.y)
    mask = w_all > 0.0
    y = data.y[mask]
    w = w_all[mask]
    h_vals = np.asarray(h_hat.eval(y), dtype=float)

    box = family.theta_box
    diagnostics = {"optimizer_stall": False}

    if family.theta_dim == 1:
        thetas = np.linspace(box[0, 0], box[0, 1], cfg.theta_grid)
        objs = np.empty(cfg.theta_grid)
        profs = []
        for i, th in enumerate(thetas):
            c1, c2, obj = _profiled(th, family, y, h_vals, w, cfg)
            objs[i] = obj
            profs.append((c1, c2))
        i_best = int(np.argmin(objs))  # argmin takes the first (smallest theta) on ties
        lo = thetas[max(i_best - 1, 0)]
        hi = thetas[min(i_best + 1, cfg.theta_grid - 1)]

        a, d = lo, hi
        c1p = d - _GOLDEN * (d - a)
        c2p = a + _GOLDEN * (d - a)
        f1 = _profiled(c1p, family, y, h_vals, w, cfg)[2]
        f2 = _profiled(c2p, family, y, h_vals, w, cfg)[2]
        while d - a > cfg.refine_tol:
            if f1 <= f2:
                d, c2p, f2 = c2p, c1p, f1
                c1p = d - _GOLDEN * (d - a)
                f1 = _profiled(c1p, family, y, h_vals, w, cfg)[2]
            else:
                a, c1p, f1 = c1p, c2p, f2
                c2p = a + _GOLDEN * (d - a)
                f2 = _profiled(c2p, family, y, h_vals, w, cfg)[2]
        th_ref = 0.5 * (a + d)
        c1r, c2r, obj_ref = _profiled(th_ref, family, y, h_vals, w, cfg)
        if obj_ref <= objs[i_best]:
            theta_hat = np.array([th_ref])
            c1, c2, t_n = c1r, c2r, obj_ref
        else:
            diagnostics["optimizer_stall"] = True
            theta_hat = np.array([thetas[i_best]])
            c1, c2 = profs[i_best]
            t_n = objs[i_best]
    else:
        k = max(3, int(round(cfg.theta_grid ** (1.0 / family.theta_dim))))
        axes = [np.linspace(lo_, hi_, k) for lo_, hi_ in box]
        mesh = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1)
        objs = np.array([_profiled(th, family, y, h_vals, w, cfg)[2] for th in mesh])
        start = mesh[int(np.argmin(objs))]

        def fun(th):
            th = np.clip(th, box[:, 0], box[:, 1])
            return _profiled(th, family, y, h_vals, w, cfg)[2]

        res = minimize(fun, start, method="Nelder-Mead",
                       options={"xatol": cfg.refine_tol, "fatol": 1e-12})
        if res.fun <= objs.min():
            theta_hat = np.clip(res.x, box[:, 0], box[:, 1])
            c1, c2, t_n = _profiled(theta_hat, family, y, h_vals, w, cfg)
        else:
            diagnostics["optimizer_stall"] = True
            theta_hat = start
            c1, c2, t_n = _profiled(start, family, y, h_vals, w, cfg)

    gamma = GammaPoint(c1=c1, c2=c2, theta=np.atleast_1d(theta_hat))
    return float(t_n), gamma, diagnostics


def empirical_M(gamma: GammaPoint, data: Dataset, h_vals, weight: WeightFn,
                family: ParametricFamily) -> float:
    """Sample mean of w (h_hat c1 + c2 - Lambda_theta)^2: the T_n objective over n."""
    w = weight.weights(data.y)
    lam = np.asarray(family.eval(gamma.theta, data.y), dtype=float)
    h_vals = np.asarray(h_vals, dtype=float)
    r = h_vals * gamma.c1 + gamma.c2 - lam
    return float(np.sum(w * r * r)) / data.n
