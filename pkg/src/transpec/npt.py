"""Nonparametric transformation estimator.

Pipeline: empirical rescaling of the response, a kernel conditional-CDF
estimator, the cumulative ratio integral s1_hat, a smoothed weighted-median
solve Q_hat over covariate-wise CDF-ratio curves, and monotone interpolation
of the resulting grid.  The grid computation runs on the selected backend.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import isotonic_regression

from . import _backend
from .data import Dataset
from .errors import (
    DegenerateAnchors,
    EmptyNeighborhood,
    GridTooCoarse,
    StatisticalInputError,
    VanishingDenominator,
)
from .kernels import (
    BandwidthSet,
    Kernel,
    default_median_bandwidth,
    get_kernel,
    normal_reference_bandwidth,
)

__all__ = [
    "EmpiricalRescale",
    "NptConfig",
    "NptEstimate",
    "empirical_rescale",
    "cond_cdf",
    "cond_cdf_du",
    "cond_cdf_dx1",
    "s1_hat",
    "q_hat",
    "estimate_h",
]


class EmpiricalRescale:
    """T_hat(y) = (F_Y(y) - F_Y(a)) / (F_Y(b) - F_Y(a)) with the empirical CDF."""

    def __init__(self, y, anchors=(0.0, 1.0)):
        self.sorted_y = np.sort(np.asarray(y, dtype=float))
        self.n = self.sorted_y.size
        self.anchors = (float(anchors[0]), float(anchors[1]))
        fa = self._ecdf(self.anchors[0])
        fb = self._ecdf(self.anchors[1])
        if fb <= fa:
            raise DegenerateAnchors(
                f"F_hat({anchors[1]}) = {fb} <= F_hat({anchors[0]}) = {fa}"
            )
        self.f_a = fa
        self.f_b = fb

    def _ecdf(self, y):
        return np.searchsorted(self.sorted_y, y, side="right") / self.n

    def __call__(self, y):
        out = (self._ecdf(np.asarray(y, dtype=float)) - self.f_a) / (self.f_b - self.f_a)
        return out if np.ndim(out) else float(out)


def empirical_rescale(data: Dataset, anchors=(0.0, 1.0)) -> EmpiricalRescale:
    return EmpiricalRescale(data.y, anchors)


@dataclass
class NptConfig:
    """Configuration of the transformation estimator."""

    bandwidths: Union[str, BandwidthSet] = "normal-rule"
    n_x: int = 100
    n_u: int = 201
    v_support: Union[str, Tuple[float, float]] = "auto"
    kernel: str = "biweight"
    anchors: Tuple[float, float] = (0.0, 1.0)
    denominator_floor: float = 1e-8
    median_bandwidth: Optional[float] = None  # b; default 0.1 * n^(-1/4)
    v_trim: float = 0.1  # central quantile range for the auto weight support
    v_shape: str = "biweight"  # tapered default; "uniform" available

    def resolve_bandwidths(self, us, x1) -> BandwidthSet:
        n = np.asarray(us).size
        b = self.median_bandwidth if self.median_bandwidth is not None else default_median_bandwidth(n)
        if isinstance(self.bandwidths, BandwidthSet):
            return replace(self.bandwidths)
        if self.bandwidths == "normal-rule":
            return BandwidthSet(
                h_u=normal_reference_bandwidth(us),
                h_x=normal_reference_bandwidth(x1),
                b=b,
            )
        raise StatisticalInputError(f"unknown bandwidth rule {self.bandwidths!r}")

    def resolve_v_support(self, x1) -> Tuple[float, float]:
        if self.v_support == "auto":
            lo, hi = np.quantile(x1, [self.v_trim, 1.0 - self.v_trim])
        else:
            lo, hi = self.v_support
        if not hi > lo:
            raise StatisticalInputError(f"weight support [{lo}, {hi}] has no length")
        xmin, xmax = float(np.min(x1)), float(np.max(x1))
        if lo < xmin or hi > xmax:
            raise StatisticalInputError(
                f"v support [{lo:g}, {hi:g}] outside observed covariate range"
            )
        return float(lo), float(hi)


def _x_weight_nodes(lo: float, hi: float, n_x: int, shape: str = "biweight"):
    """Midpoint rule for the covariate weight density on [lo, hi].

    The default density tapers to zero at the support edges (required for
    the influence-function structure); weights are normalized to sum to 1.
    """
    step = (hi - lo) / n_x
    nodes = lo + step * (np.arange(n_x) + 0.5)
    if shape == "uniform":
        w = np.full(n_x, 1.0 / n_x)
    elif shape == "biweight":
        z = 2.0 * (nodes - lo) / (hi - lo) - 1.0
        w = (1.0 - z**2) ** 2
        w = w / w.sum()
    else:
        raise StatisticalInputError(f"unknown weight shape {shape!r}")
    return nodes, w


def _kernel_weights(x_obs, x, kernel: Kernel, h_x):
    """Product-kernel weights K_hx(X_i - x) over covariate coordinates."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = np.broadcast_to(np.asarray(h_x, dtype=float), (x_obs.shape[1],))
    w = np.ones(x_obs.shape[0])
    for j in range(x_obs.shape[1]):
        w = w * kernel.eval((x_obs[:, j] - x[j]) / h[j]) / h[j]
    return w


def cond_cdf(u, x, data: Dataset, bandwidths: BandwidthSet, kernel: Kernel,
             anchors=(0.0, 1.0), us=None) -> float:
    """F_hat(u | x): kernel estimate of the conditional CDF of U given X = x."""
    if us is None:
        us = EmpiricalRescale(data.y, anchors)(data.y)
    a = _kernel_weights(data.x, x, kernel, bandwidths.h_x)
    den = a.sum()
    if den <= 0.0:
        raise EmptyNeighborhood(f"no observation within kernel range of x={x}")
    num = float(a @ kernel.integral((u - us) / bandwidths.h_u))
    return num / den


def cond_cdf_du(u, x, data: Dataset, bandwidths: BandwidthSet, kernel: Kernel,
                anchors=(0.0, 1.0), us=None) -> float:
    """d/du of the conditional-CDF estimate (the CDF factor replaced by the kernel)."""
    if us is None:
        us = EmpiricalRescale(data.y, anchors)(data.y)
    a = _kernel_weights(data.x, x, kernel, bandwidths.h_x)
    den = a.sum()
    if den <= 0.0:
        raise EmptyNeighborhood(f"no observation within kernel range of x={x}")
    num = float(a @ kernel.eval((u - us) / bandwidths.h_u)) / bandwidths.h_u
    return num / den


def cond_cdf_dx1(u, x, data: Dataset, bandwidths: BandwidthSet, kernel: Kernel,
                 anchors=(0.0, 1.0), us=None) -> float:
    """d/dx_1 of the conditional-CDF estimate, by the quotient rule."""
    if us is None:
        us = EmpiricalRescale(data.y, anchors)(data.y)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = np.broadcast_to(np.asarray(bandwidths.h_x, dtype=float), (data.x.shape[1],))
    a = _kernel_weights(data.x, x, kernel, bandwidths.h_x)
    # derivative of the first-coordinate factor
    z1 = (data.x[:, 0] - x[0]) / h[0]
    base = kernel.eval(z1) / h[0]
    dfac = -kernel.deriv(z1) / h[0] ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(base > 0.0, dfac / base, 0.0)
    ap = a * ratio
    den = a.sum()
    if den <= 0.0:
        raise EmptyNeighborhood(f"no observation within kernel range of x={x}")
    cdf_vals = kernel.integral((u - us) / bandwidths.h_u)
    return float((ap @ cdf_vals) * den - (a @ cdf_vals) * ap.sum()) / den**2


def s1_hat(u, x, data: Dataset, bandwidths: BandwidthSet, kernel: Kernel,
           anchors=(0.0, 1.0), floor: float = 1e-8, tol: float = 1e-8) -> float:
    """Integral over [0, u] of (dF/dr) / (dF/dx1), by adaptive quadrature."""
    us = EmpiricalRescale(data.y, anchors)(data.y)

    def integrand(r):
        den = cond_cdf_dx1(r, x, data, bandwidths, kernel, us=us)
        if abs(den) < floor:
            raise VanishingDenominator(
                f"|dF/dx1| = {abs(den):.3g} < {floor:g} at r={r:.4g}, x={x}"
            )
        return cond_cdf_du(r, x, data, bandwidths, kernel, us=us) / den

    if u == 0.0:
        return 0.0
    val, _ = quad(integrand, 0.0, u, epsrel=tol, epsabs=1e-12, limit=200)
    return float(val)


def q_hat(u, data: Dataset, config: NptConfig) -> float:
    """The smoothed weighted-median solve at a single u (reference path)."""
    t_hat = EmpiricalRescale(data.y, config.anchors)
    us = t_hat(data.y)
    x1 = data.x[:, 0]
    bw = config.resolve_bandwidths(us, x1)
    kernel = get_kernel(config.kernel)
    lo, hi = config.resolve_v_support(x1)
    nodes, vw = _x_weight_nodes(lo, hi, config.n_x, config.v_shape)
    s_u = np.array([s1_hat(u, xi, data, bw, kernel, config.anchors,
                           config.denominator_floor) for xi in nodes])
    s_1 = np.array([s1_hat(1.0, xi, data, bw, kernel, config.anchors,
                           config.denominator_floor) for xi in nodes])
    if np.any(np.abs(s_1) < config.denominator_floor):
        raise VanishingDenominator("|s1_hat(1, x)| below floor at a weight node")
    rho = s_u / s_1
    if rho.max() - rho.min() < 1e-13:
        return float(rho[0])
    return float(_backend.qhat_minimize(rho, vw, bw.b))


def _build_u_grid(u_lo: float, u_hi: float, n_u: int):
    """A grid over [min(u_lo,0), max(u_hi,1)] containing 0 and 1 as exact nodes."""
    lo = min(u_lo, 0.0)
    hi = max(u_hi, 1.0)
    bounds = [lo, 0.0, 1.0, hi]
    total = hi - lo
    parts = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if b - a <= 0.0:
            continue
        k = max(2, int(round(n_u * (b - a) / total)) + 1)
        parts.append(np.linspace(a, b, k))
    grid = np.unique(np.concatenate(parts))
    idx0 = int(np.searchsorted(grid, 0.0))
    idx1 = int(np.searchsorted(grid, 1.0))
    assert grid[idx0] == 0.0 and grid[idx1] == 1.0
    return grid, idx0, idx1


@dataclass
class NptEstimate:
    """The fitted transformation: Q_hat on a u-grid composed with T_hat.

    ``q_values`` is the isotonic projection of the raw solve; evaluation
    interpolates monotonically and continues linearly with the boundary
    slope outside the grid (extrapolations are counted).
    """

    u_grid: np.ndarray
    q_values: np.ndarray
    q_raw: np.ndarray
    t_hat: EmpiricalRescale
    s1_last: np.ndarray  # s1_hat(1, x) over the weight nodes, for diagnostics
    clamp_count: int = field(default=0)  # floored denominator nodes (see s1_grid)
    extrapolation_count: int = field(default=0)

    def __post_init__(self):
        self._interp = PchipInterpolator(self.u_grid, self.q_values, extrapolate=False)
        d = self._interp.derivative()
        self._d_lo = max(float(d(self.u_grid[0])), 0.0)
        self._d_hi = max(float(d(self.u_grid[-1])), 0.0)

    def eval_u(self, u):
        u = np.asarray(u, dtype=float)
        lo, hi = self.u_grid[0], self.u_grid[-1]
        below = u < lo
        above = u > hi
        n_out = int(np.count_nonzero(below) + np.count_nonzero(above))
        if n_out:
            self.extrapolation_count += n_out
        inner = self._interp(np.clip(u, lo, hi))
        out = np.where(
            below,
            self.q_values[0] + self._d_lo * (u - lo),
            np.where(above, self.q_values[-1] + self._d_hi * (u - hi), inner),
        )
        return out if out.ndim else float(out)

    def eval(self, y):
        return self.eval_u(self.t_hat(y))


def estimate_h(data: Dataset, config: NptConfig,
               weight_support: Optional[Tuple[float, float]] = None) -> NptEstimate:
    """Fit h_hat = Q_hat o T_hat on a u-grid covering the weight support."""
    data.require_estimable(config.anchors)
    if data.d_x != 1:
        raise NotImplementedError("the transformation estimator is implemented for d_x = 1")
    if config.n_u < 20:
        raise GridTooCoarse(f"n_u = {config.n_u} < 20")
    if config.kernel not in ("biweight", "paper-exact"):
        raise NotImplementedError("the grid path requires a biweight-class kernel")

    t_hat = EmpiricalRescale(data.y, config.anchors)
    us = t_hat(data.y)
    x1 = data.x[:, 0]
    bw = config.resolve_bandwidths(us, x1)
    lo, hi = config.resolve_v_support(x1)
    nodes, vw = _x_weight_nodes(lo, hi, config.n_x, config.v_shape)

    if weight_support is None:
        y_lo, y_hi = float(data.y.min()), float(data.y.max())
    else:
        y_lo, y_hi = weight_support
    grid, idx0, idx1 = _build_u_grid(float(t_hat(y_lo)), float(t_hat(y_hi)), config.n_u)

    s1, n_clamped = _backend.s1_grid(grid, idx0, us, x1, nodes, bw.h_u,
                                     float(np.ravel(bw.h_x)[0]),
                                     config.denominator_floor)
    q_raw = np.asarray(_backend.qhat_curve(s1, idx0, idx1, vw, bw.b,
                                           config.denominator_floor))
    q_iso = isotonic_regression(q_raw).x
    return NptEstimate(u_grid=grid, q_values=np.asarray(q_iso), q_raw=q_raw,
                       t_hat=t_hat, s1_last=s1[idx1].copy(),
                       clamp_count=n_clamped)
