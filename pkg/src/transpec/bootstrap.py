"""Smooth bootstrap: residual estimation, smoothed resampling, bootstrap
statistic, quantiles, and the full goodness-of-fit test.

Covariates are resampled from a kernel-smoothed empirical law, residuals of
the fitted parametric model likewise, and responses are regenerated through
the fitted normalized transformation.  Replications whose response range
misses an identification anchor are dropped and counted, never imputed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data import Dataset
from .errors import (
    DegenerateAnchors,
    EmptyNeighborhood,
    InsufficientReplications,
    StatisticalInputError,
)
from .families import LinearlyExtended, ParametricFamily, get_family, normalize
from .kernels import Kernel, get_kernel, normal_reference_bandwidth
from .npt import NptConfig, estimate_h
from .parallel import parallel_map, substream
from .statistic import GammaPoint, TestConfig, compute_Tn

__all__ = [
    "BootstrapConfig",
    "GofReport",
    "NadarayaWatson",
    "estimate_g",
    "residuals",
    "draw_bootstrap_sample",
    "bootstrap_statistic",
    "bootstrap_quantile",
    "gof_test",
]


@dataclass
class BootstrapConfig:
    seed: int
    m: Optional[int] = None  # bootstrap sample size; data size when None
    B: int = 250
    a_n: float = 0.1
    b_n: float = 0.1
    kappa: str = "uniform"
    ell: str = "gaussian"
    g_bandwidth: str = "normal-rule"

    def __post_init__(self):
        if self.B < 1:
            raise StatisticalInputError("B must be positive")
        if self.a_n <= 0 or self.b_n <= 0:
            raise StatisticalInputError("smoothing bandwidths must be positive")


class NadarayaWatson:
    """Kernel regression of z on x; evaluation clamps to the training hull.

    Points are passed as a (k, d) array, a length-d array for one point in
    d > 1 dimensions, or a plain vector of scalar points when d = 1.
    """

    def __init__(self, x, z, bandwidth, kernel: Kernel):
        self.x = np.asarray(x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.z = np.asarray(z, dtype=float)
        self.d = self.x.shape[1]
        self.h = np.broadcast_to(np.asarray(bandwidth, dtype=float), (self.d,))
        self.kernel = kernel
        self.lo = self.x.min(axis=0)
        self.hi = self.x.max(axis=0)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            pts, scalar = x.reshape(1, 1), True
        elif x.ndim == 1:
            if self.d == 1:
                pts, scalar = x[:, None], False
            else:
                pts, scalar = x[None, :], True
        else:
            pts, scalar = x, False
        pts = np.clip(pts, self.lo[None, :], self.hi[None, :])
        w = np.ones((pts.shape[0], self.x.shape[0]))
        for j in range(self.d):
            w *= self.kernel.eval((self.x[:, j][None, :] - pts[:, j][:, None]) / self.h[j])
        sw = w.sum(axis=1)
        if np.any(sw <= 0.0):
            raise EmptyNeighborhood("no observation within kernel range of an evaluation point")
        out = (w @ self.z) / sw
        return float(out[0]) if scalar else out


def estimate_g(data: Dataset, theta_hat, family: ParametricFamily,
               bandwidth="normal-rule", kernel: Optional[Kernel] = None) -> NadarayaWatson:
    """Nadaraya-Watson estimate of E[h_theta(Y) | X = x] for the fitted theta."""
    h_star = normalize(family, theta_hat)
    z = h_star(data.y)
    if isinstance(bandwidth, str):
        if bandwidth != "normal-rule":
            raise StatisticalInputError(f"unknown bandwidth rule {bandwidth!r}")
        h = np.array([normal_reference_bandwidth(data.x[:, j]) for j in range(data.d_x)])
    else:
        h = np.asarray(bandwidth, dtype=float)
    return NadarayaWatson(data.x, z, h, kernel or get_kernel("biweight"))


def residuals(data: Dataset, theta_hat, family: ParametricFamily,
              g_hat: NadarayaWatson) -> np.ndarray:
    """Centered parametric residuals h_theta(Y_i) - g_hat(X_i)."""
    h_star = normalize(family, theta_hat)
    eps = h_star(data.y) - g_hat(data.x)
    return eps - eps.mean()


def _noise(rng: np.random.Generator, kind: str, size):
    if kind == "uniform":
        return rng.uniform(-1.0, 1.0, size=size)
    if kind == "gaussian":
        return rng.standard_normal(size=size)
    raise StatisticalInputError(f"no sampler for smoothing kernel {kind!r}")


def draw_bootstrap_sample(data: Dataset, h_star_ext: LinearlyExtended,
                          g_hat: NadarayaWatson, eps_tilde: np.ndarray,
                          cfg: BootstrapConfig, replicate_index: int) -> Dataset:
    """One smoothed resample of size m, on its own deterministic RNG stream."""
    rng = substream(cfg.seed, replicate_index)
    n = data.n
    m = cfg.m or n
    idx = rng.integers(0, n, size=m)
    x_star = data.x[idx] + cfg.b_n * _noise(rng, cfg.kappa, (m, data.d_x))
    jdx = rng.integers(0, n, size=m)
    eps_star = eps_tilde[jdx] + cfg.a_n * _noise(rng, cfg.ell, m)
    y_star = h_star_ext.invert(g_hat(x_star) + eps_star)
    return Dataset(x=x_star, y=np.asarray(y_star, dtype=float))


def bootstrap_statistic(star_data: Dataset, family: ParametricFamily,
                        npt_cfg: NptConfig, test_cfg: TestConfig) -> float:
    """T*_{n,m}: the full statistic pipeline applied to a bootstrap sample."""
    a, b = npt_cfg.anchors
    if not (star_data.y.min() <= a and b <= star_data.y.max()):
        raise DegenerateAnchors(
            f"anchors {npt_cfg.anchors} outside bootstrap response range"
        )
    support = test_cfg.weight.support(star_data.y)
    h_hat = estimate_h(star_data, npt_cfg, support)
    t_n, _, _ = compute_Tn(star_data, h_hat, family, test_cfg)
    return t_n


def bootstrap_quantile(stats, alpha: float) -> float:
    """Smallest order statistic z with empirical CDF at z of at least alpha."""
    stats = np.sort(np.asarray(stats, dtype=float))
    b = stats.size
    if b < 1:
        raise StatisticalInputError("no bootstrap statistics")
    if not 0.0 < alpha < 1.0:
        raise StatisticalInputError("alpha must be in (0, 1)")
    k = int(np.ceil(alpha * b))
    return float(stats[k - 1])


@dataclass
class GofReport:
    t_n: float
    gamma_hat: GammaPoint
    alphas: Tuple[float, ...]
    q_star: Dict[float, float]
    p_star: float
    decisions: Dict[float, bool]
    b_used: int
    m_used: int
    n: int
    seed: int
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "t_n": self.t_n,
            "gamma_hat": {
                "c1": self.gamma_hat.c1,
                "c2": self.gamma_hat.c2,
                "theta": [float(t) for t in np.atleast_1d(self.gamma_hat.theta)],
            },
            "alphas": list(self.alphas),
            "q_star": {f"{a:g}": v for a, v in self.q_star.items()},
            "p_star": self.p_star,
            "decisions": {f"{a:g}": bool(d) for a, d in self.decisions.items()},
            "b_used": self.b_used,
            "m_used": self.m_used,
            "n": self.n,
            "seed": self.seed,
            "diagnostics": self.diagnostics,
        }


def _replicate_task(args):
    (family_name, theta_hat, x, y, eps_tilde, npt_cfg, test_cfg, cfg, rep,
     window) = args
    family = get_family(family_name)
    data = Dataset(x=x, y=y)
    h_star = normalize(family, theta_hat)
    h_ext = LinearlyExtended(h_star, *window)
    g_hat = estimate_g(data, theta_hat, family, cfg.g_bandwidth)
    star = draw_bootstrap_sample(data, h_ext, g_hat, eps_tilde, cfg, rep)
    try:
        t = bootstrap_statistic(star, family, npt_cfg, test_cfg)
        return rep, "ok", t, h_ext.extension_count
    except DegenerateAnchors:
        return rep, "anchor", np.nan, h_ext.extension_count
    except StatisticalInputError as exc:
        return rep, f"error:{type(exc).__name__}", np.nan, h_ext.extension_count


def gof_test(data: Dataset, family: ParametricFamily, alphas,
             npt_cfg: Optional[NptConfig] = None,
             test_cfg: Optional[TestConfig] = None,
             boot_cfg: Optional[BootstrapConfig] = None,
             workers: int = 1) -> GofReport:
    """The full goodness-of-fit test with smooth-bootstrap critical values."""
    npt_cfg = npt_cfg or NptConfig()
    test_cfg = test_cfg or TestConfig()
    if boot_cfg is None:
        raise StatisticalInputError("a BootstrapConfig with an explicit seed is required")
    alphas = tuple(float(a) for a in alphas)

    support = test_cfg.weight.support(data.y)
    h_hat = estimate_h(data, npt_cfg, support)
    t_n, gamma_hat, diag_tn = compute_Tn(data, h_hat, family, test_cfg)

    theta_hat = gamma_hat.theta
    span = float(data.y.max() - data.y.min())
    window = (float(data.y.min()) - 2.0 * max(span, 1.0),
              float(data.y.max()) + 2.0 * max(span, 1.0))

    if family.name not in ("yeo-johnson",) and workers > 1:
        workers = 1  # custom families may not reconstruct in worker processes

    # residuals are replicate-independent; compute once and share
    g_hat = estimate_g(data, theta_hat, family, boot_cfg.g_bandwidth)
    eps_tilde = residuals(data, theta_hat, family, g_hat)
    tasks = [
        (family.name, theta_hat, data.x, data.y, eps_tilde, npt_cfg, test_cfg,
         boot_cfg, rep, window)
        for rep in range(1, boot_cfg.B + 1)
    ]
    results = parallel_map(_replicate_task, tasks, workers=workers)

    stats: List[float] = []
    dropped_anchor = 0
    dropped_error: Dict[str, int] = {}
    extension_count = 0
    for _, status, t, ext in results:
        extension_count += ext
        if status == "ok":
            stats.append(t)
        elif status == "anchor":
            dropped_anchor += 1
        else:
            dropped_error[status] = dropped_error.get(status, 0) + 1

    b_total = boot_cfg.B
    b_used = len(stats)
    if b_used < 0.8 * b_total:
        raise InsufficientReplications(
            f"only {b_used}/{b_total} bootstrap replications succeeded"
        )
    stats_arr = np.asarray(stats)
    q_star = {a: bootstrap_quantile(stats_arr, 1.0 - a) for a in alphas}
    decisions = {a: bool(t_n > q_star[a]) for a in alphas}
    p_star = float(np.mean(stats_arr >= t_n))

    diagnostics = {
        "dropped_anchor": dropped_anchor,
        "dropped_error": dropped_error,
        "extension_count": extension_count,
        "optimizer_stall": diag_tn["optimizer_stall"],
        "h_extrapolations": h_hat.extrapolation_count,
        "denominator_clamps": h_hat.clamp_count,
    }
    return GofReport(
        t_n=t_n, gamma_hat=gamma_hat, alphas=alphas, q_star=q_star,
        p_star=p_star, decisions=decisions, b_used=b_used,
        m_used=boot_cfg.m or data.n, n=data.n, seed=boot_cfg.seed,
        diagnostics=diagnostics,
    )
