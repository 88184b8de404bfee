"""Precise-hypothesis test: is the parametric class within distance eta?

Rejecting H0': min_theta d(h, Lambda_theta) >= eta certifies the model as
good enough.  The variance of T_n / n is estimated by a positional block
scheme that refits the transformation on consecutive subsamples.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np
from scipy.stats import norm

from .data import Dataset
from .errors import BlockEstimatorFailure, StatisticalInputError
from .families import ParametricFamily
from .npt import NptConfig, NptEstimate, estimate_h
from .parallel import substream
from .statistic import GammaPoint, TestConfig, compute_Tn

__all__ = ["RelevantConfig", "RelevantReport", "sigma2_hat", "relevant_test"]


@dataclass
class RelevantConfig:
    eta: float
    alpha: float = 0.05
    m_n: Optional[int] = None  # block size; floor(n^(2/3)) when None
    shuffle_blocks: bool = False
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.eta <= 0:
            raise StatisticalInputError("eta must be positive")
        if not 0.0 < self.alpha < 1.0:
            raise StatisticalInputError("alpha must be in (0, 1)")

    def block_size(self, n: int) -> int:
        m = self.m_n if self.m_n is not None else int(n ** (2.0 / 3.0))
        if m < 20:
            raise StatisticalInputError(f"block size {m} < 20")
        if n < 2 * m:
            raise StatisticalInputError(f"need n >= 2 m_n, got n={n}, m_n={m}")
        return m


@dataclass
class RelevantReport:
    statistic: float
    sigma2_hat: float
    eta: float
    alpha: float
    reject: bool
    m_hat: float  # T_n / n, the estimate of M(gamma_0)
    t_n: float
    gamma_hat: GammaPoint
    m_n: int
    q_blocks: int
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "sigma2_hat": self.sigma2_hat,
            "eta": self.eta,
            "alpha": self.alpha,
            "reject": bool(self.reject),
            "m_hat": self.m_hat,
            "t_n": self.t_n,
            "gamma_hat": {
                "c1": self.gamma_hat.c1,
                "c2": self.gamma_hat.c2,
                "theta": [float(t) for t in np.atleast_1d(self.gamma_hat.theta)],
            },
            "m_n": self.m_n,
            "q_blocks": self.q_blocks,
            "diagnostics": self.diagnostics,
        }


def sigma2_hat(data: Dataset, h_hat: NptEstimate, gamma_hat: GammaPoint,
               family: ParametricFamily, weight, m_n: int,
               npt_cfg: NptConfig, order=None) -> float:
    """Block average of squared subsample-vs-full contrasts.

    Each block refits the transformation on its m_n consecutive
    observations; leftovers beyond q * m_n are ignored.  Blocks are
    positional, so the value depends on the input order unless a seeded
    permutation is requested by the caller.
    """
    n = data.n
    q = n // m_n
    if q < 2:
        raise StatisticalInputError(f"fewer than two blocks: n={n}, m_n={m_n}")
    idx = np.arange(n) if order is None else np.asarray(order)

    y_all = data.y
    w_all = weight.weights(y_all)
    lam = np.asarray(family.eval(gamma_hat.theta, y_all), dtype=float)
    h_vals = np.asarray(h_hat.eval(y_all), dtype=float)
    resid = h_vals * gamma_hat.c1 + gamma_hat.c2 - lam
    wr2 = w_all * resid**2
    mean_wr2 = float(wr2.sum()) / n

    acc = 0.0
    for s in range(q):
        rows = idx[s * m_n:(s + 1) * m_n]
        block = Dataset(x=data.x[rows], y=data.y[rows])
        try:
            support = weight.support(block.y)
            h_s = estimate_h(block, npt_cfg, support)
        except StatisticalInputError as exc:
            raise BlockEstimatorFailure(
                f"block {s + 1}/{q} failed ({exc}); consider a larger m_n"
            ) from exc
        hs_vals = np.asarray(h_s.eval(y_all), dtype=float)
        term1 = (2.0 * np.sqrt(m_n) / n) * float(
            np.sum(w_all * (hs_vals - h_vals) * resid)
        )
        term2 = float(np.sum(wr2[rows] - mean_wr2)) / np.sqrt(m_n)
        acc += (term1 + term2) ** 2
    return acc / q


def relevant_test(data: Dataset, family: ParametricFamily, cfg: RelevantConfig,
                  npt_cfg: Optional[NptConfig] = None,
                  test_cfg: Optional[TestConfig] = None) -> RelevantReport:
    """Reject H0' when (T_n - n eta) / sqrt(n sigma2_hat) < u_alpha."""
    npt_cfg = npt_cfg or NptConfig()
    test_cfg = test_cfg or TestConfig()
    m_n = cfg.block_size(data.n)

    support = test_cfg.weight.support(data.y)
    h_hat = estimate_h(data, npt_cfg, support)
    t_n, gamma_hat, diag = compute_Tn(data, h_hat, family, test_cfg)

    order = None
    if cfg.shuffle_blocks:
        order = substream(cfg.shuffle_seed, 0).permutation(data.n)
    s2 = sigma2_hat(data, h_hat, gamma_hat, family, test_cfg.weight, m_n,
                    npt_cfg, order=order)
    if s2 <= 0.0:
        raise StatisticalInputError("sigma2_hat is not positive; raise m_n")

    n = data.n
    stat = (t_n - n * cfg.eta) / np.sqrt(n * s2)
    u_alpha = float(norm.ppf(cfg.alpha))
    return RelevantReport(
        statistic=float(stat), sigma2_hat=float(s2), eta=cfg.eta,
        alpha=cfg.alpha, reject=bool(stat < u_alpha), m_hat=t_n / n,
        t_n=t_n, gamma_hat=gamma_hat, m_n=m_n, q_blocks=n // m_n,
        diagnostics={"optimizer_stall": diag["optimizer_stall"],
                     "shuffled": cfg.shuffle_blocks},
    )
