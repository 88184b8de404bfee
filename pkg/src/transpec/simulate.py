"""Data generators for null, fixed and local alternatives, and the
rejection-probability study harness.

Design defaults follow the simulation study: g(X) = 4X - 1, X ~ U(0,1),
eps ~ N(0,1), Yeo-Johnson null classes, deviation directions
r1 = 5 * Phi, r2 = exp, r3 = y^3.  All alternative constructions are
anchor-normalized so that h(0) = 0 and h(1) = 1 exactly and the c = 0
mixture degenerates to the null generator bit for bit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.special import ndtr

from .bootstrap import BootstrapConfig, GofReport, gof_test
from .data import Dataset
from .errors import NonMonotoneMixture, StatisticalInputError
from .families import get_family, invert_monotone, normalize
from .npt import NptConfig, estimate_h
from .parallel import derived_seed, parallel_map, substream
from .statistic import TestConfig, WeightFn, compute_Tn

__all__ = [
    "SimScenario",
    "StudyResult",
    "R_FUNCS",
    "gen_null",
    "gen_fixed_alternative",
    "gen_local_alternative",
    "rejection_study",
    "curve_grid",
    "table1_grid",
    "table4_grid",
]

R_FUNCS: Dict[str, Callable] = {
    "r1": lambda y: 5.0 * ndtr(np.asarray(y, dtype=float)),
    "r2": lambda y: np.exp(np.asarray(y, dtype=float)),
    "r3": lambda y: np.asarray(y, dtype=float) ** 3,
}


@dataclass(frozen=True)
class SimScenario:
    """One data-generating cell of the study."""

    theta0: float
    n: int = 100
    alternative: Optional[Tuple] = None  # None | ("fixed", r_id, c) | ("local", r_id, scale)
    family: str = "yeo-johnson"

    def __post_init__(self):
        if self.n < 20:
            raise StatisticalInputError("n must be at least 20")
        if self.alternative is not None:
            kind = self.alternative[0]
            if kind == "fixed":
                _, r_id, c = self.alternative
                if r_id not in R_FUNCS:
                    raise StatisticalInputError(f"unknown deviation {r_id!r}")
                if not 0.0 <= c <= 1.0:
                    raise StatisticalInputError("mixture weight c must be in [0, 1]")
            elif kind == "local":
                _, r_id, _ = self.alternative
                if r_id not in R_FUNCS:
                    raise StatisticalInputError(f"unknown deviation {r_id!r}")
            else:
                raise StatisticalInputError(f"unknown alternative kind {kind!r}")

    def label(self) -> str:
        if self.alternative is None:
            return f"theta0={self.theta0:g} null"
        kind, r_id, par = self.alternative
        key = "c" if kind == "fixed" else "scale"
        return f"theta0={self.theta0:g} {r_id} {key}={par:g}"


def _g(x):
    return 4.0 * np.asarray(x, dtype=float)[..., 0] - 1.0


def _draw_sx(n: int, rng: np.random.Generator):
    x = rng.random((n, 1))
    eps = rng.standard_normal(n)
    return x, _g(x) + eps


def gen_null(scenario: SimScenario, seed: int) -> Dataset:
    """Y_i = h0^{-1}(g(X_i) + eps_i) with the anchored null transformation."""
    rng = substream(seed, 0)
    x, s = _draw_sx(scenario.n, rng)
    h0 = normalize(get_family(scenario.family), scenario.theta0)
    return Dataset(x=x, y=h0.invert(s))


def _check_increasing(f, lo=-6.0, hi=6.0, n=2001, what="transformation"):
    grid = np.linspace(lo, hi, n)
    vals = np.asarray(f(grid), dtype=float)
    if not np.all(np.diff(vals) > 0.0):
        raise NonMonotoneMixture(f"generated {what} is not increasing on [{lo}, {hi}]")


def _fixed_hinv(scenario: SimScenario):
    """The anchored convex-combination inverse transformation.

    Built from the anchored null inverse h0^{-1} (which already maps
    0 -> 0 and 1 -> 1) mixed with the anchored deviation direction, so the
    c = 0 case is exactly h0^{-1}.
    """
    _, r_id, c = scenario.alternative
    r = R_FUNCS[r_id]
    h0 = normalize(get_family(scenario.family), scenario.theta0)
    if c == 0.0:
        return h0.invert
    r0 = float(r(0.0))
    denom = (1.0 - c) * 1.0 + c * (float(r(1.0)) - r0)

    def hinv(s):
        return ((1.0 - c) * h0.invert(s) + c * (r(s) - r0)) / denom

    return hinv


def gen_fixed_alternative(scenario: SimScenario, seed: int) -> Dataset:
    """Y_i = h^{-1}(g(X_i) + eps_i) with the convex-combination inverse."""
    if scenario.alternative is None or scenario.alternative[0] != "fixed":
        raise StatisticalInputError("scenario is not a fixed alternative")
    hinv = _fixed_hinv(scenario)
    _check_increasing(hinv, what="inverse transformation")
    rng = substream(seed, 0)
    x, s = _draw_sx(scenario.n, rng)
    return Dataset(x=x, y=np.asarray(hinv(s), dtype=float))


def _local_h(scenario: SimScenario):
    """h = h0 + n^{-1/2} * r0 with the anchored deviation r0."""
    _, r_id, scale = scenario.alternative
    r_fn = R_FUNCS[r_id]
    family = get_family(scenario.family)
    h0 = normalize(family, scenario.theta0)
    if scale == 0.0:
        return h0, h0.invert
    rate = scale / np.sqrt(scenario.n)
    r_at0 = float(r_fn(0.0))
    r_span = float(r_fn(1.0)) - r_at0

    def r0(y):
        return (r_fn(y) - r_at0 - h0(y) * r_span) / h0.scale

    def h(y):
        return h0(y) + rate * r0(y)

    def hinv(s):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.array([invert_monotone(h, si, bracket=(-2.0, 2.0)) for si in s])
        return out

    return h, hinv


def gen_local_alternative(scenario: SimScenario, seed: int) -> Dataset:
    """Y_i from the n^{-1/2}-drifting transformation sequence."""
    if scenario.alternative is None or scenario.alternative[0] != "local":
        raise StatisticalInputError("scenario is not a local alternative")
    h, hinv = _local_h(scenario)
    _check_increasing(h)
    rng = substream(seed, 0)
    x, s = _draw_sx(scenario.n, rng)
    return Dataset(x=x, y=np.asarray(hinv(s), dtype=float))


def generate(scenario: SimScenario, seed: int) -> Dataset:
    if scenario.alternative is None:
        return gen_null(scenario, seed)
    if scenario.alternative[0] == "fixed":
        return gen_fixed_alternative(scenario, seed)
    return gen_local_alternative(scenario, seed)


@dataclass
class StudyResult:
    cells: List[dict]
    alphas: Tuple[float, ...]
    runs: int
    seed: int
    config_echo: dict
    runtime_seconds: float

    def to_dict(self) -> dict:
        return {
            "cells": self.cells,
            "alphas": list(self.alphas),
            "runs": self.runs,
            "seed": self.seed,
            "config_echo": self.config_echo,
            "runtime_seconds": self.runtime_seconds,
        }


def _study_task(args):
    (scenario, alphas, npt_cfg, test_cfg, boot_template, seed, cell_idx, run_idx) = args
    data_seed = derived_seed(seed, cell_idx, run_idx, 0)
    boot_seed = derived_seed(seed, cell_idx, run_idx, 1)
    data = generate(scenario, data_seed)
    boot_cfg = BootstrapConfig(
        seed=boot_seed, m=boot_template.m, B=boot_template.B,
        a_n=boot_template.a_n, b_n=boot_template.b_n,
        kappa=boot_template.kappa, ell=boot_template.ell,
        g_bandwidth=boot_template.g_bandwidth,
    )
    try:
        report = gof_test(data, get_family(scenario.family), alphas,
                          npt_cfg, test_cfg, boot_cfg, workers=1)
        return cell_idx, run_idx, "ok", {a: report.decisions[a] for a in alphas}
    except StatisticalInputError as exc:
        return cell_idx, run_idx, f"failed:{type(exc).__name__}", None


def rejection_study(scenarios: List[SimScenario], alphas, runs: int, seed: int,
                    npt_cfg: Optional[NptConfig] = None,
                    test_cfg: Optional[TestConfig] = None,
                    boot_cfg: Optional[BootstrapConfig] = None,
                    workers: int = 1) -> StudyResult:
    """Monte Carlo rejection rates over a scenario grid; deterministic per seed."""
    if runs < 10:
        raise StatisticalInputError("need at least 10 runs per cell")
    npt_cfg = npt_cfg or NptConfig()
    test_cfg = test_cfg or TestConfig()
    boot_cfg = boot_cfg or BootstrapConfig(seed=0)
    alphas = tuple(float(a) for a in alphas)
    t0 = time.time()

    tasks = [
        (sc, alphas, npt_cfg, test_cfg, boot_cfg, seed, ci, ri)
        for ci, sc in enumerate(scenarios)
        for ri in range(runs)
    ]
    results = parallel_map(_study_task, tasks, workers=workers)

    cells = []
    for ci, sc in enumerate(scenarios):
        mine = [r for r in results if r[0] == ci]
        ok = [r for r in mine if r[2] == "ok"]
        failures: Dict[str, int] = {}
        for r in mine:
            if r[2] != "ok":
                failures[r[2]] = failures.get(r[2], 0) + 1
        n_ok = len(ok)
        n_fail = len(mine) - n_ok
        valid = n_fail < 0.05 * len(mine)
        cell: dict = {
            "label": sc.label(),
            "theta0": sc.theta0,
            "alternative": list(sc.alternative) if sc.alternative else None,
            "n": sc.n,
            "runs_requested": runs,
            "runs_ok": n_ok,
            "failures": failures,
            "valid": valid,
            "rates": {},
        }
        for a in alphas:
            if n_ok:
                p = float(np.mean([r[3][a] for r in ok]))
                se = float(np.sqrt(p * (1.0 - p) / n_ok))
            else:
                p, se = float("nan"), float("nan")
            cell["rates"][f"{a:g}"] = {"rate": p, "se": se}
        cells.append(cell)

    echo = {
        "npt": {"n_x": npt_cfg.n_x, "n_u": npt_cfg.n_u, "kernel": npt_cfg.kernel},
        "test": {"theta_grid": test_cfg.theta_grid,
                 "weight": {"trim_lower": test_cfg.weight.trim_lower,
                            "trim_upper": test_cfg.weight.trim_upper}},
        "bootstrap": {"m": boot_cfg.m, "B": boot_cfg.B,
                      "a_n": boot_cfg.a_n, "b_n": boot_cfg.b_n},
    }
    return StudyResult(cells=cells, alphas=alphas, runs=runs, seed=seed,
                       config_echo=echo, runtime_seconds=time.time() - t0)


def table1_grid(n: int = 100, theta0s=(0.0, 0.5, 1.0, 2.0),
                r_ids=("r1", "r2", "r3"), cs=(0.2, 0.4, 0.6, 0.8, 1.0)) -> List[SimScenario]:
    """The full main-table grid: null rows plus every (r, c) alternative."""
    cells = [SimScenario(theta0=t, n=n) for t in theta0s]
    cells += [
        SimScenario(theta0=t, n=n, alternative=("fixed", r, c))
        for r in r_ids for c in cs for t in theta0s
    ]
    return cells


def table4_grid(n: int = 100, theta0s=(1.0, 2.0), cs=(0.2, 0.4, 0.6, 0.8, 1.0)) -> List[SimScenario]:
    """The trimmed-weighting table: r1 alternatives at theta0 in {1, 2}."""
    cells = [SimScenario(theta0=t, n=n) for t in theta0s]
    cells += [
        SimScenario(theta0=t, n=n, alternative=("fixed", "r1", c))
        for t in theta0s for c in cs
    ]
    return cells


def curve_grid(theta0: float, r_id: str, c: float, y_range=(-2.0, 4.0),
               n_points: int = 201, fit_n: int = 100, seed: int = 1,
               npt_cfg: Optional[NptConfig] = None,
               test_cfg: Optional[TestConfig] = None) -> dict:
    """Tables behind the four-panel figures.

    Columns: y, the true transformation h, the fitted parametric curve
    (Lambda_theta_hat - c2_hat) / c1_hat from a fresh simulated sample, and
    the anchored null transformation as reference.
    """
    if n_points < 2:
        raise StatisticalInputError("need at least two grid points")
    scenario = SimScenario(theta0=theta0, n=fit_n,
                           alternative=("fixed", r_id, c) if c > 0 else None)
    family = get_family(scenario.family)
    h0 = normalize(family, theta0)

    ys = np.linspace(y_range[0], y_range[1], n_points)
    if c > 0:
        hinv = _fixed_hinv(scenario)
        h_true = np.array([invert_monotone(hinv, yi, bracket=(-2.0, 4.0)) for yi in ys])
    else:
        h_true = np.asarray(h0(ys), dtype=float)

    data = generate(scenario, derived_seed(seed, 0))
    npt_cfg = npt_cfg or NptConfig()
    test_cfg = test_cfg or TestConfig()
    support = test_cfg.weight.support(data.y)
    h_hat = estimate_h(data, npt_cfg, support)
    _, gamma, _ = compute_Tn(data, h_hat, family, test_cfg)
    lam = np.asarray(family.eval(gamma.theta, ys), dtype=float)
    h_fit = (lam - gamma.c2) / gamma.c1

    return {
        "y": ys,
        "h_true": h_true,
        "h_param_fit": h_fit,
        "null_part": np.asarray(h0(ys), dtype=float),
        "gamma_hat": gamma,
    }
