"""Command-line interface: fit, test, relevant-test, simulate, limit-law, curves.

All randomness flows from the explicit --seed; commands that resample
refuse to run without one.  Reports are canonical JSON (see
docs/schema/report.schema.json), side tables are CSV.  Exit codes:
0 success, 2 statistical input problems, 1 internal errors.
"""

from __future__ import annotations

import functools
import json
import logging
import sys
import time
from pathlib import Path

import click
import numpy as np

from .bootstrap import BootstrapConfig, gof_test
from .errors import StatisticalInputError
from .families import get_family
from .npt import NptConfig, estimate_h
from .parallel import default_workers
from .relevant import RelevantConfig, relevant_test
from .report import build_report, read_dataset, study_csv_rows, write_csv, write_report
from .simulate import (
    SimScenario,
    curve_grid,
    rejection_study,
    table1_grid,
    table4_grid,
)
from .statistic import TestConfig, WeightFn, compute_Tn

log = logging.getLogger("transpec")


def _setup_logging():
    import os

    level = os.environ.get("TRANSPEC_LOG", "INFO").upper()
    logging.basicConfig(stream=sys.stderr, level=getattr(logging, level, logging.INFO),
                        format="%(levelname)s %(name)s: %(message)s")


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        _setup_logging()
        t0 = time.time()
        try:
            fn(*args, **kwargs)
        except StatisticalInputError as exc:
            log.error("%s: %s", type(exc).__name__, exc)
            sys.exit(2)
        except click.ClickException:
            raise
        except Exception as exc:  # internal failure
            log.error("internal error: %s: %s", type(exc).__name__, exc)
            sys.exit(1)
        log.info("done in %.2fs", time.time() - t0)

    return wrapper


def _npt_config(n_x, n_u, v_support, kernel, median_bw):
    vs = "auto"
    if v_support:
        lo, hi = (float(t) for t in v_support.split(","))
        vs = (lo, hi)
    return NptConfig(n_x=n_x, n_u=n_u, v_support=vs, kernel=kernel,
                     median_bandwidth=median_bw)


def _test_config(trim, theta_grid):
    weight = WeightFn(trim_lower=trim, trim_upper=trim) if trim else WeightFn()
    return TestConfig(theta_grid=theta_grid, weight=weight)


_npt_options = [
    click.option("--n-x", default=100, show_default=True, help="x-quadrature nodes"),
    click.option("--n-u", default=201, show_default=True, help="u-grid nodes"),
    click.option("--v-support", default="", help="lo,hi covariate weight support (default: auto)"),
    click.option("--kernel", default="biweight", show_default=True,
                 type=click.Choice(["biweight", "paper-exact"])),
    click.option("--median-bw", default=None, type=float,
                 help="smoothed-median bandwidth b (default 0.1 n^-1/4)"),
]


def _add_options(opts):
    def deco(fn):
        for opt in reversed(opts):
            fn = opt(fn)
        return fn

    return deco


@click.group()
def main():
    """Specification tests for parametric transformation classes."""


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--out", default="fit_report.json", show_default=True)
@click.option("--grid-out", default="", help="optional CSV of the fitted grid")
@_add_options(_npt_options)
@_guarded
def fit(data_path, out, grid_out, n_x, n_u, v_support, kernel, median_bw):
    """Estimate the transformation nonparametrically and report its grid."""
    data = read_dataset(data_path)
    cfg = _npt_config(n_x, n_u, v_support, kernel, median_bw)
    est = estimate_h(data, cfg)
    config = {"command": "fit", "data": str(data_path), "n_x": n_x, "n_u": n_u,
              "v_support": v_support or "auto", "kernel": kernel,
              "median_bw": median_bw}
    output = {
        "u_grid": est.u_grid.tolist(),
        "q_values": est.q_values.tolist(),
        "q_raw": est.q_raw.tolist(),
        "h_at_anchors": [float(est.eval(0.0)), float(est.eval(1.0))],
        "n": data.n,
    }
    write_report(out, build_report("fit", config, output))
    if grid_out:
        write_csv(grid_out, ["u", "q", "q_raw"],
                  zip(est.u_grid.tolist(), est.q_values.tolist(), est.q_raw.tolist()))
    click.echo(f"wrote {out}")


@main.command()
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--family", default="yeo-johnson", show_default=True)
@click.option("--alpha", "alphas", multiple=True, type=float, default=(0.05,),
              show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--b", "b_reps", default=250, show_default=True, help="bootstrap replications")
@click.option("--m", default=None, type=int, help="bootstrap sample size (default n)")
@click.option("--a-n", default=0.1, show_default=True)
@click.option("--b-n", default=0.1, show_default=True)
@click.option("--trim", default=0.0, show_default=True,
              help="two-sided quantile trimming of the weight")
@click.option("--theta-grid", default=41, show_default=True)
@click.option("--workers", default=None, type=int)
@click.option("--out", default="test_report.json", show_default=True)
@_add_options(_npt_options)
@_guarded
def test(data_path, family, alphas, seed, b_reps, m, a_n, b_n, trim, theta_grid,
         workers, out, n_x, n_u, v_support, kernel, median_bw):
    """Goodness-of-fit test with smooth-bootstrap critical values."""
    data = read_dataset(data_path)
    fam = get_family(family)
    npt_cfg = _npt_config(n_x, n_u, v_support, kernel, median_bw)
    test_cfg = _test_config(trim, theta_grid)
    boot_cfg = BootstrapConfig(seed=seed, m=m, B=b_reps, a_n=a_n, b_n=b_n)
    report = gof_test(data, fam, list(alphas), npt_cfg, test_cfg, boot_cfg,
                      workers=workers or default_workers())
    config = {"command": "test", "data": str(data_path), "family": family,
              "alphas": list(alphas), "seed": seed, "B": b_reps, "m": m,
              "a_n": a_n, "b_n": b_n, "trim": trim, "theta_grid": theta_grid,
              "n_x": n_x, "n_u": n_u, "v_support": v_support or "auto",
              "kernel": kernel, "median_bw": median_bw}
    write_report(out, build_report("test", config, report.to_dict()))
    click.echo(f"T_n = {report.t_n:.6g}, p* = {report.p_star:.4f} -> {out}")


@main.command("relevant-test")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True))
@click.option("--family", default="yeo-johnson", show_default=True)
@click.option("--eta", required=True, type=float)
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--block-size", default=None, type=int)
@click.option("--trim", default=0.0, show_default=True)
@click.option("--theta-grid", default=41, show_default=True)
@click.option("--out", default="relevant_report.json", show_default=True)
@_add_options(_npt_options)
@_guarded
def relevant(data_path, family, eta, alpha, block_size, trim, theta_grid, out,
             n_x, n_u, v_support, kernel, median_bw):
    """Precise-hypothesis test: reject when the model is closer than eta."""
    data = read_dataset(data_path)
    fam = get_family(family)
    cfg = RelevantConfig(eta=eta, alpha=alpha, m_n=block_size)
    report = relevant_test(data, fam, cfg, _npt_config(n_x, n_u, v_support, kernel, median_bw),
                           _test_config(trim, theta_grid))
    config = {"command": "relevant-test", "data": str(data_path), "family": family,
              "eta": eta, "alpha": alpha, "block_size": block_size, "trim": trim,
              "theta_grid": theta_grid, "n_x": n_x, "n_u": n_u,
              "v_support": v_support or "auto", "kernel": kernel,
              "median_bw": median_bw}
    write_report(out, build_report("relevant-test", config, report.to_dict()))
    click.echo(f"statistic = {report.statistic:.4f}, reject = {report.reject} -> {out}")


@main.command()
@click.option("--table", type=click.Choice(["1", "4"]), required=True)
@click.option("--runs", default=200, show_default=True, type=int)
@click.option("--seed", required=True, type=int)
@click.option("--workers", default=None, type=int)
@click.option("--n", default=100, show_default=True, type=int)
@click.option("--b", "b_reps", default=250, show_default=True)
@click.option("--m", default=None, type=int)
@click.option("--theta0", "theta0s", multiple=True, type=float,
              help="restrict to these theta0 values")
@click.option("--r", "r_ids", multiple=True, type=click.Choice(["r1", "r2", "r3"]))
@click.option("--c", "cs", multiple=True, type=float)
@click.option("--out", default="study", show_default=True, help="output prefix")
@_guarded
def simulate(table, runs, seed, workers, n, b_reps, m, theta0s, r_ids, cs, out):
    """Rejection-probability study reproducing the paper-style tables."""
    if table == "1":
        cells = table1_grid(n=n, theta0s=theta0s or (0.0, 0.5, 1.0, 2.0),
                            r_ids=r_ids or ("r1", "r2", "r3"),
                            cs=cs or (0.2, 0.4, 0.6, 0.8, 1.0))
        test_cfg = TestConfig()
    else:
        cells = table4_grid(n=n, theta0s=theta0s or (1.0, 2.0),
                            cs=cs or (0.2, 0.4, 0.6, 0.8, 1.0))
        test_cfg = TestConfig(weight=WeightFn(trim_lower=0.05, trim_upper=0.05))
    boot_cfg = BootstrapConfig(seed=0, m=m, B=b_reps)
    result = rejection_study(cells, (0.05, 0.10), runs, seed,
                             test_cfg=test_cfg, boot_cfg=boot_cfg,
                             workers=workers or default_workers())
    config = {"command": "simulate", "table": table, "runs": runs, "seed": seed,
              "n": n, "B": b_reps, "m": m,
              "theta0": list(theta0s), "r": list(r_ids), "c": list(cs)}
    payload = result.to_dict()
    payload.pop("runtime_seconds", None)
    write_report(f"{out}.json", build_report("simulate", config, payload))
    header, rows = study_csv_rows(payload)
    write_csv(f"{out}.csv", header, rows)
    click.echo(f"wrote {out}.json and {out}.csv "
               f"({result.runtime_seconds:.1f}s)")


@main.command("limit-law")
@click.option("--theta0", required=True, type=float)
@click.option("--r", "r_id", default="", type=str, help="local-alternative direction")
@click.option("--scale", default=1.0, show_default=True, type=float)
@click.option("--n-local", default=100, show_default=True, type=int)
@click.option("--nodes", default=400, show_default=True, type=int)
@click.option("--sims", default=100000, show_default=True, type=int)
@click.option("--alpha", default=0.05, show_default=True, type=float)
@click.option("--seed", required=True, type=int)
@click.option("--out", default="limitlaw_report.json", show_default=True)
@_guarded
def limit_law(theta0, r_id, scale, n_local, nodes, sims, alpha, seed, out):
    """Nystrom diagnostic for the null / local-alternative limit law."""
    from .limitlaw import limit_objects, nystrom_limit_quantile
    from .oracle import standard_oracle

    alternative = ("local", r_id, scale) if r_id else None
    oracle = standard_oracle(theta0, alternative=alternative,
                             n_local=n_local if r_id else None)
    fam = get_family("yeo-johnson")
    objects = limit_objects(oracle, fam, theta0)
    result = nystrom_limit_quantile(objects, nodes, sims, alpha, seed)
    result["eigenvalues"] = result["eigenvalues"][:50].tolist()
    config = {"command": "limit-law", "theta0": theta0, "r": r_id, "scale": scale,
              "n_local": n_local, "nodes": nodes, "sims": sims, "alpha": alpha,
              "seed": seed}
    write_report(out, build_report("limit-law", config, result))
    click.echo(f"q({1 - alpha:g}) = {result['quantile']:.5g}, "
               f"trace = {result['trace']:.5g}, b = {result['b_const']:.5g} -> {out}")


@main.command()
@click.option("--theta0", required=True, type=float)
@click.option("--r", "r_id", required=True, type=click.Choice(["r1", "r2", "r3"]))
@click.option("--c", required=True, type=float)
@click.option("--points", default=201, show_default=True, type=int)
@click.option("--y-lo", default=-2.0, show_default=True, type=float)
@click.option("--y-hi", default=4.0, show_default=True, type=float)
@click.option("--seed", default=1, show_default=True, type=int)
@click.option("--out", default="curves.csv", show_default=True)
@_guarded
def curves(theta0, r_id, c, points, y_lo, y_hi, seed, out):
    """Curve tables behind the four-panel figures (plain CSV)."""
    tab = curve_grid(theta0, r_id, c, y_range=(y_lo, y_hi), n_points=points,
                     seed=seed)
    write_csv(out, ["y", "h_true", "h_param_fit", "null_part"],
              zip(tab["y"].tolist(), tab["h_true"].tolist(),
                  tab["h_param_fit"].tolist(), tab["null_part"].tolist()))
    click.echo(f"wrote {out}")


if __name__ == "__main__":
    main()
