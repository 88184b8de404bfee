"""Run reports: canonical JSON with a config hash, plus CSV side tables.

Reports contain no wall-clock data, so identical (config, seed) runs are
byte-identical regardless of worker count; elapsed time goes to the log.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset
from .errors import MissingColumn, ParseError

__all__ = ["config_hash", "build_report", "write_report", "read_dataset",
           "write_csv", "study_csv_rows"]


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(_canonical(config).encode("utf-8")).hexdigest()


def build_report(command: str, config: dict, output: dict) -> dict:
    return {
        "tool": "transpec",
        "version": __version__,
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "output": output,
    }


def write_report(path, report: dict) -> None:
    text = json.dumps(report, sort_keys=True, indent=2) + "\n"
    Path(path).write_text(text, encoding="utf-8")


def read_dataset(path) -> Dataset:
    """CSV with a header row naming y and x1..xd; any non-finite cell is an error."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file", line=1)
        header = [h.strip() for h in header]
        if "y" not in header:
            raise MissingColumn(f"{path}: no column named 'y'")
        d = 1
        while f"x{d + 1}" in header:
            d += 1
        x_cols = [f"x{j}" for j in range(1, d + 1)]
        for c in x_cols:
            if c not in header:
                raise MissingColumn(f"{path}: no column named '{c}'")
        y_idx = header.index("y")
        x_idx = [header.index(c) for c in x_cols]

        ys, xs = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                yv = float(row[y_idx])
                xv = [float(row[j]) for j in x_idx]
            except (ValueError, IndexError) as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}", line=lineno)
            if not np.isfinite(yv) or not all(np.isfinite(v) for v in xv):
                raise ParseError(
                    f"{path}: line {lineno}: non-finite value", line=lineno)
            ys.append(yv)
            xs.append(xv)
    if not ys:
        raise ParseError(f"{path}: no data rows", line=2)
    return Dataset(x=np.asarray(xs), y=np.asarray(ys))


def write_csv(path, header, rows) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def study_csv_rows(study_dict: dict):
    """Flatten a study result into table rows mirroring the paper layout."""
    header = ["label", "theta0", "alternative", "n", "runs_ok"]
    alphas = study_dict["alphas"]
    for a in alphas:
        header += [f"rate_a{a:g}", f"se_a{a:g}"]
    rows = []
    for cell in study_dict["cells"]:
        alt = cell["alternative"]
        row = [cell["label"], cell["theta0"],
               "null" if alt is None else f"{alt[1]}:{alt[2]:g}",
               cell["n"], cell["runs_ok"]]
        for a in alphas:
            r = cell["rates"][f"{a:g}"]
            row += [r["rate"], r["se"]]
        rows.append(row)
    return header, rows
