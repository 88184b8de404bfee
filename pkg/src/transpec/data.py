"""Paired-observation container shared by every estimation entry point."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StatisticalInputError

__all__ = ["Dataset"]


@dataclass(frozen=True)
class Dataset:
    """n paired observations (X_i in R^d_x, Y_i in R).

    All entries must be finite.  The identification anchors (0 and 1 by
    default) must lie inside the observed response range before the
    transformation estimator may run; that is checked at the estimation
    entry points because replacement anchors are allowed.
    """

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        y = np.asarray(self.y, dtype=float).ravel()
        if x.shape[0] != y.shape[0]:
            raise StatisticalInputError(
                f"x has {x.shape[0]} rows but y has {y.shape[0]} entries"
            )
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise StatisticalInputError("non-finite entries in dataset")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d_x(self) -> int:
        return self.x.shape[1]

    def require_estimable(self, anchors=(0.0, 1.0), min_n: int = 20) -> None:
        a, b = anchors
        if self.n < min_n:
            raise StatisticalInputError(f"need at least {min_n} observations, got {self.n}")
        if not (a < b):
            raise StatisticalInputError(f"anchors must satisfy a < b, got {anchors}")
        ymin, ymax = float(self.y.min()), float(self.y.max())
        if not (ymin <= a and b <= ymax):
            raise StatisticalInputError(
                f"anchors {anchors} outside observed response range [{ymin:g}, {ymax:g}]; "
                "supply replacement anchors inside the range"
            )
