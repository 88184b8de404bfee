"""Parametric transformation classes and their normalized (anchored) versions.

A family provides pointwise evaluation together with analytic first and
second parameter derivatives.  The shipped family is Yeo-Johnson with
parameter box [0, 2]; further families can be registered programmatically.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from .errors import BracketExhausted, DegenerateScale

__all__ = [
    "ParametricFamily",
    "YeoJohnsonFamily",
    "NormalizedTransform",
    "normalize",
    "invert_monotone",
    "yeo_johnson_eval",
    "yeo_johnson_grad",
    "yeo_johnson_hess",
    "get_family",
    "register_family",
    "LinearlyExtended",
]

# series switch-over widths for the removable singularities at theta=0, 2
_EVAL_EPS = 1e-6
_GRAD_EPS = 1e-4
_HESS_EPS = 1e-3


def _g_ratio(t, a):
    """(exp(t*a)*(t*a - 1) + 1) / t**2 with its t -> 0 limit a**2/2."""
    t = np.asarray(t, dtype=float)
    a = np.asarray(a, dtype=float)
    small = np.abs(t) < _GRAD_EPS
    ts = np.where(small, 1.0, t)
    direct = (np.exp(ts * a) * (ts * a - 1.0) + 1.0) / ts**2
    series = a**2 / 2.0 + t * a**3 / 3.0 + t**2 * a**4 / 8.0
    return np.where(small, series, direct)


def _h_ratio(t, a):
    """d/dt of _g_ratio, with its t -> 0 limit a**3/3."""
    t = np.asarray(t, dtype=float)
    a = np.asarray(a, dtype=float)
    small = np.abs(t) < _HESS_EPS
    ts = np.where(small, 1.0, t)
    e = np.exp(ts * a)
    direct = (a**2 * ts**2 * e - 2.0 * e * (ts * a - 1.0) - 2.0) / ts**3
    series = a**3 / 3.0 + t * a**4 / 4.0 + t**2 * a**5 / 10.0
    return np.where(small, series, direct)


def yeo_johnson_eval(theta: float, y):
    """Four-branch Yeo-Johnson transform, continuous across theta in {0, 2} and y = 0."""
    y = np.asarray(y, dtype=float)
    pos = y >= 0
    a = np.log1p(np.abs(y))
    t = np.where(pos, theta, 2.0 - theta)
    small = np.abs(t) < _EVAL_EPS
    ts = np.where(small, 1.0, t)
    direct = np.expm1(ts * a) / ts
    series = a + t * a**2 / 2.0 + t**2 * a**3 / 6.0
    val = np.where(small, series, direct)
    out = np.where(pos, val, -val)
    return out if out.ndim else float(out)


def yeo_johnson_grad(theta: float, y):
    """Analytic d/dtheta of the Yeo-Johnson transform (limits taken at the branch points)."""
    y = np.asarray(y, dtype=float)
    pos = y >= 0
    a = np.log1p(np.abs(y))
    t = np.where(pos, theta, 2.0 - theta)
    out = _g_ratio(t, a)
    return out if out.ndim else float(out)


def yeo_johnson_hess(theta: float, y):
    """Analytic d^2/dtheta^2 of the Yeo-Johnson transform."""
    y = np.asarray(y, dtype=float)
    pos = y >= 0
    a = np.log1p(np.abs(y))
    t = np.where(pos, theta, 2.0 - theta)
    out = np.where(pos, _h_ratio(t, a), -_h_ratio(t, a))
    return out if out.ndim else float(out)


def yeo_johnson_inverse(theta: float, z):
    """Closed-form inverse; total on the real line for theta in [0, 2]."""
    z = np.asarray(z, dtype=float)
    pos = z >= 0
    t = np.where(pos, theta, 2.0 - theta)
    zz = np.where(pos, z, -z)
    small = np.abs(t) < 1e-12
    ts = np.where(small, 1.0, t)
    y = np.where(small, np.expm1(zz), np.expm1(np.log1p(ts * zz) / ts))
    out = np.where(pos, y, -y)
    return out if out.ndim else float(out)


@dataclass
class ParametricFamily:
    """A transformation class {Lambda_theta} with parameter box Theta.

    ``eval``/``grad_theta``/``hess_theta`` take ``theta`` as a length-d
    array and a point array ``y``; the gradient appends an axis of length
    ``theta_dim`` and the Hessian two such axes.  ``inverse`` is optional;
    when absent, inversion falls back to :func:`invert_monotone`.
    """

    name: str
    theta_dim: int
    theta_box: np.ndarray  # shape (theta_dim, 2)
    eval: Callable
    grad_theta: Callable
    hess_theta: Callable
    inverse: Optional[Callable] = None

    def contains(self, theta) -> bool:
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return bool(
            np.all(theta >= self.theta_box[:, 0]) and np.all(theta <= self.theta_box[:, 1])
        )


def YeoJohnsonFamily() -> ParametricFamily:
    def _eval(theta, y):
        return yeo_johnson_eval(float(np.atleast_1d(theta)[0]), y)

    def _grad(theta, y):
        g = yeo_johnson_grad(float(np.atleast_1d(theta)[0]), y)
        return np.asarray(g, dtype=float)[..., None]

    def _hess(theta, y):
        h = yeo_johnson_hess(float(np.atleast_1d(theta)[0]), y)
        return np.asarray(h, dtype=float)[..., None, None]

    def _inverse(theta, z):
        return yeo_johnson_inverse(float(np.atleast_1d(theta)[0]), z)

    return ParametricFamily(
        name="yeo-johnson",
        theta_dim=1,
        theta_box=np.array([[0.0, 2.0]]),
        eval=_eval,
        grad_theta=_grad,
        hess_theta=_hess,
        inverse=_inverse,
    )


_REGISTRY: dict = {}


def register_family(name: str, factory: Callable[[], ParametricFamily]) -> None:
    _REGISTRY[name] = factory


def get_family(name: str) -> ParametricFamily:
    try:
        return _REGISTRY[name]()
    except KeyError:
        raise KeyError(
            f"unknown family {name!r}; registered: {sorted(_REGISTRY)}"
        ) from None


register_family("yeo-johnson", YeoJohnsonFamily)


@dataclass
class NormalizedTransform:
    """h_theta(y) = (Lambda_theta(y) - Lambda_theta(0)) / (Lambda_theta(1) - Lambda_theta(0))."""

    family: ParametricFamily
    theta: np.ndarray
    scale: float
    shift: float

    def __call__(self, y):
        return (self.family.eval(self.theta, y) - self.shift) / self.scale

    def invert(self, z):
        """y with h_theta(y) = z; closed form when the family ships an inverse."""
        target = np.asarray(z, dtype=float) * self.scale + self.shift
        if self.family.inverse is not None:
            return self.family.inverse(self.theta, target)
        flat = np.atleast_1d(target)
        out = np.array(
            [invert_monotone(lambda yy: self.family.eval(self.theta, yy), ti) for ti in flat]
        )
        return out.reshape(np.shape(target)) if np.ndim(target) else float(out[0])


def normalize(family: ParametricFamily, theta) -> NormalizedTransform:
    """Anchor a family member so that h(0) = 0 and h(1) = 1."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    lam0 = float(family.eval(theta, 0.0))
    lam1 = float(family.eval(theta, 1.0))
    scale = lam1 - lam0
    if not np.isfinite(scale) or scale <= 1e-12:
        raise DegenerateScale(
            f"Lambda_theta(1) - Lambda_theta(0) = {scale!r} at theta={theta}"
        )
    return NormalizedTransform(family=family, theta=theta, scale=scale, shift=lam0)


def invert_monotone(
    f: Callable[[float], float],
    target: float,
    bracket: tuple = (-1.0, 1.0),
    max_expansions: int = 200,
) -> float:
    """Solve f(y) = target for a strictly increasing scalar map.

    The bracket is expanded geometrically until it straddles the target,
    then a safeguarded root finder reduces the residual to
    1e-10 * (1 + |target|).
    """
    lo, hi = float(bracket[0]), float(bracket[1])
    if lo >= hi:
        lo, hi = hi - 1.0, lo + 1.0
    flo, fhi = f(lo), f(hi)
    width = hi - lo
    n = 0
    while flo > target:
        lo -= width
        width *= 2.0
        flo = f(lo)
        n += 1
        if n > max_expansions or not np.isfinite(flo):
            raise BracketExhausted(f"target {target} unreachable from below (f({lo})={flo})")
    n = 0
    while fhi < target:
        hi += width
        width *= 2.0
        fhi = f(hi)
        n += 1
        if n > max_expansions or not np.isfinite(fhi):
            raise BracketExhausted(f"target {target} unreachable from above (f({hi})={fhi})")
    if flo == target:
        return lo
    if fhi == target:
        return hi
    tol = 1e-10 * (1.0 + abs(target))
    root = brentq(lambda yy: f(yy) - target, lo, hi, xtol=1e-14, rtol=8.9e-16)
    if abs(f(root) - target) > tol:
        raise BracketExhausted(
            f"residual {abs(f(root) - target):g} above tolerance {tol:g} at target {target}"
        )
    return float(root)


@dataclass
class LinearlyExtended:
    """A normalized transform, extended linearly outside a wide window.

    Inside [y_lo, y_hi] this is ``base``; outside, the boundary value is
    continued with the boundary slope, which makes inversion total.  The
    window must contain the weight support, so the statistic never sees
    the modification.  Inversions that land outside the window are counted.
    """

    base: NormalizedTransform
    y_lo: float
    y_hi: float
    _slope_lo: float = field(init=False)
    _slope_hi: float = field(init=False)
    _z_lo: float = field(init=False)
    _z_hi: float = field(init=False)
    extension_count: int = field(default=0, init=False)

    def __post_init__(self):
        step = 1e-6 * max(1.0, abs(self.y_hi - self.y_lo))
        self._z_lo = float(self.base(self.y_lo))
        self._z_hi = float(self.base(self.y_hi))
        self._slope_lo = max(
            (self.base(self.y_lo + step) - self._z_lo) / step, 1e-12
        )
        self._slope_hi = max(
            (self._z_hi - self.base(self.y_hi - step)) / step, 1e-12
        )

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        inner = self.base(np.clip(y, self.y_lo, self.y_hi))
        lo_part = self._z_lo + self._slope_lo * (y - self.y_lo)
        hi_part = self._z_hi + self._slope_hi * (y - self.y_hi)
        out = np.where(y < self.y_lo, lo_part, np.where(y > self.y_hi, hi_part, inner))
        return out if out.ndim else float(out)

    def invert(self, z):
        z = np.asarray(z, dtype=float)
        below = z < self._z_lo
        above = z > self._z_hi
        n_out = int(np.count_nonzero(below) + np.count_nonzero(above))
        self.extension_count += n_out
        inner = self.base.invert(np.clip(z, self._z_lo, self._z_hi))
        lo_part = self.y_lo + (z - self._z_lo) / self._slope_lo
        hi_part = self.y_hi + (z - self._z_hi) / self._slope_hi
        out = np.where(below, lo_part, np.where(above, hi_part, inner))
        return out if out.ndim else float(out)
