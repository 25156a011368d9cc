"""Conformal factors b(x, y) for spatial metrics gamma_ij = b(x, y) delta_ij.

Four families are supported:

* ``Flat``          b = 1
* ``GaussianBump``  b = 1 + A exp(-|z - c|^2 / sigma^2)
* ``PowerGrowth``   b = (1 + r^2)^p with 0 <= p < 1
* ``RadialTable``   b(r) from tabulated samples, monotone cubic (PCHIP) in between

All factors are immutable and evaluate element-wise on numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, ClassVar, NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.interpolate import PchipInterpolator

FloatArray = NDArray[np.float64]


class MetricError(ValueError):
    """Invalid conformal-factor parameters."""


class MetricRangeError(MetricError):
    """A tabulated metric was queried outside its sampled radii."""


class MetricBounds(NamedTuple):
    lower: float
    upper: float
    uniformly_euclidean: bool


class ConformalFactor:
    """Base class. Subclasses implement ``_eval`` and ``_grad`` on arrays."""

    family: ClassVar[str] = ""

    def __call__(self, x: ArrayLike, y: ArrayLike) -> FloatArray:
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return self._eval(x, y)

    def gradient(self, x: ArrayLike, y: ArrayLike) -> tuple[FloatArray, FloatArray]:
        """Euclidean gradient (db/dx, db/dy)."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        return self._grad(x, y)

    def radial_profile(self, r: ArrayLike) -> FloatArray:
        """b along the positive x-axis; only meaningful when ``is_radial``."""
        if not self.is_radial:
            raise MetricError(f"{self.family} metric is not radially symmetric about the origin")
        r = np.asarray(r, dtype=float)
        return self(r, np.zeros_like(r))

    @property
    def is_radial(self) -> bool:
        return True

    @property
    def limit_at_infinity(self) -> float | None:
        """lim b as |z| -> infinity, or None when b is unbounded or unknown."""
        return None

    def bounds(self, half_width: float) -> MetricBounds:
        raise NotImplementedError

    def to_dict(self) -> dict[str, Any]:
        raise NotImplementedError

    def _eval(self, x: FloatArray, y: FloatArray) -> FloatArray:
        raise NotImplementedError

    def _grad(self, x: FloatArray, y: FloatArray) -> tuple[FloatArray, FloatArray]:
        raise NotImplementedError


@dataclass(frozen=True)
class Flat(ConformalFactor):
    family: ClassVar[str] = "flat"

    def _eval(self, x, y):
        return np.ones_like(x)

    def _grad(self, x, y):
        return np.zeros_like(x), np.zeros_like(y)

    @property
    def limit_at_infinity(self) -> float:
        return 1.0

    def bounds(self, half_width: float) -> MetricBounds:
        _check_half_width(half_width)
        return MetricBounds(1.0, 1.0, True)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family}


@dataclass(frozen=True)
class GaussianBump(ConformalFactor):
    amplitude: float = 1.0
    sigma: float = 1.0
    center: tuple[float, float] = (0.0, 0.0)

    family: ClassVar[str] = "gaussian_bump"

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", (float(self.center[0]), float(self.center[1])))
        if not (math.isfinite(self.amplitude) and self.amplitude >= 0.0):
            raise MetricError("amplitude must be finite and >= 0")
        if not (math.isfinite(self.sigma) and self.sigma > 0.0):
            raise MetricError("sigma must be finite and > 0")
        if not all(math.isfinite(c) for c in self.center):
            raise MetricError("center must be finite")

    def _gauss(self, x, y):
        dx = x - self.center[0]
        dy = y - self.center[1]
        return dx, dy, self.amplitude * np.exp(-(dx * dx + dy * dy) / self.sigma**2)

    def _eval(self, x, y):
        return 1.0 + self._gauss(x, y)[2]

    def _grad(self, x, y):
        dx, dy, g = self._gauss(x, y)
        scale = -2.0 / self.sigma**2
        return scale * dx * g, scale * dy * g

    @property
    def is_radial(self) -> bool:
        return self.center == (0.0, 0.0)

    @property
    def limit_at_infinity(self) -> float:
        return 1.0

    def bounds(self, half_width: float) -> MetricBounds:
        _check_half_width(half_width)
        return MetricBounds(1.0, 1.0 + self.amplitude, True)

    def to_dict(self) -> dict[str, Any]:
        return {
            "family": self.family,
            "amplitude": self.amplitude,
            "sigma": self.sigma,
            "center": list(self.center),
        }


@dataclass(frozen=True)
class PowerGrowth(ConformalFactor):
    """b = (1 + r^2)^p: unbounded above for p > 0 but inside the growth window
    b(r) r <= c r^(3 - eps) with eps = 2 (1 - p)."""

    exponent: float = 0.5

    family: ClassVar[str] = "power_growth"

    def __post_init__(self) -> None:
        if not (math.isfinite(self.exponent) and 0.0 <= self.exponent < 1.0):
            raise MetricError("exponent must lie in [0, 1)")

    def _eval(self, x, y):
        return (1.0 + x * x + y * y) ** self.exponent

    def _grad(self, x, y):
        p = self.exponent
        factor = 2.0 * p * (1.0 + x * x + y * y) ** (p - 1.0)
        return factor * x, factor * y

    @property
    def limit_at_infinity(self) -> float | None:
        return 1.0 if self.exponent == 0.0 else None

    @property
    def growth_epsilon(self) -> float:
        return 2.0 * (1.0 - self.exponent)

    def growth_constant(self, r0: float) -> float:
        """Smallest c with b(r) r <= c r^(3 - eps) for all r >= r0."""
        if r0 <= 0.0:
            raise MetricError("r0 must be > 0")
        return (1.0 + 1.0 / r0**2) ** self.exponent

    def bounds(self, half_width: float) -> MetricBounds:
        _check_half_width(half_width)
        # monotone in r: extremes at the origin and at the corners
        upper = (1.0 + 2.0 * half_width**2) ** self.exponent
        return MetricBounds(1.0, upper, self.exponent == 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "exponent": self.exponent}


@dataclass(frozen=True)
class RadialTable(ConformalFactor):
    radii: tuple[float, ...]
    values: tuple[float, ...]

    family: ClassVar[str] = "radial_table"

    def __post_init__(self) -> None:
        radii = tuple(float(r) for r in self.radii)
        values = tuple(float(v) for v in self.values)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "values", values)
        if len(radii) != len(values):
            raise MetricError("radii and values must have equal length")
        if len(radii) < 2:
            raise MetricError("a radial table needs at least two samples")
        if not all(math.isfinite(r) for r in radii) or radii[0] < 0.0:
            raise MetricError("radii must be finite and >= 0")
        if any(b <= a for a, b in zip(radii, radii[1:])):
            raise MetricError("radii must be strictly increasing")
        if not all(math.isfinite(v) and v > 0.0 for v in values):
            raise MetricError("table values must be finite and > 0")

    @cached_property
    def _interp(self) -> PchipInterpolator:
        return PchipInterpolator(np.array(self.radii), np.array(self.values), extrapolate=False)

    @cached_property
    def _dinterp(self):
        return self._interp.derivative()

    def _radius(self, x, y):
        r = np.hypot(x, y)
        if r.size and (r.max() > self.radii[-1] or r.min() < self.radii[0]):
            raise MetricRangeError(
                f"radius outside tabulated range [{self.radii[0]}, {self.radii[-1]}]"
            )
        return r

    def _eval(self, x, y):
        return self._interp(self._radius(x, y))

    def _grad(self, x, y):
        r = self._radius(x, y)
        db = self._dinterp(r)
        with np.errstate(invalid="ignore", divide="ignore"):
            scale = np.where(r > 0.0, db / np.where(r > 0.0, r, 1.0), 0.0)
        return scale * x, scale * y

    @property
    def limit_at_infinity(self) -> float:
        # beyond the table is an error, the outermost sample is the asymptotic value
        return self.values[-1]

    def bounds(self, half_width: float) -> MetricBounds:
        _check_half_width(half_width)
        if math.sqrt(2.0) * half_width > self.radii[-1]:
            raise MetricRangeError("table does not cover the corners of the domain")
        # PCHIP does not overshoot, so sample extrema bound the interpolant
        return MetricBounds(min(self.values), max(self.values), True)

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "radii": list(self.radii), "values": list(self.values)}


def _check_half_width(half_width: float) -> None:
    if not (math.isfinite(half_width) and half_width > 0.0):
        raise MetricError("half width must be finite and > 0")


def evaluate(cf: ConformalFactor, point: tuple[float, float]) -> float:
    """b at a single finite point."""
    x, y = point
    if not (math.isfinite(x) and math.isfinite(y)):
        raise MetricError("point must be finite")
    return float(cf(x, y))


def certify_bounds(cf: ConformalFactor, half_width: float) -> MetricBounds:
    return cf.bounds(half_width)


def growth_ratio(cf: ConformalFactor, radii: ArrayLike, eps: float) -> float:
    """max over radii of b(r) r / r^(3 - eps); finite and O(1) inside the growth window."""
    r = np.asarray(radii, dtype=float)
    return float(np.max(cf.radial_profile(r) * r / r ** (3.0 - eps)))


_FAMILIES: dict[str, type[ConformalFactor]] = {
    "flat": Flat,
    "gaussian_bump": GaussianBump,
    "power_growth": PowerGrowth,
    "radial_table": RadialTable,
}


def metric_from_dict(data: dict[str, Any]) -> ConformalFactor:
    data = dict(data)
    family = data.pop("family", "flat")
    try:
        cls = _FAMILIES[family]
    except KeyError:
        raise MetricError(f"unknown metric family {family!r}") from None
    if cls is GaussianBump and "center" in data:
        data["center"] = tuple(data["center"])
    try:
        return cls(**data)
    except TypeError as exc:
        raise MetricError(f"bad parameters for {family}: {exc}") from None
