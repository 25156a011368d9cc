"""Vortex data and the closed-form background of the singular/regular split.

With vortex points z_k of multiplicity n_k and regulator mu > 0 the background is

    u0(z) = -sum_k n_k log(1 + mu / |z - z_k|^2)
    h0(z) =  4 sum_k n_k mu / (mu + |z - z_k|^2)^2
    B(z)  =  prod_k (|z - z_k|^2 / (mu + |z - z_k|^2))^n_k  = exp(u0)

so that flat-Laplacian(u0) = -h0 + 4 pi sum_k n_k delta(z - z_k).  The full
solution is w = u0 + u with u smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .metric import ConformalFactor

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class Vortex:
    x: float
    y: float
    n: int = 1

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("vortex coordinates must be finite")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("vortex multiplicity must be a positive integer")
        object.__setattr__(self, "n", int(self.n))


@dataclass(frozen=True)
class VortexConfiguration:
    """Vortex points with integer multiplicities. Coincident points are merged."""

    points: tuple[Vortex, ...] = ()
    mu: float = 1.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise ValueError("mu must be finite and > 0")
        merged: dict[tuple[float, float], int] = {}
        for p in self.points:
            if not isinstance(p, Vortex):
                p = Vortex(*p)
            merged[(float(p.x), float(p.y))] = merged.get((float(p.x), float(p.y)), 0) + p.n
        object.__setattr__(
            self, "points", tuple(Vortex(x, y, n) for (x, y), n in merged.items())
        )

    @classmethod
    def at(cls, *points: tuple[float, float] | tuple[float, float, int], mu: float = 1.0):
        return cls(tuple(Vortex(*p) for p in points), mu)

    @property
    def total_vorticity(self) -> int:
        return sum(p.n for p in self.points)

    @property
    def positions(self) -> FloatArray:
        return np.array([(p.x, p.y) for p in self.points], dtype=float).reshape(-1, 2)

    @property
    def multiplicities(self) -> NDArray[np.int64]:
        return np.array([p.n for p in self.points], dtype=np.int64)

    def with_mu(self, mu: float) -> VortexConfiguration:
        return VortexConfiguration(self.points, mu)

    def shifted(self, dx: float, dy: float = 0.0) -> VortexConfiguration:
        return VortexConfiguration(
            tuple(Vortex(p.x + dx, p.y + dy, p.n) for p in self.points), self.mu
        )

    def inside(self, half_width: float) -> bool:
        return all(abs(p.x) < half_width and abs(p.y) < half_width for p in self.points)

    def to_dict(self) -> dict:
        return {
            "vortices": [{"x": p.x, "y": p.y, "n": p.n} for p in self.points],
            "mu": self.mu,
        }


@dataclass(frozen=True)
class BackgroundFields:
    """Closed-form u0, h0, B and grad u0 for one vortex configuration."""

    vortices: VortexConfiguration
    _pos: FloatArray = field(init=False, repr=False, compare=False)
    _mult: FloatArray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_pos", self.vortices.positions)
        object.__setattr__(self, "_mult", self.vortices.multiplicities.astype(float))

    @property
    def mu(self) -> float:
        return self.vortices.mu

    def _offsets(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        for (xk, yk), nk in zip(self._pos, self._mult):
            dx = x - xk
            dy = y - yk
            yield dx, dy, dx * dx + dy * dy, nk

    def u0(self, x: ArrayLike, y: ArrayLike) -> FloatArray:
        """u0, equal to -inf exactly at a vortex point."""
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        with np.errstate(divide="ignore"):
            for _, _, d2, nk in self._offsets(x, y):
                out -= nk * np.log1p(self.mu / d2)
        return out

    def h0(self, x: ArrayLike, y: ArrayLike) -> FloatArray:
        out = np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        for _, _, d2, nk in self._offsets(x, y):
            out += 4.0 * nk * self.mu / (self.mu + d2) ** 2
        return out

    def h(self, x: ArrayLike, y: ArrayLike, cf: ConformalFactor) -> FloatArray:
        return self.h0(x, y) / cf(x, y)

    def B(self, x: ArrayLike, y: ArrayLike) -> FloatArray:
        out = np.ones(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        for _, _, d2, nk in self._offsets(x, y):
            out *= (d2 / (self.mu + d2)) ** nk
        return out

    def grad_u0(self, x: ArrayLike, y: ArrayLike) -> tuple[FloatArray, FloatArray]:
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        gx = np.zeros(shape)
        gy = np.zeros(shape)
        with np.errstate(divide="ignore", invalid="ignore"):
            for dx, dy, d2, nk in self._offsets(x, y):
                s = 2.0 * nk * self.mu / (d2 * (self.mu + d2))
                gx += s * dx
                gy += s * dy
        return gx, gy

    def B_grad_u0(self, x: ArrayLike, y: ArrayLike) -> tuple[FloatArray, FloatArray]:
        """B * grad u0 = grad B, finite everywhere (zero at vortex points)."""
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        gx = np.zeros(shape)
        gy = np.zeros(shape)
        for k, (dx, dy, d2, nk) in enumerate(self._offsets(x, y)):
            # factor k of B with one power of d2 cancelled against 1/d2 in grad u0
            rest = np.ones(shape)
            for j, (_, _, d2j, nj) in enumerate(self._offsets(x, y)):
                if j != k:
                    rest *= (d2j / (self.mu + d2j)) ** nj
            own = d2 ** (nk - 1) / (self.mu + d2) ** nk
            s = 2.0 * nk * self.mu * own * rest / (self.mu + d2)
            gx += s * dx
            gy += s * dy
        return gx, gy

    def regular_phase_potential(self, x: ArrayLike, y: ArrayLike) -> tuple[FloatArray, FloatArray]:
        """grad(phase) + (1/2) * rot(grad u0), the regular combination
        sum_k n_k (-(y - y_k), x - x_k) / (mu + |z - z_k|^2)."""
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        ax = np.zeros(shape)
        ay = np.zeros(shape)
        for dx, dy, d2, nk in self._offsets(x, y):
            s = nk / (self.mu + d2)
            ax -= s * dy
            ay += s * dx
        return ax, ay


def eval_u0(vc: VortexConfiguration, point: tuple[float, float]) -> float:
    _check_point(point)
    return float(BackgroundFields(vc).u0(*point))


def eval_h0(vc: VortexConfiguration, point: tuple[float, float]) -> float:
    _check_point(point)
    return float(BackgroundFields(vc).h0(*point))


def eval_B(vc: VortexConfiguration, point: tuple[float, float]) -> float:
    _check_point(point)
    return float(BackgroundFields(vc).B(*point))


def eval_h(vc: VortexConfiguration, cf: ConformalFactor, point: tuple[float, float]) -> float:
    _check_point(point)
    return float(BackgroundFields(vc).h(*point, cf))


def _check_point(point) -> None:
    if not all(math.isfinite(c) for c in point):
        raise ValueError("point must be finite")
