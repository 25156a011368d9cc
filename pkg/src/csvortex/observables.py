"""Physical observables of a computed vortex solution.

Units are the rescaled ones with e = v = kappa = 1 and |phi|^2 = e^w.  With the
positive-flux orientation used throughout:

    magnetic field   Bt = e^w (1 - e^w) / 2             in [0, 1/8]
    flux             Phi = int Bt b dz                   -> 2 pi n
    energy           E = int b e^w (1 - e^w)^2 / 4 + e^w |grad w|^2 / 4 dz  -> pi n
    Gauss law        A0 = Bt / e^w = (1 - e^w) / 2       in [0, 1/2]
    spin             J = (1/8) int x . grad (e^w - 1)^2 b dz
    gauge field      A = grad(phase) + (1/2) (d_y w, -d_x w)
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
from numpy.typing import NDArray
from scipy.ndimage import map_coordinates

from .grid import FaceValues, Grid, ScalarGrid, integrate_metric, laplacian_array
from .metric import ConformalFactor
from .vortices import BackgroundFields, VortexConfiguration

FloatArray = NDArray[np.float64]

DECAY_RAYS = 64


class DecayFitError(ValueError):
    """The decay window is empty, leaves the domain, or contains w >= 0."""


@dataclass
class VortexSolution:
    """Regular part u on a grid together with everything needed to rebuild w."""

    grid: Grid
    vortices: VortexConfiguration
    metric: ConformalFactor
    u: FloatArray

    @cached_property
    def background(self) -> BackgroundFields:
        return BackgroundFields(self.vortices)

    @cached_property
    def b(self) -> FloatArray:
        return self.metric(*self.grid.mesh)

    @cached_property
    def u0(self) -> FloatArray:
        return self.background.u0(*self.grid.mesh)

    @cached_property
    def exp_w(self) -> FloatArray:
        return self.background.B(*self.grid.mesh) * np.exp(self.u)

    @property
    def w(self) -> ScalarGrid:
        return ScalarGrid(self.grid, self.u0 + self.u)

    @cached_property
    def grad_u(self) -> tuple[FloatArray, FloatArray]:
        gy, gx = np.gradient(self.u, self.grid.spacing, edge_order=2)
        return gx, gy

    @cached_property
    def grad_w(self) -> tuple[FloatArray, FloatArray]:
        """Analytic grad u0 plus discrete grad u."""
        g0x, g0y = self.background.grad_u0(*self.grid.mesh)
        gx, gy = self.grad_u
        return g0x + gx, g0y + gy


@dataclass
class DecayFit:
    a: float
    b: float
    log_a_lsq: float
    r_min: float
    r_max: float
    radii: FloatArray = field(repr=False)
    profile: FloatArray = field(repr=False)

    def bound_holds(self) -> bool:
        """-a exp(-b r) <= wbar(r) < 0 on the whole window."""
        env = -self.a * np.exp(-self.b * self.radii)
        return bool(np.all(self.profile < 0.0) and np.all(env <= self.profile * (1 - 1e-12)))


@dataclass
class ObservableSet:
    flux: float
    energy: float
    spin_direct: float
    spin_by_parts: float
    w_max: float
    a0_core_values: list[float]
    decay_a: float | None = None
    decay_b: float | None = None
    decay_window: tuple[float, float] | None = None
    decay_error: str | None = None
    a0_range: tuple[float, float] = (0.0, 0.0)
    gauge_curl_deviation: float | None = None
    circulation: float | None = None

    def to_dict(self) -> dict:
        return _round_floats(asdict(self))


def _round_floats(obj):
    if isinstance(obj, float):
        return float(f"{obj:.12g}") if math.isfinite(obj) else obj
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def magnetic_field(w: ScalarGrid) -> ScalarGrid:
    t = np.exp(w.values)
    return w.like(0.5 * t * (1.0 - t))


def temporal_potential(w: ScalarGrid) -> ScalarGrid:
    return w.like(0.5 * (1.0 - np.exp(w.values)))


def total_flux(w: ScalarGrid, cf: ConformalFactor, workers: int | None = None) -> float:
    return integrate_metric(magnetic_field(w), cf, workers)


def total_energy(sol: VortexSolution, workers: int | None = None) -> float:
    t = sol.exp_w
    gx, gy = sol.grad_w
    # b enters the potential part only; the gradient part is conformally invariant
    potential = 0.25 * t * (1.0 - t) ** 2
    kinetic = 0.25 * t * (gx * gx + gy * gy) / sol.b
    return integrate_metric(ScalarGrid(sol.grid, potential + kinetic), sol.metric, workers)


def spin(sol: VortexSolution) -> tuple[float, float]:
    """(direct, integrated by parts) evaluations of the spin integral."""
    X, Y = sol.grid.mesh
    t = sol.exp_w
    gx, gy = sol.grad_w
    h2 = sol.grid.spacing**2
    s = t - 1.0
    direct = 0.125 * math.fsum((2.0 * s * t * (X * gx + Y * gy) * sol.b).ravel()) * h2
    bx, by = sol.metric.gradient(X, Y)
    by_parts = -0.125 * math.fsum((s * s * (2.0 * sol.b + X * bx + Y * by)).ravel()) * h2
    return direct, by_parts


def gauge_potential(sol: VortexSolution) -> tuple[ScalarGrid, ScalarGrid]:
    """e A_i = d_i(phase) + (1/2) eps_ij d_j w, in the combination that stays
    regular at the zeros of the scalar field."""
    ax, ay = sol.background.regular_phase_potential(*sol.grid.mesh)
    gx, gy = sol.grad_u
    return ScalarGrid(sol.grid, ax + 0.5 * gy), ScalarGrid(sol.grid, ay - 0.5 * gx)


def _central4(f: FloatArray, h: float, axis: int) -> FloatArray:
    """Fourth-order central difference; second order on the two outer rings."""
    f = np.moveaxis(f, axis, 0)
    out = np.gradient(f, h, axis=0, edge_order=2)
    out[2:-2] = (-f[4:] + 8.0 * f[3:-1] - 8.0 * f[1:-3] + f[:-4]) / (12.0 * h)
    return np.moveaxis(out, 0, axis)


def gauge_curl(sol: VortexSolution) -> ScalarGrid:
    """Discrete d_x A_y - d_y A_x at the nodes.

    The u-dependent part of A is carried on cell edges (differences of
    neighbouring nodes, face data u = -u0 on the boundary), so its curl is the
    five-point Laplacian; the closed-form phase part is differentiated with
    fourth-order central differences.
    """
    X, Y = sol.grid.mesh
    h = sol.grid.spacing
    rx, ry = sol.background.regular_phase_potential(X, Y)
    faces = FaceValues.from_function(sol.grid, lambda x, y: -sol.background.u0(x, y))
    curl = _central4(ry, h, 1) - _central4(rx, h, 0) - 0.5 * laplacian_array(sol.u, h, faces)
    return ScalarGrid(sol.grid, curl)


def gauge_curl_deviation(sol: VortexSolution, mask_cells: float = 2.0) -> float:
    """max |curl A - b Bt| / max |b Bt| outside the cores and the two outer rings."""
    curl = gauge_curl(sol).values
    h = sol.grid.spacing
    t = sol.exp_w
    target = sol.b * 0.5 * t * (1.0 - t)
    X, Y = sol.grid.mesh
    keep = np.ones(sol.grid.shape, dtype=bool)
    for p in sol.vortices.points:
        keep &= np.hypot(X - p.x, Y - p.y) > mask_cells * h
    keep[:2, :] = keep[-2:, :] = False
    keep[:, :2] = keep[:, -2:] = False
    scale = np.abs(target).max()
    if scale == 0.0:
        return float(np.abs(curl[keep]).max())
    return float(np.abs(curl - target)[keep].max() / scale)


def circulation(sol: VortexSolution, half_side: float | None = None) -> float:
    """Counter-clockwise line integral of e A around a square through grid nodes."""
    grid = sol.grid
    if half_side is None:
        half_side = grid.half_width - 2.0
    c = grid.coords
    lo = int(np.argmin(np.abs(c + half_side)))
    hi = grid.size - 1 - lo
    if hi <= lo:
        raise ValueError("loop is degenerate")
    a1, a2 = (f.values for f in gauge_potential(sol))
    seg = slice(lo, hi + 1)
    s = c[seg]
    return float(
        np.trapezoid(a1[lo, seg], s)  # bottom, left to right
        + np.trapezoid(a2[seg, hi], s)  # right, upwards
        - np.trapezoid(a1[hi, seg], s)  # top, right to left
        - np.trapezoid(a2[seg, lo], s)  # left, downwards
    )


def angular_average(
    w: ScalarGrid, radii: FloatArray, center: tuple[float, float] = (0.0, 0.0), rays: int = DECAY_RAYS
) -> FloatArray:
    grid = w.grid
    theta = 2.0 * np.pi * np.arange(rays) / rays
    xs = center[0] + radii[:, None] * np.cos(theta)[None, :]
    ys = center[1] + radii[:, None] * np.sin(theta)[None, :]
    # fractional indices; values[iy, ix]
    fx = (xs - grid.coords[0]) / grid.spacing
    fy = (ys - grid.coords[0]) / grid.spacing
    samples = map_coordinates(w.values, [fy.ravel(), fx.ravel()], order=1, mode="nearest")
    return samples.reshape(xs.shape).mean(axis=1)


def fit_decay(
    w: ScalarGrid,
    window: tuple[float, float] | None = None,
    center: tuple[float, float] = (0.0, 0.0),
) -> DecayFit:
    """Fit log(-wbar(r)) = log a - b r on the angular average of w.

    The rate b is the least-squares slope.  The reported a is the smallest
    constant for which -a exp(-b r) <= wbar(r) holds on the whole window.
    """
    L = w.grid.half_width
    r1, r2 = window if window is not None else (L / 2.0, L - 2.0)
    reach = max(abs(center[0]), abs(center[1])) + r2
    if not r1 < r2:
        raise DecayFitError(f"empty decay window [{r1}, {r2}]")
    if r1 <= 0.0 or reach > L - 2.0 + 1e-12:
        raise DecayFitError(f"decay window [{r1}, {r2}] must stay within L - 2 = {L - 2.0}")
    count = max(8, int(round((r2 - r1) / w.grid.spacing)) + 1)
    radii = np.linspace(r1, r2, count)
    profile = angular_average(w, radii, center)
    if np.any(profile >= 0.0):
        raise DecayFitError("angular average of w is not negative throughout the window")
    slope, intercept = np.polyfit(radii, np.log(-profile), 1)
    rate = -slope
    amp = float(np.max(-profile * np.exp(rate * radii)))
    return DecayFit(amp, float(rate), float(intercept), float(r1), float(r2), radii, profile)


def core_temporal_potential(sol: VortexSolution) -> list[float]:
    """A0 at the vortex points, where e^w = 0."""
    out = []
    for p in sol.vortices.points:
        t = float(sol.background.B(p.x, p.y))  # exactly 0 at z_k
        out.append(0.5 * (1.0 - t * float(np.exp(_interp_u(sol, p.x, p.y)))))
    return out


def _interp_u(sol: VortexSolution, x: float, y: float) -> float:
    g = sol.grid
    fx = (x - g.coords[0]) / g.spacing
    fy = (y - g.coords[0]) / g.spacing
    return float(map_coordinates(sol.u, [[fy], [fx]], order=1, mode="nearest")[0])


def observe(
    sol: VortexSolution,
    decay_window: tuple[float, float] | None = None,
    workers: int | None = None,
) -> ObservableSet:
    w = sol.w
    direct, by_parts = spin(sol)
    a0 = temporal_potential(w).values
    obs = ObservableSet(
        flux=total_flux(w, sol.metric, workers),
        energy=total_energy(sol, workers),
        spin_direct=direct,
        spin_by_parts=by_parts,
        w_max=float(w.values.max()),
        a0_core_values=core_temporal_potential(sol),
        a0_range=(float(a0.min()), float(a0.max())),
    )
    if sol.vortices.total_vorticity == 0:
        return obs
    try:
        fit = fit_decay(w, decay_window)
    except DecayFitError as exc:
        obs.decay_error = str(exc)
    else:
        obs.decay_a, obs.decay_b = fit.a, fit.b
        obs.decay_window = (fit.r_min, fit.r_max)
    obs.gauge_curl_deviation = gauge_curl_deviation(sol)
    try:
        obs.circulation = circulation(sol)
    except ValueError:
        obs.circulation = None
    return obs
