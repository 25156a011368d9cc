"""One-dimensional reference solver for a single vortex at the origin.

For a radial metric b(r) and a vortex of multiplicity n at the origin the
regular part u(r) obeys

    u'' + u'/r = b (B e^u)(B e^u - 1) + h0,      u'(0) = 0,

with B and h0 the closed-form background.  The equation is discretised with a
finite-volume three-point scheme on a mesh r = R sinh(alpha s) / sinh(alpha),
s uniform in [0, 1], which clusters nodes near the core.  The h0 source of
each cell is written as the flux difference of u0 across the cell faces.  In
the core the exact flux r u0' is used; beyond r = 6 the same discrete flux as
for u, with a smooth blend in between.  Away from the core the scheme is then exactly the discrete
equation for w = u0 + u, so the exponentially small tail of w is not polluted
by truncation error in the algebraically decaying u0 and u.

The outer condition is w(R) = 0.  Two meshes with M and 2M - 1 nodes are
solved and combined by Richardson extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded

from .metric import ConformalFactor, Flat, MetricError

FloatArray = NDArray[np.float64]

CLUSTERING = 3.0
BLEND = (2.0, 6.0)


class RadialError(ValueError):
    """Invalid radial problem or a 2D solution that does not match it."""


class RadialConvergenceError(RuntimeError):
    """Damped Newton did not reach the tolerance."""


@dataclass(frozen=True)
class RadialProblem:
    n: int = 1
    mu: float = 1.0
    metric: ConformalFactor = field(default_factory=Flat)
    r_max: float = 40.0
    nodes: int = 8192
    tol: float = 1e-12
    max_iterations: int = 60

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 1:
            raise RadialError("n must be an integer >= 1")
        if not (math.isfinite(self.mu) and self.mu > 0.0):
            raise RadialError("mu must be finite and > 0")
        if not (math.isfinite(self.r_max) and self.r_max > 0.0):
            raise RadialError("r_max must be finite and > 0")
        if self.nodes < 16:
            raise RadialError("nodes must be >= 16")
        if not self.metric.is_radial:
            raise RadialError(f"{self.metric.family} metric is not radial about the origin")
        object.__setattr__(self, "n", int(self.n))

    def mesh(self, nodes: int | None = None) -> FloatArray:
        s = np.linspace(0.0, 1.0, nodes or self.nodes)
        r = self.r_max * np.sinh(CLUSTERING * s) / math.sinh(CLUSTERING)
        r[0] = 0.0
        r[-1] = self.r_max
        return r

    def u0(self, r: FloatArray) -> FloatArray:
        with np.errstate(divide="ignore"):
            return -self.n * np.log1p(self.mu / (np.asarray(r, dtype=float) ** 2))

    def u0_flux(self, r: FloatArray) -> FloatArray:
        """r u0'(r), finite everywhere (equal to 2n at r = 0)."""
        r = np.asarray(r, dtype=float)
        return 2.0 * self.n * self.mu / (self.mu + r * r)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mu": self.mu,
            "metric": self.metric.to_dict(),
            "r_max": self.r_max,
            "nodes": self.nodes,
        }


@dataclass
class RadialProfile:
    problem: RadialProblem
    r: FloatArray = field(repr=False)
    u: FloatArray = field(repr=False)
    iterations: int = 0
    residual: float = 0.0

    @property
    def u0(self) -> FloatArray:
        return self.problem.u0(self.r)

    @property
    def w(self) -> FloatArray:
        return self.u0 + self.u

    @property
    def exp_w(self) -> FloatArray:
        n, mu = self.problem.n, self.problem.mu
        return (self.r**2 / (mu + self.r**2)) ** n * np.exp(self.u)

    @property
    def bfield(self) -> FloatArray:
        t = self.exp_w
        return 0.5 * t * (1.0 - t)

    @property
    def b(self) -> FloatArray:
        return self.problem.metric.radial_profile(self.r)

    @property
    def flux(self) -> float:
        return float(2.0 * math.pi * simpson(self.b * self.bfield * self.r, x=self.r))

    @property
    def energy(self) -> float:
        n, mu = self.problem.n, self.problem.mu
        r = self.r
        du = np.gradient(self.u, r, edge_order=2)
        # B u0' and B u0'^2 in forms that stay finite at r = 0
        b1 = 2.0 * n * mu * r ** (2 * n - 1) / (mu + r * r) ** (n + 1)
        b2 = 4.0 * n * n * mu * mu * r ** (2 * n - 2) / (mu + r * r) ** (n + 2)
        B = (r * r / (mu + r * r)) ** n
        eu = np.exp(self.u)
        kinetic = 0.25 * eu * (b2 + 2.0 * b1 * du + B * du * du)
        t = self.exp_w
        potential = 0.25 * self.b * t * (1.0 - t) ** 2
        return float(2.0 * math.pi * simpson((potential + kinetic) * r, x=r))

    @property
    def w_spline(self) -> CubicSpline:
        """Cubic spline of u in r; combine with the closed-form u0 to get w."""
        return CubicSpline(self.r, self.u, bc_type=((1, 0.0), "not-a-knot"))

    def w_at(self, radii: FloatArray) -> FloatArray:
        radii = np.asarray(radii, dtype=float)
        if radii.size and radii.max() > self.problem.r_max:
            raise RadialError("radius beyond the oracle's outer radius")
        return self.problem.u0(radii) + self.w_spline(radii)

    def to_csv(self, path) -> None:
        with np.errstate(divide="ignore", invalid="ignore"):
            table = np.column_stack([self.r, self.u, self.w, self.bfield])
        np.savetxt(path, table, fmt="%.17g", delimiter=",", header="r,u,w,Bfield", comments="")


def _blend(r: FloatArray) -> FloatArray:
    """C-infinity step from 0 (r <= BLEND[0]) to 1 (r >= BLEND[1])."""
    t = np.clip((r - BLEND[0]) / (BLEND[1] - BLEND[0]), 0.0, 1.0)
    with np.errstate(divide="ignore"):
        a = np.where(t > 0.0, np.exp(-1.0 / np.where(t > 0.0, t, 1.0)), 0.0)
        c = np.where(t < 1.0, np.exp(-1.0 / np.where(t < 1.0, 1.0 - t, 1.0)), 0.0)
    return a / (a + c)


def _solve_mesh(p: RadialProblem, r: FloatArray) -> tuple[FloatArray, int, float]:
    m = r.size
    rf = 0.5 * (r[1:] + r[:-1])
    coef = rf / np.diff(r)
    vol = np.empty(m - 1)
    vol[0] = 0.5 * rf[0] ** 2
    vol[1:] = 0.5 * (rf[1:] ** 2 - rf[:-1] ** 2)
    b = p.metric.radial_profile(r[:-1])
    u0 = p.u0(r)
    # u0 flux through each face: exact in the core, discrete in the far field
    chi = _blend(rf)
    with np.errstate(invalid="ignore"):
        discrete = coef * np.diff(u0)
    g = p.u0_flux(rf)
    far = chi > 0.0
    g[far] = chi[far] * discrete[far] + (1.0 - chi[far]) * g[far]
    source = np.empty(m - 1)
    source[0] = 2.0 * p.n - g[0]
    source[1:] = -(g[1:] - g[:-1])

    u = np.zeros(m)
    u[-1] = -u0[-1]

    def residual(u: FloatArray) -> tuple[FloatArray, FloatArray]:
        flux = coef * np.diff(u)
        w = u0[:-1] + u[:-1]
        with np.errstate(invalid="ignore"):
            ew = np.exp(w)
            nl = ew * np.expm1(w)
        div = flux.copy()
        div[1:] -= flux[:-1]
        return div - vol * b * nl - source, ew

    res, ew = residual(u)
    scaled = float(np.max(np.abs(res / vol)))
    for it in range(1, p.max_iterations + 1):
        c = ew * (2.0 * ew - 1.0)
        ab = np.zeros((3, m - 1))
        diag = -coef.copy()
        diag[1:] -= coef[:-1]
        ab[1] = diag - vol * b * c
        ab[0, 1:] = coef[:-1]
        ab[2, :-1] = coef[:-1]
        step = solve_banded((1, 1), ab, -res)
        phi = 0.5 * float(res @ res)
        alpha = 1.0
        while True:
            trial = u.copy()
            trial[:-1] += alpha * step
            tres, tew = residual(trial)
            tphi = 0.5 * float(tres @ tres)
            if tphi <= (1.0 - 2e-4 * alpha) * phi or alpha < 1e-8:
                break
            alpha *= 0.5
        u, res, ew = trial, tres, tew
        scaled = float(np.max(np.abs(res / vol)))
        # near the origin the cell volumes are tiny and the scaled residual sits
        # at roundoff; a negligible Newton step, or a small one the line search
        # cannot improve on, also ends the iteration
        size = float(np.max(np.abs(step))) / max(1.0, float(np.max(np.abs(u))))
        stalled = tphi > (1.0 - 2e-4 * alpha) * phi
        if scaled <= p.tol or size <= p.tol or (stalled and size <= 1e-8):
            return u, it, scaled
    raise RadialConvergenceError(
        f"radial Newton stopped after {p.max_iterations} iterations, residual {scaled:.3e}"
    )


def solve_radial(p: RadialProblem, richardson: bool = True) -> RadialProfile:
    """Profile on the M-node mesh; Richardson-extrapolated against 2M - 1 nodes."""
    try:
        p.metric.radial_profile(np.array([0.0, p.r_max]))
    except MetricError as exc:
        raise RadialError(str(exc)) from None
    r = p.mesh()
    u, it, res = _solve_mesh(p, r)
    if richardson:
        fine_u, fit, fres = _solve_mesh(p, p.mesh(2 * p.nodes - 1))
        u = fine_u[::2] + (fine_u[::2] - u) / 3.0
        it += fit
        res = max(res, fres)
    return RadialProfile(p, r, u, it, res)


@dataclass(frozen=True)
class RadialDecay:
    rate: float
    log_amplitude: float
    window: tuple[float, float]


def fit_radial_decay(profile: RadialProfile, window: tuple[float, float] | None = None) -> RadialDecay:
    """Least-squares slope of ln(-w) on [R/2, R - 5] by default."""
    R = profile.problem.r_max
    lo, hi = window if window is not None else (0.5 * R, R - 5.0)
    sel = (profile.r >= lo) & (profile.r <= hi)
    w = profile.w[sel]
    if sel.sum() < 3:
        raise RadialError("decay window holds fewer than three nodes")
    if np.any(w >= 0.0):
        raise RadialError("w is not negative on the decay window")
    slope, intercept = np.polyfit(profile.r[sel], np.log(-w), 1)
    return RadialDecay(float(-slope), float(intercept), (float(lo), float(hi)))


@dataclass(frozen=True)
class Deviation:
    sup: float
    l2: float
    nodes: int

    def to_dict(self) -> dict:
        return {"sup": self.sup, "l2": self.l2, "nodes": self.nodes}


def _same_metric(a: ConformalFactor, b: ConformalFactor) -> bool:
    return a.to_dict() == b.to_dict()


def compare_with_2d(profile: RadialProfile, solution) -> Deviation:
    """Deviation of a 2D solution's w from the oracle, at the 2D nodes.

    ``solution`` is a VortexSolution or anything with a ``solution`` attribute
    holding one.  The oracle spline is evaluated at every node radius; the L2
    figure is the root-mean-square over nodes.
    """
    sol = getattr(solution, "solution", solution)
    p = profile.problem
    pts = sol.vortices.points
    if len(pts) != 1 or (pts[0].x, pts[0].y) != (0.0, 0.0):
        raise RadialError("2D configuration is not a single vortex at the origin")
    if pts[0].n != p.n:
        raise RadialError(f"multiplicity mismatch: 2D has {pts[0].n}, oracle has {p.n}")
    if not _same_metric(sol.metric, p.metric):
        raise RadialError("2D metric differs from the oracle metric")
    X, Y = sol.grid.mesh
    rr = np.hypot(X, Y)
    if rr.max() > p.r_max:
        raise RadialError("2D domain reaches beyond the oracle's outer radius")
    w2d = sol.u0 + sol.u
    diff = np.abs(w2d - profile.w_at(rr))
    return Deviation(float(diff.max()), float(np.sqrt(np.mean(diff * diff))), int(diff.size))
