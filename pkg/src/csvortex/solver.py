"""Regular part u of w = u0 + u on the truncated square.

The discrete problem is

    laplacian0(u) / b = B e^u (B e^u - 1) + h0 / b

with w = 0 imposed on the faces (u = -u0 there).  It is the critical point of

    E(u) = sum over cell faces (u_i - u_j)^2           (= int |grad u|^2 dz)
         + h^2 sum_i b_i (B_i e^u_i - 1)^2 + 2 h0_i u_i

whose gradient is exactly -2 h^2 b r with r the residual above.  Two
independent algorithms are provided: damped Newton with a preconditioned CG
linear step, and preconditioned nonlinear conjugate gradients on E.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray
from scipy.interpolate import RectBivariateSpline
from scipy.sparse.linalg import LinearOperator, cg

from .grid import FaceValues, Grid, ScalarGrid, default_workers, laplacian_array, solve_shifted_poisson
from .metric import ConformalFactor
from .observables import ObservableSet, VortexSolution, observe
from .vortices import BackgroundFields, VortexConfiguration

FloatArray = NDArray[np.float64]

log = logging.getLogger(__name__)

U_MAX = 50.0

Method = Literal["minimize", "newton", "both"]


class SolverError(RuntimeError):
    pass


class OverflowGuardError(SolverError):
    """u exceeded the exponential guard."""


@dataclass(frozen=True)
class SolveSettings:
    method: Method = "both"
    residual_tol: float = 1e-10
    max_iterations: int = 200
    max_gradient_steps: int = 50_000
    continuation: tuple[int, ...] | None = None
    backtrack: float = 0.5
    armijo: float = 1e-4
    agreement_tol: float = 1e-6
    linear_rtol: float = 1e-12
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.method not in ("minimize", "newton", "both"):
            raise ValueError(f"unknown method {self.method!r}")
        if not self.residual_tol > 0.0:
            raise ValueError("residual_tol must be > 0")
        if self.max_iterations < 1 or self.max_gradient_steps < 1:
            raise ValueError("iteration limits must be >= 1")
        if not 0.0 < self.backtrack < 1.0:
            raise ValueError("backtrack must lie in (0, 1)")
        if not 0.0 < self.armijo < 0.5:
            raise ValueError("armijo must lie in (0, 0.5)")
        if self.continuation is not None:
            ladder = tuple(int(n) for n in self.continuation)
            if any(b <= a for a, b in zip(ladder, ladder[1:])):
                raise ValueError("continuation ladder must be strictly increasing")
            object.__setattr__(self, "continuation", ladder)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["continuation"] = list(self.continuation) if self.continuation else None
        return d


class DiscreteProblem:
    """Sampled coefficients of the regular-part equation on one grid."""

    def __init__(
        self,
        grid: Grid,
        vortices: VortexConfiguration,
        metric: ConformalFactor,
        boundary: FaceValues | None = None,
        workers: int | None = None,
    ):
        self.grid = grid
        self.vortices = vortices
        self.metric = metric
        self.workers = workers
        bg = BackgroundFields(vortices)
        X, Y = grid.mesh
        self.h = grid.spacing
        self.b = metric(X, Y)
        if np.any(self.b <= 0.0):
            raise SolverError("conformal factor must be positive on the grid")
        self.B = bg.B(X, Y)
        self.h0 = bg.h0(X, Y)
        self.faces = boundary if boundary is not None else FaceValues.zeros(grid)

    @classmethod
    def with_vacuum_faces(cls, grid, vortices, metric, workers=None) -> DiscreteProblem:
        """w = 0 on the faces, i.e. u = -u0 there."""
        bg = BackgroundFields(vortices)
        faces = FaceValues.from_function(grid, lambda x, y: -bg.u0(x, y))
        return cls(grid, vortices, metric, faces, workers)

    # -- pointwise pieces -------------------------------------------------

    def _Beu(self, u: FloatArray) -> FloatArray:
        if u.max() > U_MAX:
            raise OverflowGuardError(f"u exceeded {U_MAX}")
        return self.B * np.exp(u)

    def residual(self, u: FloatArray) -> FloatArray:
        t = self._Beu(u)
        lap = laplacian_array(u, self.h, self.faces)
        return lap / self.b - (t * (t - 1.0) + self.h0 / self.b)

    def curvature(self, u: FloatArray) -> FloatArray:
        """b d/du [B e^u (B e^u - 1)]; the Hessian of E is 2h^2 (-lap0 + diag)."""
        t = self._Beu(u)
        return self.b * t * (2.0 * t - 1.0)

    # -- energy -----------------------------------------------------------

    def _boundary_offsets(self, u: FloatArray) -> list[FloatArray]:
        f = self.faces
        return [u[:, 0] - f.west, u[:, -1] - f.east, u[0, :] - f.south, u[-1, :] - f.north]

    @staticmethod
    def _boundary_rows(d: FloatArray) -> list[FloatArray]:
        return [d[:, 0], d[:, -1], d[0, :], d[-1, :]]

    def energy(self, u: FloatArray) -> float:
        t = self._Beu(u)
        terms = [
            (np.diff(u, axis=1) ** 2).ravel(),
            (np.diff(u, axis=0) ** 2).ravel(),
            2.0 * np.concatenate(self._boundary_offsets(u)) ** 2,
            (self.h**2 * (self.b * (t - 1.0) ** 2 + 2.0 * self.h0 * u)).ravel(),
        ]
        return math.fsum(np.concatenate(terms))

    def energy_gradient(self, u: FloatArray) -> FloatArray:
        return -2.0 * self.h**2 * self.b * self.residual(u)

    def energy_change(self, u: FloatArray, step: FloatArray) -> float:
        """E(u + step) - E(u), summed from per-term differences so that the
        result keeps full relative precision even when it is tiny."""
        if (u + step).max() > U_MAX:
            return math.inf
        t = self._Beu(u)
        dt = t * np.expm1(step)
        kin = 0.0
        for axis in (0, 1):
            du = np.diff(u, axis=axis)
            ds = np.diff(step, axis=axis)
            kin += float(np.sum(ds * (2.0 * du + ds)))
        for off, ds in zip(self._boundary_offsets(u), self._boundary_rows(step)):
            kin += 2.0 * float(np.sum(ds * (2.0 * off + ds)))
        pot = float(np.sum(self.b * dt * (2.0 * t + dt - 2.0) + 2.0 * self.h0 * step))
        return kin + self.h**2 * pot

    # -- linear algebra ---------------------------------------------------

    def apply_shifted(self, d: FloatArray, c: FloatArray) -> FloatArray:
        """(-lap0 + diag c) d with homogeneous faces."""
        return -laplacian_array(d, self.h) + c * d

    def precondition(self, r: FloatArray, shift: float) -> FloatArray:
        return solve_shifted_poisson(r, self.grid, shift, self.workers)

    @staticmethod
    def preconditioner_shift(c: FloatArray) -> float:
        return max(float(np.median(c)), 0.0)


@dataclass
class MethodResult:
    method: str
    converged: bool
    iterations: int
    residual: float
    energy: float
    energy_history: list[float]
    wall_time: float
    u: FloatArray = field(repr=False)
    message: str = ""

    def summary(self) -> dict:
        return {
            "method": self.method,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "energy": self.energy,
            "energy_history": list(self.energy_history),
            "wall_time": self.wall_time,
            "message": self.message,
        }


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual: float
    energy: float
    energy_history: list[float]
    wall_time: float
    solution: VortexSolution = field(repr=False)
    observables: ObservableSet | None
    settings: SolveSettings
    runs: dict[str, MethodResult] = field(repr=False)
    agreement: float | None = None
    flagged: bool = False

    @property
    def u(self) -> ScalarGrid:
        return ScalarGrid(self.solution.grid, self.solution.u)

    @property
    def w(self) -> ScalarGrid:
        return self.solution.w

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual": self.residual,
            "energy": self.energy,
            "energy_history": list(self.energy_history),
            "agreement": self.agreement,
            "flagged": self.flagged,
            "settings": self.settings.to_dict(),
            "configuration": {
                "metric": self.solution.metric.to_dict(),
                **self.solution.vortices.to_dict(),
                "grid": {
                    "half_width": self.solution.grid.half_width,
                    "nodes": self.solution.grid.nodes,
                },
            },
            "runs": {k: v.summary() for k, v in self.runs.items()},
            "observables": self.observables.to_dict() if self.observables else None,
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        else:
            for run in d["runs"].values():
                run.pop("wall_time")
        return d


# ---------------------------------------------------------------------------
# public single-grid operations


def _problem_for(u: ScalarGrid, bg: BackgroundFields, cf: ConformalFactor, boundary):
    return DiscreteProblem(u.grid, bg.vortices, cf, boundary)


def discrete_energy(
    u: ScalarGrid, bg: BackgroundFields, cf: ConformalFactor, boundary: FaceValues | None = None
) -> float:
    """Discrete E(u); faces default to u = 0."""
    return _problem_for(u, bg, cf, boundary).energy(u.values)


def residual(
    u: ScalarGrid, bg: BackgroundFields, cf: ConformalFactor, boundary: FaceValues | None = None
) -> ScalarGrid:
    return u.like(_problem_for(u, bg, cf, boundary).residual(u.values))


# ---------------------------------------------------------------------------
# algorithms


def newton(
    prob: DiscreteProblem, u: FloatArray, settings: SolveSettings, max_iterations: int | None = None
) -> MethodResult:
    start = time.perf_counter()
    u = u.copy()
    r = prob.residual(u)
    phi = 0.5 * float(np.sum(r * r))
    history = [prob.energy(u)]
    limit = max_iterations or settings.max_iterations
    n = prob.grid.size**2
    message = "max_iterations reached"
    it = 0
    while True:
        rmax = float(np.abs(r).max())
        if rmax <= settings.residual_tol:
            message = "residual below tolerance"
            break
        if it >= limit:
            break
        c = prob.curvature(u)
        shift = prob.preconditioner_shift(c)
        A = LinearOperator(
            (n, n), matvec=lambda v: prob.apply_shifted(v.reshape(u.shape), c).ravel(), dtype=float
        )
        M = LinearOperator(
            (n, n), matvec=lambda v: prob.precondition(v.reshape(u.shape), shift).ravel(), dtype=float
        )
        rhs = (prob.b * r).ravel()
        d, info = cg(A, rhs, rtol=settings.linear_rtol, atol=0.0, maxiter=2000, M=M)
        if info < 0:
            message = "linear solve broke down"
            break
        d = d.reshape(u.shape)
        alpha = 1.0
        while True:
            trial = u + alpha * d
            try:
                r_trial = prob.residual(trial)
            except OverflowGuardError:
                phi_trial = math.inf
            else:
                phi_trial = 0.5 * float(np.sum(r_trial * r_trial))
            if phi_trial <= (1.0 - 2.0 * settings.armijo * alpha) * phi:
                break
            alpha *= settings.backtrack
            if alpha < 1e-10:
                break
        if alpha < 1e-10:
            message = "line search failed"
            break
        u, r, phi = trial, r_trial, phi_trial
        history.append(prob.energy(u))
        it += 1
        log.debug("newton %d: |r|=%.3e alpha=%g", it, float(np.abs(r).max()), alpha)
    rmax = float(np.abs(r).max())
    return MethodResult(
        method="newton",
        converged=rmax <= settings.residual_tol,
        iterations=it,
        residual=rmax,
        energy=prob.energy(u),
        energy_history=history,
        wall_time=time.perf_counter() - start,
        u=u,
        message=message,
    )


def minimize(
    prob: DiscreteProblem, u: FloatArray, settings: SolveSettings, max_steps: int | None = None
) -> MethodResult:
    """Preconditioned nonlinear CG (Polak-Ribiere+) with Armijo backtracking.

    The energy history is accumulated from exact per-step decreases, so it is
    strictly decreasing even when the steps fall below the rounding level of E.
    """
    start = time.perf_counter()
    u = u.copy()
    h2 = prob.h**2
    limit = max_steps or settings.max_gradient_steps
    energy = prob.energy(u)
    history = [energy]
    r = prob.residual(u)
    g = -2.0 * h2 * prob.b * r
    c = prob.curvature(u)
    shift = prob.preconditioner_shift(c)
    z = prob.precondition(g, shift) / (2.0 * h2)
    d = -z
    gz = float(np.vdot(g, z))
    message = "max_gradient_steps reached"
    it = 0
    while True:
        rmax = float(np.abs(r).max())
        if rmax <= settings.residual_tol:
            message = "residual below tolerance"
            break
        if it >= limit:
            break
        gd = float(np.vdot(g, d))
        if gd >= 0.0:
            d = -z
            gd = -gz
        Hd = 2.0 * h2 * prob.apply_shifted(d, c)
        dHd = float(np.vdot(d, Hd))
        alpha = -gd / dHd if dHd > 0.0 else 1.0
        while True:
            dE = prob.energy_change(u, alpha * d)
            if dE <= settings.armijo * alpha * gd:
                break
            alpha *= settings.backtrack
            if alpha < 1e-14:
                break
        if alpha < 1e-14:
            message = "line search failed"
            break
        u = u + alpha * d
        history.append(history[-1] + dE)
        r = prob.residual(u)
        g_new = -2.0 * h2 * prob.b * r
        c = prob.curvature(u)
        shift = prob.preconditioner_shift(c)
        z_new = prob.precondition(g_new, shift) / (2.0 * h2)
        gz_new = float(np.vdot(g_new, z_new))
        beta = max(0.0, (gz_new - float(np.vdot(g_new, z))) / gz)
        d = -z_new + beta * d
        g, z, gz = g_new, z_new, gz_new
        it += 1
        if it % 25 == 0:
            log.debug("ncg %d: |r|=%.3e E=%.15g", it, float(np.abs(r).max()), history[-1])
    rmax = float(np.abs(r).max())
    return MethodResult(
        method="minimize",
        converged=rmax <= settings.residual_tol,
        iterations=it,
        residual=rmax,
        energy=prob.energy(u),
        energy_history=history,
        wall_time=time.perf_counter() - start,
        u=u,
        message=message,
    )


def prolong(u: FloatArray, coarse: Grid, fine: Grid, vortices: VortexConfiguration) -> FloatArray:
    """Bicubic transfer of u to a finer grid, padded with the face data u = -u0."""
    bg = BackgroundFields(vortices)
    L = coarse.half_width
    s = np.concatenate([[-L], coarse.coords, [L]])
    padded = np.empty((coarse.size + 2, coarse.size + 2))
    padded[1:-1, 1:-1] = u
    # ring of face points including corners, where w = 0
    ring_x, ring_y = np.meshgrid(s, s)
    edge = np.ones_like(padded, dtype=bool)
    edge[1:-1, 1:-1] = False
    padded[edge] = -bg.u0(ring_x[edge], ring_y[edge])
    spline = RectBivariateSpline(s, s, padded, kx=3, ky=3, s=0)
    return spline(fine.coords, fine.coords)


def _ladder(grid: Grid, settings: SolveSettings) -> list[Grid]:
    nodes = list(settings.continuation or ())
    nodes = [n for n in nodes if n < grid.nodes] + [grid.nodes]
    return [Grid(grid.half_width, n) for n in nodes]


def _run_method(method, grids, vortices, metric, settings, workers) -> MethodResult:
    algorithm = newton if method == "newton" else minimize
    u = np.zeros(grids[0].shape)
    total = 0
    wall = 0.0
    result = None
    for k, g in enumerate(grids):
        if k > 0:
            u = prolong(u, grids[k - 1], g, vortices)
        prob = DiscreteProblem.with_vacuum_faces(g, vortices, metric, workers)
        result = algorithm(prob, u, settings)
        total += result.iterations
        wall += result.wall_time
        u = result.u
        log.info("%s on N=%d: %d iterations, |r|=%.2e", method, g.nodes, result.iterations, result.residual)
    assert result is not None
    result.iterations = total
    result.wall_time = wall
    return result


def solve(
    vortices: VortexConfiguration,
    metric: ConformalFactor,
    grid: Grid | None = None,
    settings: SolveSettings | None = None,
    decay_window: tuple[float, float] | None = None,
    with_observables: bool = True,
) -> SolveReport:
    grid = grid or Grid()
    settings = settings or SolveSettings()
    grid.check_vortices(vortices)
    workers = settings.workers or default_workers()
    start = time.perf_counter()

    if vortices.total_vorticity == 0:
        prob = DiscreteProblem.with_vacuum_faces(grid, vortices, metric, workers)
        u = np.zeros(grid.shape)
        rmax = float(np.abs(prob.residual(u)).max())
        e = prob.energy(u)
        runs = {
            "trivial": MethodResult("trivial", rmax <= settings.residual_tol, 0, rmax, e, [e], 0.0, u)
        }
    else:
        grids = _ladder(grid, settings)
        methods = ["newton", "minimize"] if settings.method == "both" else [settings.method]
        runs = {m: _run_method(m, grids, vortices, metric, settings, workers) for m in methods}

    primary = runs.get("newton") or next(iter(runs.values()))
    agreement = None
    flagged = False
    if "newton" in runs and "minimize" in runs:
        agreement = float(np.abs(runs["newton"].u - runs["minimize"].u).max())
        flagged = agreement > settings.agreement_tol
    history = runs["minimize"].energy_history if "minimize" in runs else primary.energy_history
    solution = VortexSolution(grid, vortices, metric, primary.u)
    obs = observe(solution, decay_window, workers) if with_observables else None
    return SolveReport(
        converged=all(r.converged for r in runs.values()),
        iterations=primary.iterations,
        residual=primary.residual,
        energy=primary.energy,
        energy_history=history,
        wall_time=time.perf_counter() - start,
        solution=solution,
        observables=obs,
        settings=settings,
        runs=runs,
        agreement=agreement,
        flagged=flagged,
    )
