"""The ten acceptance criteria, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict that is repeated in the
terminal summary.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import RectBivariateSpline

from csvortex import RadialProblem, compare_with_2d, solve_radial
from csvortex.observables import fit_decay
from csvortex.solver import DiscreteProblem

from conftest import METRICS, cached_solve

RUNS = [
    (layout, n, metric)
    for metric in ("flat", "bump")
    for n in (1, 2, 3)
    for layout in ("origin", "offset")
]


def _label(layout, n, metric):
    return f"{metric}/n={n}/{layout}"


def test_criterion_01_flux_quantization(record_criterion):
    errors = {}
    for case in RUNS:
        rep = cached_solve(*case)
        n = case[1]
        errors[_label(*case)] = abs(rep.observables.flux - 2 * math.pi * n) / (2 * math.pi * n)
    worst = max(errors, key=errors.get)
    passed = all(e <= 0.01 for e in errors.values())
    record_criterion(1, "flux quantization", passed, f"max rel. error {errors[worst]:.2e} ({worst}), limit 1e-2")
    assert passed, errors


def test_criterion_02_bps_energy(record_criterion):
    errors = {}
    for case in RUNS:
        rep = cached_solve(*case)
        n = case[1]
        errors[_label(*case)] = abs(rep.observables.energy - math.pi * n) / (math.pi * n)
    worst = max(errors, key=errors.get)
    passed = all(e <= 0.02 for e in errors.values())
    record_criterion(2, "BPS energy saturation", passed, f"max rel. error {errors[worst]:.2e} ({worst}), limit 2e-2")
    assert passed, errors


def test_criterion_03_maximum_principle(record_criterion):
    cases = RUNS + [("origin", 1, "power"), ("none", 0, "flat")]
    w_max = {}
    for case in cases:
        rep = cached_solve(*case)
        assert rep.converged
        w_max[_label(*case)] = float(rep.w.values.max())
    worst = max(w_max, key=w_max.get)
    passed = all(v <= 1e-8 for v in w_max.values())
    record_criterion(3, "maximum principle", passed, f"max w {w_max[worst]:.2e} ({worst}), limit 1e-8")
    assert passed, w_max


def test_criterion_04_oracle_equivalence(record_criterion):
    sups = {}
    for n, metric in ((1, "flat"), (2, "flat"), (1, "bump"), (2, "bump")):
        rep = cached_solve("origin", n, metric)
        profile = solve_radial(RadialProblem(n=n, metric=METRICS[metric]))
        sups[f"{metric}/n={n}"] = compare_with_2d(profile, rep).sup
    worst = max(sups, key=sups.get)
    passed = all(v <= 5e-3 for v in sups.values())
    record_criterion(4, "oracle equivalence", passed, f"max sup deviation {sups[worst]:.2e} ({worst}), limit 5e-3")
    assert passed, sups


def test_criterion_05_decay_bound(record_criterion):
    fits = {}
    ok = True
    for case in RUNS:
        obs = cached_solve(*case).observables
        assert obs.decay_error is None, obs.decay_error
        fits[_label(*case)] = obs.decay_b
        ok &= 0.95 <= obs.decay_b <= 1.05
    for case in RUNS:
        fit = fit_decay(cached_solve(*case).w)
        ok &= fit.bound_holds()
    lo, hi = min(fits.values()), max(fits.values())
    record_criterion(5, "decay bound", ok, f"b_fit in [{lo:.4f}, {hi:.4f}], required [0.95, 1.05]; envelope holds: {ok}")
    assert ok, fits


def test_criterion_06_mu_robustness(record_criterion):
    worst = {}
    for layout, n in (("origin", 1), ("offset", 2)):
        fields = [cached_solve(layout, n, "flat", mu=mu).w.values for mu in (1.0, 4.0, 9.0)]
        worst[f"{layout}/n={n}"] = max(float(np.abs(a - b).max()) for a in fields for b in fields)
    key = max(worst, key=worst.get)
    passed = all(v <= 5e-3 for v in worst.values())
    record_criterion(6, "mu-robustness", passed, f"sup |w_mu - w_mu'| over mu in {{1, 4, 9}}: {worst[key]:.2e} ({key}), limit 5e-3")
    assert passed, worst


def test_criterion_07_no_vortex_triviality(record_criterion):
    worst = 0.0
    for metric in ("flat", "bump", "power"):
        rep = cached_solve("none", 0, metric)
        obs = rep.observables
        values = [obs.flux, obs.energy, obs.spin_direct, obs.spin_by_parts, obs.w_max]
        worst = max([worst, float(np.abs(rep.solution.u).max())] + [abs(v) for v in values])
    passed = worst <= 1e-8
    record_criterion(7, "no-vortex triviality", passed, f"max |u|, |observable| {worst:.2e}, limit 1e-8")
    assert passed


def _smooth_perturbation(rng, grid, amplitude):
    """Random low sine modes; each vanishes on the faces x, y = +-L."""
    L = grid.half_width
    X, Y = grid.mesh
    d = np.zeros(grid.shape)
    for _ in range(4):
        kx, ky = rng.integers(1, 6, size=2)
        d += rng.normal() * np.sin(kx * np.pi * (X + L) / (2 * L)) * np.sin(ky * np.pi * (Y + L) / (2 * L))
    return amplitude * d / np.abs(d).max()


def test_criterion_08_minimizer_newton_agreement(record_criterion):
    rng = np.random.default_rng(20240611)
    agreement, monotone, lowest = 0.0, True, math.inf
    for case in (("origin", 1, "flat"), ("offset", 2, "bump")):
        rep = cached_solve(*case)
        agreement = max(agreement, rep.agreement)
        monotone &= bool(np.all(np.diff(np.asarray(rep.energy_history)) <= 0.0))
        sol = rep.solution
        prob = DiscreteProblem.with_vacuum_faces(sol.grid, sol.vortices, sol.metric)
        u = rep.runs["minimize"].u
        for _ in range(100):
            lowest = min(lowest, prob.energy_change(u, _smooth_perturbation(rng, sol.grid, 1e-2)))
    passed = agreement <= 1e-6 and monotone and lowest >= -1e-10
    record_criterion(
        8,
        "minimizer/Newton cross-agreement",
        passed,
        f"sup |u_N - u_M| {agreement:.2e} (limit 1e-6), history monotone: {monotone}, "
        f"min dE over 100 perturbations {lowest:.2e} (limit -1e-10)",
    )
    assert passed


def test_criterion_09_growing_metric(record_criterion):
    rep = cached_solve("origin", 1, "power")
    err = abs(rep.observables.flux - 2 * math.pi) / (2 * math.pi)
    passed = rep.converged and err <= 0.01
    record_criterion(9, "polynomially growing metric", passed, f"PowerGrowth(0.5) converged: {rep.converged}, flux rel. error {err:.2e}, limit 1e-2")
    assert passed


def _grid_difference(coarse, fine):
    """sup |u_coarse - u_fine| at the coarse nodes (cubic interpolation of the fine field)."""
    gc, gf = coarse.solution.grid, fine.solution.grid
    spline = RectBivariateSpline(gf.coords, gf.coords, fine.solution.u.T, kx=3, ky=3)
    return float(np.abs(spline(gc.coords, gc.coords).T - coarse.solution.u).max())


def test_criterion_10_discretization_order(record_criterion):
    runs = {N: cached_solve("origin", 1, "flat", nodes=N, method="newton") for N in (129, 257, 513)}
    d1 = _grid_difference(runs[129], runs[257])
    d2 = _grid_difference(runs[257], runs[513])
    ratio = d1 / d2
    passed = 3.0 <= ratio <= 5.0
    record_criterion(10, "discretization order", passed, f"|w129-w257| {d1:.3e}, |w257-w513| {d2:.3e}, ratio {ratio:.3f}, required [3, 5]")
    assert passed
