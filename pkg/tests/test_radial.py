from __future__ import annotations

import math

import numpy as np
import pytest

from csvortex.metric import Flat, GaussianBump, RadialTable
from csvortex.radial import (
    RadialError,
    RadialProblem,
    compare_with_2d,
    fit_radial_decay,
    solve_radial,
)
from csvortex.solver import solve
from csvortex.grid import Grid
from csvortex.vortices import VortexConfiguration

BUMP = GaussianBump(1.0, 2.0)


@pytest.fixture(scope="module")
def flat1():
    return solve_radial(RadialProblem(n=1))


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("metric", [Flat(), BUMP], ids=["flat", "bump"])
def test_flux_is_quantized(n, metric):
    profile = solve_radial(RadialProblem(n=n, metric=metric))
    assert profile.flux == pytest.approx(2 * math.pi * n, rel=1e-3)
    assert profile.energy == pytest.approx(math.pi * n, rel=1e-3)


def test_profile_is_negative_and_increasing_outside_the_core(flat1):
    inner = flat1.r < flat1.problem.r_max
    assert np.all(flat1.w[inner] < 0.0)
    far = (flat1.r > 3.0) & inner
    assert np.all(np.diff(flat1.w[far]) > 0.0)


def test_regression_values(flat1):
    # oracle values, confirmed by the 2D solver to 1e-3
    w = flat1.w_at(np.array([0.5, 1.0, 2.0, 5.0]))
    assert w == pytest.approx([-3.64157825, -2.26111978, -0.95277518, -0.04512636], abs=1e-7)


def test_w_does_not_depend_on_mu(flat1):
    other = solve_radial(RadialProblem(n=1, mu=9.0))
    assert np.abs(other.w[1:] - flat1.w[1:]).max() <= 1e-6
    assert np.abs(other.u - flat1.u).max() > 0.1  # the split itself does move


@pytest.mark.parametrize("metric", [Flat(), BUMP], ids=["flat", "bump"])
def test_decay_rate_matches_metric_at_infinity(metric):
    profile = solve_radial(RadialProblem(n=1, metric=metric))
    fit = fit_radial_decay(profile)
    assert fit.window == (20.0, 35.0)
    assert fit.rate == pytest.approx(math.sqrt(metric.limit_at_infinity), rel=2e-2)


def test_decay_rate_for_a_table_with_a_different_limit():
    radii = tuple(np.linspace(0.0, 60.0, 61))
    values = tuple(4.0 - 2.0 * np.exp(-np.asarray(radii)))
    profile = solve_radial(RadialProblem(n=1, metric=RadialTable(radii, values)))
    # decay like exp(-2 r): use the default window in units of the decay length,
    # [20, 35] / 2, since w ~ 1e-30 further out is below the resolution of u0 + u
    assert fit_radial_decay(profile, (10.0, 17.5)).rate == pytest.approx(2.0, rel=2e-2)


def test_halving_the_mesh_changes_w_by_less_than_1e8(flat1):
    finer = solve_radial(RadialProblem(n=1, nodes=2 * flat1.problem.nodes - 1))
    assert np.abs(finer.w[::2][1:] - flat1.w[1:]).max() <= 1e-8


def test_csv_output(flat1, tmp_path):
    path = tmp_path / "oracle.csv"
    flat1.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,u,w,Bfield"
    assert len(lines) == flat1.r.size + 1


@pytest.mark.parametrize(
    "kwargs",
    [{"n": 0}, {"mu": -1.0}, {"r_max": 0.0}, {"nodes": 4}, {"metric": GaussianBump(1.0, 1.0, (1.0, 0.0))}],
)
def test_invalid_problems(kwargs):
    with pytest.raises(RadialError):
        RadialProblem(**kwargs)


def test_table_that_stops_short_is_rejected():
    with pytest.raises(RadialError):
        solve_radial(RadialProblem(metric=RadialTable((0.0, 10.0), (1.0, 1.0))))


@pytest.fixture(scope="module")
def small_2d():
    return solve(VortexConfiguration.at((0.0, 0.0, 1)), Flat(), Grid(16.0, 129))


def test_comparison_on_a_coarse_grid(flat1, small_2d):
    dev = compare_with_2d(flat1, small_2d)
    assert dev.sup < 5e-2 and dev.l2 < dev.sup
    assert dev.nodes == 128 * 128


def test_comparison_rejects_mismatched_configurations(flat1):
    g = Grid(16.0, 65)
    offset = solve(VortexConfiguration.at((0.5, 0.0)), Flat(), g)
    with pytest.raises(RadialError, match="origin"):
        compare_with_2d(flat1, offset)
    double = solve(VortexConfiguration.at((0.0, 0.0, 2)), Flat(), g)
    with pytest.raises(RadialError, match="multiplicity"):
        compare_with_2d(flat1, double)
    bumped = solve(VortexConfiguration.at((0.0, 0.0)), BUMP, g)
    with pytest.raises(RadialError, match="metric"):
        compare_with_2d(flat1, bumped)
