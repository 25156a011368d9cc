from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from csvortex.metric import (
    Flat,
    GaussianBump,
    MetricError,
    MetricRangeError,
    PowerGrowth,
    RadialTable,
    certify_bounds,
    evaluate,
    metric_from_dict,
    growth_ratio,
)

coord = st.floats(-16.0, 16.0)
amplitude = st.floats(0.0, 5.0)
sigma = st.floats(0.2, 6.0)
exponent = st.floats(0.0, 0.99)


def test_flat_is_one_everywhere():
    x = np.linspace(-3, 3, 7)
    assert np.array_equal(Flat()(x, x[::-1]), np.ones(7))
    assert certify_bounds(Flat(), 16.0) == (1.0, 1.0, True)


def test_bump_peak_and_far_field():
    cf = GaussianBump(amplitude=1.0, sigma=2.0)
    assert evaluate(cf, (0.0, 0.0)) == 2.0
    assert evaluate(cf, (2.0, 0.0)) == pytest.approx(1.0 + math.exp(-1.0), rel=1e-15)
    assert evaluate(cf, (40.0, 0.0)) == 1.0
    assert cf.limit_at_infinity == 1.0


def test_power_growth_values_and_unbounded_certificate():
    cf = PowerGrowth(0.5)
    assert evaluate(cf, (3.0, 4.0)) == pytest.approx(math.sqrt(26.0), rel=1e-15)
    lo, hi, uniform = certify_bounds(cf, 16.0)
    assert (lo, uniform) == (1.0, False)
    assert hi == pytest.approx(math.sqrt(1 + 2 * 256), rel=1e-15)
    assert PowerGrowth(0.0).bounds(16.0).uniformly_euclidean


def test_radial_table_reproduces_samples_and_rejects_out_of_range():
    radii = (0.0, 1.0, 2.0, 5.0, 30.0)
    values = (2.0, 1.8, 1.3, 1.05, 1.0)
    cf = RadialTable(radii, values)
    assert np.allclose(cf(np.array(radii), np.zeros(5)), values, rtol=0, atol=1e-15)
    with pytest.raises(MetricRangeError):
        cf(31.0, 0.0)
    with pytest.raises(MetricRangeError):
        cf.bounds(22.0)  # corner radius 31.1 exceeds the table
    assert cf.bounds(16.0) == (1.0, 2.0, True)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"family": "gaussian_bump", "sigma": 0.0},
        {"family": "gaussian_bump", "amplitude": -1.0},
        {"family": "power_growth", "exponent": 1.0},
        {"family": "power_growth", "exponent": -0.1},
        {"family": "radial_table", "radii": [0, 1], "values": [1.0, -1.0]},
        {"family": "radial_table", "radii": [1, 0], "values": [1.0, 1.0]},
        {"family": "radial_table", "radii": [0], "values": [1.0]},
        {"family": "hyperbolic"},
        {"family": "flat", "amplitude": 2.0},
    ],
)
def test_invalid_parameters_are_rejected(kwargs):
    with pytest.raises(MetricError):
        metric_from_dict(kwargs)


def test_evaluate_rejects_non_finite_points():
    with pytest.raises(MetricError):
        evaluate(Flat(), (math.nan, 0.0))


@pytest.mark.parametrize(
    "cf",
    [Flat(), GaussianBump(0.5, 1.5, (1.0, -2.0)), PowerGrowth(0.3), RadialTable((0.0, 50.0), (1.5, 1.0))],
)
def test_dict_round_trip(cf):
    assert metric_from_dict(cf.to_dict()) == cf


def test_off_centre_bump_is_not_radial():
    cf = GaussianBump(1.0, 1.0, (1.0, 0.0))
    assert not cf.is_radial
    with pytest.raises(MetricError):
        cf.radial_profile([1.0])


def test_growth_window_ratio_for_power_growth():
    cf = PowerGrowth(0.5)
    eps = cf.growth_epsilon
    r = np.linspace(1.0, 1e4, 2000)
    ratio = growth_ratio(cf, r, eps)
    # b r / r^(3 - eps) = sqrt(1 + r^2) / r, largest at the smallest radius
    assert ratio == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert ratio <= cf.growth_constant(1.0) * (1 + 1e-12)


@given(a=amplitude, s=sigma, cx=st.floats(-4, 4), cy=st.floats(-4, 4), x=coord, y=coord)
def test_bump_respects_certified_bounds(a, s, cx, cy, x, y):
    cf = GaussianBump(a, s, (cx, cy))
    lo, hi, uniform = cf.bounds(16.0)
    v = evaluate(cf, (x, y))
    assert uniform and lo <= v <= hi


@given(p=exponent, x=coord, y=coord)
def test_power_growth_respects_certified_bounds(p, x, y):
    cf = PowerGrowth(p)
    lo, hi, _ = cf.bounds(16.0)
    assert lo <= evaluate(cf, (x, y)) <= hi * (1 + 1e-14)


@given(
    values=st.lists(st.floats(0.1, 10.0), min_size=3, max_size=8),
    x=st.floats(-10, 10),
    y=st.floats(-10, 10),
)
def test_radial_table_interpolant_stays_within_sample_range(values, x, y):
    radii = np.linspace(0.0, 20.0, len(values))
    cf = RadialTable(tuple(radii), tuple(values))
    lo, hi, _ = cf.bounds(14.0)
    assert lo - 1e-12 <= evaluate(cf, (x, y)) <= hi + 1e-12


@given(
    cf=st.one_of(
        st.builds(GaussianBump, amplitude, sigma, st.tuples(st.floats(-3, 3), st.floats(-3, 3))),
        st.builds(PowerGrowth, exponent),
    ),
    x=st.floats(-8, 8),
    y=st.floats(-8, 8),
)
def test_gradient_matches_central_differences(cf, x, y):
    eps = 1e-6
    gx, gy = cf.gradient(x, y)
    fx = (cf(x + eps, y) - cf(x - eps, y)) / (2 * eps)
    fy = (cf(x, y + eps) - cf(x, y - eps)) / (2 * eps)
    scale = 1.0 + float(cf(x, y))
    assert abs(gx - fx) <= 1e-7 * scale
    assert abs(gy - fy) <= 1e-7 * scale


def test_arrays_broadcast():
    cf = GaussianBump(1.0, 2.0)
    x = np.linspace(-1, 1, 5)
    assert cf(x[:, None], x[None, :]).shape == (5, 5)
    assert cf(x, 0.0).shape == (5,)
