import math

import numpy as np
import pytest

from acsflow.entropy import check_subcritical_bound, entropy, entropy_at
from acsflow.errors import OutOfRange, PointOutside
from acsflow.geometry import (SupportFunction, circle_support, ellipse_support,
                              random_convex_support, translate)
from acsflow.shrinker import assemble_profile, shrinker_entropy

import oracles


def test_unit_circle_zero(grid256):
    u = circle_support(grid256)
    assert entropy_at(u, (0.0, 0.0), 0.5) == pytest.approx(0.0, abs=1e-14)
    res = entropy(u, 0.5)
    assert res.value == pytest.approx(0.0, abs=1e-12)
    assert np.hypot(*res.point) < 1e-8


def test_scale_invariance(grid256, rng):
    u = random_convex_support(grid256, rng)
    base = entropy(u, 0.25).value
    for lam in (0.5, 2.0, 10.0):
        scaled = SupportFunction(grid256, lam * u.values)
        assert entropy(scaled, 0.25).value == pytest.approx(base, abs=1e-9)


def test_translation_equivariance(grid256, rng):
    u = random_convex_support(grid256, rng)
    res = entropy(u, 0.5)
    z = (0.17, -0.08)
    moved = entropy(translate(u, z), 0.5)
    assert moved.value == pytest.approx(res.value, abs=1e-9)
    assert moved.point[0] == pytest.approx(res.point[0] - z[0], abs=1e-6)
    assert moved.point[1] == pytest.approx(res.point[1] - z[1], abs=1e-6)


def test_shifted_circle(grid256):
    u = circle_support(grid256, 1.0, (0.3, 0.0))
    res = entropy(u, 0.5)
    assert res.value == pytest.approx(0.0, abs=1e-12)
    assert res.point[0] == pytest.approx(0.3, abs=1e-7)
    assert abs(res.point[1]) < 1e-7


def test_point_outside(grid256):
    u = circle_support(grid256)
    with pytest.raises(PointOutside):
        entropy_at(u, (1.2, 0.0), 0.5)
    with pytest.raises(PointOutside):
        entropy_at(u, (1.0 - 1e-12, 0.0), 0.5)


def test_alpha_domain(grid256):
    u = circle_support(grid256)
    with pytest.raises(OutOfRange):
        entropy_at(u, (0.0, 0.0), 1.5)
    with pytest.raises(OutOfRange):
        entropy_at(u, (0.0, 0.0), 0.0)


def test_near_boundary_blowup(grid256):
    # closed form for the circle: mean of u^(1-1/alpha) at alpha = 1/2
    u = circle_support(grid256)
    val = entropy_at(u, (0.999, 0.0), 0.5)
    assert val == pytest.approx(-math.log(oracles.poisson_mean(0.999)), abs=1e-4)
    closer = entropy_at(u, (0.9999, 0.0), 0.5)
    assert closer < val < entropy_at(u, (0.9, 0.0), 0.5) < 0.0


def test_log_branch_at_alpha_one(grid256):
    u = circle_support(grid256)
    assert entropy_at(u, (0.0, 0.0), 1.0) == pytest.approx(0.0, abs=1e-14)
    assert entropy_at(u, (0.3, 0.0), 1.0) < 0.0
    res = entropy(u, 1.0)
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_alpha_monotone_at_fixed_point(grid256, rng):
    for _ in range(3):
        u = random_convex_support(grid256, rng)
        vals = [entropy_at(u, (0.05, -0.02), a) for a in (0.1, 0.2, 1 / 3, 0.6, 1.0)]
        assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))


def test_ellipse_affine_critical_zero(grid256):
    res = entropy(ellipse_support(grid256, 5, 1), 1 / 3)
    assert abs(res.value) < 1e-6
    assert np.hypot(*res.point) < 1e-6


def test_subcritical_bound_random(grid256, rng):
    for alpha in (0.1, 0.2, 1 / 3):
        for _ in range(5):
            u = random_convex_support(grid256, rng)
            assert check_subcritical_bound(u, alpha)


def test_subcritical_bound_domain(grid256):
    with pytest.raises(OutOfRange):
        check_subcritical_bound(circle_support(grid256), 0.5)


def test_value_dominates_probes(grid256, rng):
    u = random_convex_support(grid256, rng)
    res = entropy(u, 0.3)
    for z in [(0.0, 0.0), (0.1, 0.1), (-0.2, 0.05)]:
        assert res.value >= entropy_at(u, z, 0.3) - 1e-12
    # reported point is strictly interior
    moved = translate(u, res.point)
    assert np.min(moved.values) > 0.0


def test_matches_profile_entropy():
    p3 = assemble_profile(1 / 24, 3, 510)
    res = entropy(p3.h, 1 / 24)
    assert res.value == pytest.approx(shrinker_entropy(1 / 24, 3), abs=1e-6)
    assert np.hypot(*res.point) < 1e-6
