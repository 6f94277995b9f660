import numpy as np
import pytest

from acsflow.errors import NonConvex
from acsflow.geometry import (AngularGrid, SupportFunction, area, circle_support,
                              convexity_report, curvature, ellipse_support, embed,
                              fourier_modes, isoperimetric_ratio, length,
                              radius_of_curvature, random_convex_support,
                              rotate_nodes, steiner_point, support_from_csv,
                              support_from_json, support_to_csv, support_to_json,
                              synthesize, translate)

import oracles


def test_grid_validation():
    with pytest.raises(ValueError):
        AngularGrid(15)
    with pytest.raises(ValueError):
        AngularGrid(14)
    assert AngularGrid(16).nodes[0] == 0.0
    g = AngularGrid(256)
    assert len(g.nodes) == 256
    assert np.isclose(g.nodes[-1], 2 * np.pi - g.dtheta)


def test_support_validation(grid256):
    with pytest.raises(ValueError):
        SupportFunction(grid256, np.ones(100))
    with pytest.raises(ValueError):
        SupportFunction(grid256, np.full(256, np.nan))


def test_radius_of_curvature_circle(grid256):
    u = circle_support(grid256)
    assert np.allclose(radius_of_curvature(u), 1.0, atol=1e-13)


def test_radius_of_curvature_translated_circle(grid256):
    u = circle_support(grid256, 1.0, (0.3, 0.0))
    assert np.allclose(radius_of_curvature(u), 1.0, atol=1e-13)


def test_radius_of_curvature_two_mode(grid256):
    eps = 0.05
    th = grid256.nodes
    u = SupportFunction(grid256, 1 + eps * np.cos(2 * th))
    assert np.allclose(radius_of_curvature(u), 1 - 3 * eps * np.cos(2 * th), atol=1e-13)


def test_curvature_circles(grid256):
    assert np.allclose(curvature(SupportFunction(grid256, np.full(256, 2.0))), 0.5)
    assert np.allclose(curvature(circle_support(grid256)), 1.0)


def test_curvature_ellipse_tip(grid256):
    u = ellipse_support(grid256, 2.0, 1.0)
    # at theta = 0 the normal hits the major-axis tip where kappa = a/b^2
    assert curvature(u)[0] == pytest.approx(2.0, rel=1e-9)


def test_curvature_raises_nonconvex(grid256):
    th = grid256.nodes
    bad = SupportFunction(grid256, 1 + 0.5 * np.cos(2 * th))
    with pytest.raises(NonConvex):
        curvature(bad)


def test_area_circle_and_translation(grid256):
    assert area(circle_support(grid256)) == pytest.approx(np.pi, rel=1e-14)
    shifted = circle_support(grid256, 1.0, (0.3, 0.0))
    assert area(shifted) == pytest.approx(np.pi, rel=1e-14)


def test_area_ellipse(grid256):
    assert area(ellipse_support(grid256, 2, 1)) == pytest.approx(
        oracles.ellipse_area(2, 1), rel=1e-12)


def test_length_circles(grid256):
    assert length(circle_support(grid256)) == pytest.approx(2 * np.pi, rel=1e-14)
    assert length(SupportFunction(grid256, np.full(256, 2.5))) == pytest.approx(
        5 * np.pi, rel=1e-14)


def test_length_ellipse(grid256):
    assert length(ellipse_support(grid256, 2, 1)) == pytest.approx(
        oracles.ellipse_length(2, 1), rel=1e-12)


def test_translate_definition(grid256):
    u = circle_support(grid256)
    same = translate(u, (0.0, 0.0))
    assert np.allclose(same.values, u.values)
    shifted = translate(u, (0.5, 0.0))
    assert np.allclose(shifted.values, 1 - 0.5 * np.cos(grid256.nodes), atol=1e-15)


def test_translate_preserves_area(grid256, rng):
    for _ in range(5):
        u = random_convex_support(grid256, rng)
        z = rng.normal(scale=0.3, size=2)
        assert area(translate(u, z)) == pytest.approx(area(u), rel=1e-10)
        assert np.allclose(radius_of_curvature(translate(u, z)),
                           radius_of_curvature(u), atol=1e-12)


def test_embed_circle(grid256):
    pts = embed(circle_support(grid256))
    th = grid256.nodes
    assert np.allclose(pts, np.stack([np.cos(th), np.sin(th)], axis=1), atol=1e-13)
    shifted = embed(circle_support(grid256, 1.0, (0.5, 0.0)))
    assert np.allclose(shifted - [0.5, 0.0],
                       np.stack([np.cos(th), np.sin(th)], axis=1), atol=1e-12)


def test_embed_arclength_relation(rng):
    # |X_{i+1} - X_i| = w_i dtheta (1 + O(dtheta)); the deviation must shrink
    # at least quadratically with the grid because of symmetric differencing
    devs = []
    for n in (256, 512):
        grid = AngularGrid(n)
        u = random_convex_support(grid, np.random.default_rng(7))
        pts = embed(u)
        w = radius_of_curvature(u)
        seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
        mid_w = 0.5 * (w + np.roll(w, -1))
        devs.append(np.max(np.abs(seg / (mid_w * grid.dtheta) - 1)))
    assert devs[0] < 30 * (2 * np.pi / 256) ** 2
    assert devs[0] / devs[1] > 3.0


def test_isoperimetric_circle(grid256):
    assert isoperimetric_ratio(circle_support(grid256)) == pytest.approx(
        1 / (4 * np.pi), rel=1e-13)
    assert isoperimetric_ratio(SupportFunction(grid256, np.full(256, 7.0))
                               ) == pytest.approx(1 / (4 * np.pi), rel=1e-13)


def test_isoperimetric_ellipse_below_circle(grid256):
    val = isoperimetric_ratio(ellipse_support(grid256, 3, 1))
    expected = oracles.ellipse_area(3, 1) / oracles.ellipse_length(3, 1) ** 2
    assert val == pytest.approx(expected, rel=1e-10)
    assert val < 1 / (4 * np.pi)


def test_isoperimetric_inequality_random(grid256, rng):
    for _ in range(20):
        u = random_convex_support(grid256, rng)
        assert isoperimetric_ratio(u) <= 1 / (4 * np.pi) + 1e-12


def test_fourier_modes_basic(grid256):
    m = fourier_modes(circle_support(grid256), 5)
    assert m.a0 == pytest.approx(1.0)
    assert np.allclose(m.a, 0, atol=1e-15) and np.allclose(m.b, 0, atol=1e-15)

    th = grid256.nodes
    m = fourier_modes(SupportFunction(grid256, 0.25 * np.sin(3 * th) + 1.0), 5)
    assert m.b[2] == pytest.approx(0.25, abs=1e-15)
    assert abs(m.a).max() < 1e-15
    assert abs(np.delete(m.b, 2)).max() < 1e-15


def test_fourier_round_trip(grid256, rng):
    u = random_convex_support(grid256, rng, max_mode=8)
    back = synthesize(grid256, fourier_modes(u, 8))
    assert np.allclose(back.values, u.values, atol=1e-14)


def test_fourier_modes_validates_m_max(grid256):
    with pytest.raises(ValueError):
        fourier_modes(circle_support(grid256), 128)


def test_scaling_covariance(grid256, rng):
    u = random_convex_support(grid256, rng)
    for lam in (0.5, 2.0, 10.0):
        scaled = SupportFunction(grid256, lam * u.values)
        assert area(scaled) == pytest.approx(lam**2 * area(u), rel=1e-12)
        assert length(scaled) == pytest.approx(lam * length(u), rel=1e-12)


def test_translation_invariance_suite(grid256, rng):
    u = random_convex_support(grid256, rng)
    z = (0.21, -0.13)
    v = translate(u, z)
    assert area(v) == pytest.approx(area(u), rel=1e-10)
    assert length(v) == pytest.approx(length(u), rel=1e-10)
    assert isoperimetric_ratio(v) == pytest.approx(isoperimetric_ratio(u), rel=1e-10)


def test_spectral_exactness_trig_polynomial(grid256):
    th = grid256.nodes
    vals = 2.0 + 0.1 * np.cos(7 * th) - 0.05 * np.sin(20 * th)
    u = SupportFunction(grid256, vals)
    exact = 2.0 + (1 - 49) * 0.1 * np.cos(7 * th) - (1 - 400) * 0.05 * np.sin(20 * th)
    w = radius_of_curvature(u)
    assert np.max(np.abs(w - exact)) / np.max(np.abs(exact)) < 1e-12


def test_rotation_helper(grid256, rng):
    u = random_convex_support(grid256, rng)
    r = rotate_nodes(u, 32)
    assert np.allclose(r.values, np.roll(u.values, -32))
    assert area(r) == pytest.approx(area(u), rel=1e-12)


def test_steiner_point_translated_circle(grid256):
    p = steiner_point(circle_support(grid256, 1.0, (0.3, -0.2)))
    assert np.allclose(p, [0.3, -0.2], atol=1e-12)


def test_convexity_report(grid256):
    rep = convexity_report(circle_support(grid256))
    assert rep.is_strictly_convex
    assert rep.min_radius_of_curvature == pytest.approx(1.0)
    th = grid256.nodes
    flat = convexity_report(SupportFunction(grid256, 1 + 0.5 * np.cos(2 * th)))
    assert not flat.is_strictly_convex


def test_json_round_trip(grid256, rng):
    u = random_convex_support(grid256, rng)
    back = support_from_json(support_to_json(u))
    assert back.grid.n == u.grid.n
    assert np.max(np.abs(back.values - u.values)) <= 1e-15 * np.max(np.abs(u.values))


def test_csv_round_trip(grid256, rng):
    u = random_convex_support(grid256, rng)
    back = support_from_csv(support_to_csv(u))
    assert back.grid.n == u.grid.n
    assert np.allclose(back.values, u.values, rtol=1e-15, atol=0)
