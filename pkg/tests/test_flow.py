import math

import numpy as np
import pytest

from acsflow import flow
from acsflow.errors import BadConfig, BadDomain, InsufficientData
from acsflow.flow import (FlowConfig, area_derivative_check, area_law_fit,
                          entropy_monotonicity_check, renormalize_time, rhs,
                          rhs_normalized_area, rhs_normalized_tau,
                          rhs_unnormalized, run, support_scale, trace_to_csv,
                          type_diagnostic, unrenormalize_time)
from acsflow.geometry import (AngularGrid, SupportFunction, area, circle_support,
                              random_convex_support, rotate_nodes)
from acsflow.shrinker import assemble_profile

import oracles


def _perturbed(grid, m, eps):
    return SupportFunction(grid, 1.0 + eps * np.cos(m * grid.nodes))


def test_rhs_circle_values(grid256):
    u = SupportFunction(grid256, np.full(256, 2.0))
    assert np.allclose(rhs_unnormalized(u, 0.5), -(2.0**-0.5), atol=1e-13)
    one = circle_support(grid256)
    assert np.allclose(rhs_unnormalized(one, 1.0), -1.0, atol=1e-13)
    assert np.allclose(rhs_normalized_tau(one, 0.37), 0.0, atol=1e-13)
    assert np.allclose(rhs_normalized_area(one, 0.37), 0.0, atol=1e-13)
    two = SupportFunction(grid256, np.full(256, 2.0))
    assert np.allclose(rhs_normalized_tau(two, 0.5), 2.0 - 2.0**-0.5, atol=1e-13)


def test_rhs_profile_stationary():
    # the deep-ratio profile needs the finer grid: its near-corner tips
    # amplify any unresolved tail of h through the inverse curvature power
    p = assemble_profile(1 / 24, 3, 768)
    assert np.max(np.abs(rhs_normalized_tau(p.h, 1 / 24))) < 1e-6
    p4 = assemble_profile(1 / 24, 4, 512)
    assert np.max(np.abs(rhs_normalized_tau(p4.h, 1 / 24))) < 1e-6


def test_rhs_rotation_equivariance(grid256, rng):
    u = random_convex_support(grid256, rng)
    for mode in ("unnormalized", "normalized_tau", "normalized_area"):
        direct = rhs(rotate_nodes(u, 13), 0.4, mode)
        rotated = np.roll(rhs(u, 0.4, mode), -13)
        assert np.allclose(direct, rotated, atol=1e-12)


def test_config_validation(grid256):
    good = circle_support(grid256)
    with pytest.raises(BadConfig):
        run(FlowConfig(alpha=0.5, mode="bogus", initial=good, t_end=1.0))
    with pytest.raises(BadConfig):
        run(FlowConfig(alpha=1.5, mode="unnormalized", initial=good, t_end=1.0))
    with pytest.raises(BadConfig):
        run(FlowConfig(alpha=0.5, mode="unnormalized", initial=good, t_end=-1.0))
    with pytest.raises(BadConfig):
        run(FlowConfig(alpha=0.5, mode="unnormalized", initial=good, t_end=1.0,
                       dt=0.0))
    bad = SupportFunction(grid256, 1 + 0.5 * np.cos(2 * grid256.nodes))
    with pytest.raises(BadConfig):
        run(FlowConfig(alpha=0.5, mode="unnormalized", initial=bad, t_end=1.0))


def test_circle_run_matches_exact_law(grid256):
    cfg = FlowConfig(alpha=0.5, mode="unnormalized", initial=circle_support(grid256),
                     t_end=0.4, sample_dt=0.05)
    tr = run(cfg)
    assert tr.terminal_reason == "reached_end"
    for i, t in enumerate(tr.times):
        r_exact = oracles.circle_radius_at(0.5, t)
        assert tr.snapshots[i].mean() == pytest.approx(r_exact, abs=5e-12)
        assert tr.area[i] == pytest.approx(np.pi * r_exact**2, rel=1e-10)


def test_circles_stay_circles_all_modes(grid256):
    for mode in ("unnormalized", "normalized_tau", "normalized_area"):
        cfg = FlowConfig(alpha=0.37, mode=mode, initial=circle_support(grid256),
                         t_end=1e-3, sample_every=1, max_steps=2)
        tr = run(cfg)
        dev = tr.snapshots[-1].max() - tr.snapshots[-1].min()
        assert dev < 1e-12


def test_area_mode_conserves_area(grid256):
    u0 = _perturbed(grid256, 2, 0.2)
    u0 = SupportFunction(grid256, u0.values * math.sqrt(np.pi / area(u0)))
    cfg = FlowConfig(alpha=0.5, mode="normalized_area", initial=u0, t_end=4.0,
                     sample_dt=0.5, store_snapshots=False)
    tr = run(cfg)
    # worst drift across unit windows; the slice is repelling at rate 2, so
    # longer horizons only amplify rounding-level seeds
    per_unit = np.abs(np.diff(tr.area)) / np.pi / 0.5
    assert np.max(per_unit) < 1e-8


def test_area_mode_converges_to_circle(grid256):
    u0 = _perturbed(grid256, 2, 0.2)
    u0 = SupportFunction(grid256, u0.values * math.sqrt(np.pi / area(u0)))
    cfg = FlowConfig(alpha=0.5, mode="normalized_area", initial=u0, t_end=6.0,
                     sample_dt=0.5)
    tr = run(cfg)
    assert tr.terminal_reason == "reached_end"
    assert np.max(np.abs(tr.snapshots[-1] - 1.0)) < 2e-2
    assert tr.iso_ratio[-1] == pytest.approx(1 / (4 * np.pi), rel=1e-3)
    # the perturbation amplitude decays monotonically in time
    sup = [np.max(np.abs(s - np.mean(s))) for s in tr.snapshots]
    assert all(a >= b - 1e-12 for a, b in zip(sup, sup[1:]))


def test_tau_mode_shrinks_perturbation(grid256):
    # small two-mode perturbation decays in shape before the scale instability
    # of the exponential gauge takes over
    cfg = FlowConfig(alpha=0.5, mode="normalized_tau",
                     initial=_perturbed(grid256, 2, 0.05), t_end=2.0,
                     sample_dt=0.25)
    tr = run(cfg)
    amp0 = np.max(np.abs(tr.snapshots[0] - np.mean(tr.snapshots[0])))
    amp1 = np.max(np.abs(tr.snapshots[-1] - np.mean(tr.snapshots[-1])))
    # mode-2 eigenvalue of the linearization is alpha*3 - 1 = 1/2: e^{-1} decay
    assert amp1 < amp0 * math.exp(-0.5 * 2.0) * 1.2


def test_profile_is_stationary_under_tau_flow():
    p = assemble_profile(0.12, 3, 252)
    cfg = FlowConfig(alpha=0.12, mode="normalized_tau", initial=p.h, t_end=5.0,
                     sample_dt=0.5)
    tr = run(cfg)
    drift = max(np.max(np.abs(tr.snapshots[i] - p.h.values)) for i in range(len(tr)))
    assert drift < 1e-5


def test_comparison_principle(grid256):
    inner = circle_support(grid256, 0.8)
    outer = _perturbed(grid256, 3, 0.1)  # min 0.9 > 0.8
    cfg = dict(alpha=0.5, mode="unnormalized", t_end=0.2, sample_dt=0.05)
    tr_in = run(FlowConfig(initial=inner, **cfg))
    tr_out = run(FlowConfig(initial=outer, **cfg))
    for i in range(len(tr_in)):
        assert np.all(tr_in.snapshots[i] <= tr_out.snapshots[i] + 1e-8)


def test_run_rotation_equivariance(grid256):
    u0 = _perturbed(grid256, 3, 0.1)
    cfg = dict(alpha=0.4, mode="unnormalized", t_end=0.05, sample_dt=0.05)
    direct = run(FlowConfig(initial=rotate_nodes(u0, 19), **cfg)).snapshots[-1]
    rotated = np.roll(run(FlowConfig(initial=u0, **cfg)).snapshots[-1], -19)
    assert np.max(np.abs(direct - rotated)) < 1e-10


def test_min_radius_termination(grid256):
    cfg = FlowConfig(alpha=0.5, mode="unnormalized", initial=circle_support(grid256),
                     t_end=10.0, sample_every=50, store_snapshots=False)
    tr = run(cfg)
    assert tr.terminal_reason == "min_radius"
    assert tr.min_curvature[-1] >= 1.0 / (2 * 1e-3)
    assert np.all(np.diff(tr.times) > 0)


def test_area_derivative_identity(grid256, rng):
    assert area_derivative_check(circle_support(grid256), 1.0) < 1e-8
    r2 = SupportFunction(grid256, np.full(256, 2.0))
    assert area_derivative_check(r2, 0.5) < 1e-8
    u = random_convex_support(grid256, rng)
    assert area_derivative_check(u, 0.5) < 1e-6


def test_area_derivative_closed_forms(grid256):
    # dA/dt = -integral kappa^(alpha-1): circle alpha=1 gives -2 pi exactly
    one = circle_support(grid256)
    w = np.ones(256)
    assert -grid256.dtheta * np.sum(w ** (1 - 1.0)) == pytest.approx(-2 * np.pi)
    tr = run(FlowConfig(alpha=1.0, mode="unnormalized", initial=one, t_end=0.01,
                        sample_dt=0.01))
    slope = (tr.area[-1] - tr.area[0]) / 0.01
    assert slope == pytest.approx(-2 * np.pi, rel=1e-3)


def test_area_law_circle(grid256):
    cfg = FlowConfig(alpha=0.5, mode="unnormalized", initial=circle_support(grid256),
                     t_end=1.0, sample_every=40, store_snapshots=False)
    fit = area_law_fit(run(cfg))
    assert fit.exponent == pytest.approx(4.0 / 3.0, rel=0.01)
    assert fit.t_extinction == pytest.approx(oracles.circle_extinction_time(0.5),
                                             abs=1e-6)


def test_area_law_insufficient(grid256):
    cfg = FlowConfig(alpha=0.5, mode="unnormalized", initial=circle_support(grid256),
                     t_end=0.01, sample_dt=0.005)
    with pytest.raises(InsufficientData):
        area_law_fit(run(cfg))


def test_entropy_monotone_short(grid256):
    u0 = _perturbed(grid256, 2, 0.2)
    cfg = FlowConfig(alpha=0.5, mode="normalized_area", initial=u0, t_end=1.0,
                     sample_dt=0.1, log_entropy=True, store_snapshots=False)
    tr = run(cfg)
    assert entropy_monotonicity_check(tr) <= 1e-7
    # strict decrease away from the circle
    assert tr.entropy[1] < tr.entropy[0]


def test_entropy_check_requires_logging(grid256):
    cfg = FlowConfig(alpha=0.5, mode="normalized_area",
                     initial=_perturbed(grid256, 2, 0.1), t_end=0.2, sample_dt=0.1)
    with pytest.raises(InsufficientData):
        entropy_monotonicity_check(run(cfg))


def test_type_diagnostic_circle(grid256):
    cfg = FlowConfig(alpha=0.5, mode="unnormalized", initial=circle_support(grid256),
                     t_end=1.0, sample_every=40, store_snapshots=False)
    td = type_diagnostic(run(cfg))
    assert td.verdict == "typeI_like"
    assert np.allclose(td.ratio_series, 1 / (4 * np.pi), rtol=1e-8)


def test_type_diagnostic_exploratory(grid256):
    # eccentric data at small alpha: verdict recorded, membership only
    th = grid256.nodes
    u0 = SupportFunction(grid256, 1 + 0.15 * np.cos(2 * th) + 0.03 * np.cos(3 * th))
    cfg = FlowConfig(alpha=0.2, mode="unnormalized", initial=u0, t_end=2.0,
                     sample_every=30, store_snapshots=False)
    td = type_diagnostic(run(cfg))
    assert td.verdict in ("typeI_like", "typeII_like", "inconclusive")


def test_renormalize_time_round_trip():
    assert renormalize_time(-1.0, 0.37) == 0.0
    assert renormalize_time(-math.exp(2.0), 1.0) == pytest.approx(-1.0, abs=1e-15)
    for alpha in (0.2, 0.5):
        for t in (-2.0, -0.3, -1e-4):
            tau = renormalize_time(t, alpha)
            assert unrenormalize_time(tau, alpha) == pytest.approx(t, rel=1e-14)
    with pytest.raises(BadDomain):
        renormalize_time(0.0, 0.5)
    with pytest.raises(BadDomain):
        renormalize_time(1.0, 0.5)


def test_support_scale_factor():
    assert support_scale(0.0, 0.5) == pytest.approx(1.5 ** (-1 / 1.5))
    assert support_scale(1.0, 0.5) == pytest.approx(1.5 ** (-1 / 1.5) * math.e)


def test_trace_csv_format(grid256):
    cfg = FlowConfig(alpha=0.5, mode="unnormalized", initial=circle_support(grid256),
                     t_end=0.02, sample_dt=0.01)
    text = trace_to_csv(run(cfg))
    lines = text.strip().splitlines()
    assert lines[0] == "time,area,length,iso_ratio,min_curv,max_curv,entropy"
    assert lines[1].endswith(",")  # entropy column empty when not logged


def test_max_steps_reason(grid256):
    cfg = FlowConfig(alpha=0.5, mode="unnormalized", initial=circle_support(grid256),
                     t_end=0.4, sample_every=5, max_steps=20)
    tr = run(cfg)
    assert tr.terminal_reason == "max_steps"
    assert tr.n_steps == 20
