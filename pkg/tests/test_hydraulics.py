"""Friction physics: Reynolds, Colebrook, theta, and the reduced friction maps."""

import numpy as np
import pytest

from dhflow.errors import NumericsError
from dhflow.graph import classify_edges, fundamental_loop_matrix
from dhflow.hydraulics import (
    FluidProps,
    PipeGeometry,
    colebrook_friction,
    colebrook_residual,
    edge_pressure_loss,
    generic_friction_map,
    reduced_friction_maps,
    reynolds,
    theta_from_geometry,
)
from dhflow.reduced import build_reduced_model
from dhflow.scenario import build_fig3_network, build_radial_network, synthesize_network


def bisect_colebrook(rel_roughness, re, lo=1e-4, hi=0.5, tol=1e-14):
    """Independent oracle: bisection on the Colebrook residual in k."""
    f_lo = colebrook_residual(lo, rel_roughness, re)
    f_hi = colebrook_residual(hi, rel_roughness, re)
    assert f_lo > 0 > f_hi, "bracket does not straddle the root"
    while hi - lo > tol * lo:
        mid = 0.5 * (lo + hi)
        if colebrook_residual(mid, rel_roughness, re) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


# ---------------------------------------------------------------------------
# reynolds
# ---------------------------------------------------------------------------


def test_reynolds_value():
    geom = PipeGeometry(length=50.0, diameter=0.1)
    fluid = FluidProps(density=1000.0, viscosity=1e-3, nominal_flow=0.01)
    re = reynolds(0.01, geom, fluid)
    # rho |q| / ((pi d / 4) nu), evaluated independently
    assert re == pytest.approx(127323.95447351628, rel=1e-12)
    assert re == pytest.approx(1.273e5, rel=1e-3)


def test_reynolds_sign_invariant():
    geom = PipeGeometry(length=50.0, diameter=0.1)
    fluid = FluidProps(density=1000.0, viscosity=1e-3)
    assert reynolds(-0.02, geom, fluid) == reynolds(0.02, geom, fluid)


def test_reynolds_viscosity_scaling():
    geom = PipeGeometry(length=50.0, diameter=0.1)
    a = reynolds(0.02, geom, FluidProps(density=1000.0, viscosity=1e-3))
    b = reynolds(0.02, geom, FluidProps(density=1000.0, viscosity=2e-3))
    assert a == pytest.approx(2.0 * b, rel=1e-14)


def test_reynolds_zero_flow_rejected():
    geom = PipeGeometry(length=50.0, diameter=0.1)
    with pytest.raises(NumericsError, match="zero nominal flow"):
        reynolds(0.0, geom, FluidProps())


# ---------------------------------------------------------------------------
# colebrook_friction
# ---------------------------------------------------------------------------


def test_colebrook_reference_values():
    k = colebrook_friction(1e-3, 1e5)
    assert k == pytest.approx(0.0222, abs=2e-4)
    k_smooth = colebrook_friction(0.0, 1e5)
    assert k_smooth == pytest.approx(0.018, abs=2e-4)


@pytest.mark.parametrize("rr", [0.0, 1e-4, 1e-3, 1e-2])
@pytest.mark.parametrize("re", [1e4, 1e5, 1e6])
def test_colebrook_against_bisection(rr, re):
    k = colebrook_friction(rr, re)
    assert abs(colebrook_residual(k, rr, re)) < 1e-12
    assert k == pytest.approx(bisect_colebrook(rr, re), abs=1e-10)


def test_colebrook_domain_errors():
    with pytest.raises(NumericsError, match="Re > 0"):
        colebrook_friction(1e-3, 0.0)
    with pytest.raises(NumericsError, match="Re > 0"):
        colebrook_friction(1e-3, -10.0)
    with pytest.raises(NumericsError, match="roughness"):
        colebrook_friction(-1e-3, 1e5)


# ---------------------------------------------------------------------------
# theta_from_geometry / edge_pressure_loss
# ---------------------------------------------------------------------------


def test_theta_value():
    geom = PipeGeometry(length=100.0, diameter=0.1)
    fluid = FluidProps(density=1000.0, viscosity=1e-3)
    assert theta_from_geometry(0.02, geom, fluid) == pytest.approx(10000.0, rel=1e-14)


def test_theta_zero_for_pump_placeholder():
    geom = PipeGeometry(length=100.0, diameter=0.1)
    assert theta_from_geometry(0.0, geom, FluidProps()) == 0.0


def test_theta_linear_in_length():
    fluid = FluidProps(density=1000.0, viscosity=1e-3)
    t1 = theta_from_geometry(0.02, PipeGeometry(length=100.0, diameter=0.1), fluid)
    t2 = theta_from_geometry(0.02, PipeGeometry(length=300.0, diameter=0.1), fluid)
    assert t2 == pytest.approx(3.0 * t1, rel=1e-14)


def test_pressure_loss_basics():
    assert edge_pressure_loss(2.0, 0.0) == 0.0
    assert edge_pressure_loss(2.0, 3.0) == pytest.approx(18.0)
    assert edge_pressure_loss(2.0, -3.0) == pytest.approx(-18.0)


def test_pressure_loss_derivative_matches_finite_differences():
    theta = 7.3e3
    rng = np.random.default_rng(5)
    for q in rng.uniform(0.01, 0.5, size=20) * rng.choice([-1.0, 1.0], size=20):
        h = 1e-6 * abs(q)
        fd = (edge_pressure_loss(theta, q + h) - edge_pressure_loss(theta, q - h)) / (2 * h)
        assert fd == pytest.approx(2.0 * theta * abs(q), rel=1e-6)


# ---------------------------------------------------------------------------
# reduced vs generic friction maps
# ---------------------------------------------------------------------------


def _model_for(graph, theta):
    cls = classify_edges(graph)
    lm = fundamental_loop_matrix(graph, cls)
    return lm, build_reduced_model(graph, theta)


def test_zero_flows_give_zero_losses():
    graph, theta = build_fig3_network()
    lm, model = _model_for(graph, theta)
    f_ch, f_pr = reduced_friction_maps(lm, model.theta_edge, np.zeros(2), np.zeros(2))
    assert np.all(f_ch == 0.0) and np.all(f_pr == 0.0)


def test_fig3_closed_form_matches_generic():
    graph, theta = build_fig3_network()
    lm, model = _model_for(graph, theta)
    q_ch = np.array([0.01, 0.02])
    q_pr = np.array([0.015, 0.005])
    a = reduced_friction_maps(lm, model.theta_edge, q_ch, q_pr)
    b = generic_friction_map(lm, model.theta_edge, q_ch, q_pr)
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12, atol=0.0)


@pytest.mark.parametrize("seed", [2, 9])
def test_closed_form_matches_generic_on_random_networks(seed):
    net = synthesize_network(seed=seed, n_producers=3, n_consumers=6, loops_per_layer=2)
    lm, model = _model_for(net.graph, net.theta_by_edge)
    rng = np.random.default_rng(seed)
    q_ch = rng.uniform(-0.5, 0.5, size=(1000, lm.n_ch))
    q_pr = rng.uniform(-0.5, 0.5, size=(1000, lm.n_pr))
    fc1, fp1 = reduced_friction_maps(lm, model.theta_edge, q_ch, q_pr)
    fc2, fp2 = generic_friction_map(lm, model.theta_edge, q_ch, q_pr)
    scale = max(np.abs(fc2).max(), np.abs(fp2).max())
    assert np.abs(fc1 - fc2).max() <= 1e-12 * scale
    assert np.abs(fp1 - fp2).max() <= 1e-12 * scale


def test_radial_generic_map_reduces_to_single_loss_law():
    graph, theta = build_radial_network()
    lm, model = _model_for(graph, theta)
    # With the producer at rest, every distribution-loop edge carries +-q and
    # the chord loss is the plain quadratic law with the aggregated theta.
    loop_edges = [1, 2, 4, 5, 6, 7]  # consumer chain, outlet chain, cold inlet
    theta_total = sum(theta[e] for e in loop_edges)
    for q in (0.05, -0.12, 0.3):
        f_ch, _ = generic_friction_map(lm, model.theta_edge, np.array([q]), np.zeros(1))
        assert f_ch[0] == pytest.approx(-theta_total * abs(q) * q, rel=1e-12)


def test_producer_losses_decoupled():
    """f_pr,i ignores every other producer's flow."""
    graph, theta = build_fig3_network()
    lm, model = _model_for(graph, theta)
    q_ch = np.array([0.01, 0.02])
    base = reduced_friction_maps(lm, model.theta_edge, q_ch, np.array([0.03, 0.04]))[1]
    bumped = reduced_friction_maps(lm, model.theta_edge, q_ch, np.array([0.03, -0.25]))[1]
    assert bumped[0] == base[0]
    assert bumped[1] != base[1]


def test_friction_maps_monotone():
    """(a - b)^T (f_ch(a) - f_ch(b)) <= 0 on random pairs."""
    net = synthesize_network(seed=4, n_producers=2, n_consumers=5, loops_per_layer=1)
    lm, model = _model_for(net.graph, net.theta_by_edge)
    rng = np.random.default_rng(11)
    a = rng.uniform(-0.5, 0.5, size=(2000, lm.n_ch))
    b = rng.uniform(-0.5, 0.5, size=(2000, lm.n_ch))
    q_pr = np.zeros((2000, lm.n_pr))
    fa, _ = reduced_friction_maps(lm, model.theta_edge, a, q_pr)
    fb, _ = reduced_friction_maps(lm, model.theta_edge, b, q_pr)
    inner = np.sum((a - b) * (fa - fb), axis=1)
    assert inner.max() <= 1e-9


def test_dimension_mismatch_rejected():
    graph, theta = build_fig3_network()
    lm, model = _model_for(graph, theta)
    with pytest.raises(ValueError, match="inconsistent"):
        reduced_friction_maps(lm, model.theta_edge, np.zeros(3), np.zeros(2))
    with pytest.raises(ValueError, match="theta_edge"):
        generic_friction_map(lm, model.theta_edge[:-1], np.zeros(2), np.zeros(2))
