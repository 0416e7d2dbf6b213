"""Scenario parsing, validation diagnostics and the synthetic generator."""

import json
from pathlib import Path

import numpy as np
import pytest

from dhflow.errors import ScenarioError
from dhflow.graph import classify_edges
from dhflow.hydraulics import FluidProps, PipeGeometry, colebrook_friction, reynolds, theta_from_geometry
from dhflow.scenario import (
    fig3_scenario_dict,
    parse_scenario,
    reference_scenario_dict,
    scenario_from_dict,
    synthesize_network,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def test_fig3_scenario_parses_and_validates():
    sc = parse_scenario(SCENARIO_DIR / "fig3.json")
    assert sc.name == "fig3"
    model = sc.build_model()
    assert model.n_ch == 2 and model.n_pr == 2


def test_reference_scenario_matches_generator():
    """The shipped file is exactly what the builder produces (drift guard)."""
    with open(SCENARIO_DIR / "reference.json") as fh:
        shipped = json.load(fh)
    assert shipped == reference_scenario_dict()


def test_reference_gains_match_the_documented_constants():
    sc = parse_scenario(SCENARIO_DIR / "reference.json")
    assert np.all(sc.flow_gains.M_ch == 1e5) and np.all(sc.flow_gains.N_ch == 1e5)
    assert np.all(sc.volume_gains.N_pr == 7.11e4)
    assert np.all(sc.volume_gains.N_sh == 7.5e-3)
    assert np.all(sc.volume_gains.M_a == 14.06e-5)
    assert np.all(sc.volume_gains.M_b == 7.11e7)
    assert sc.saturation.lower == 0.03 and sc.saturation.upper == 1.15
    assert np.all(sc.capacity == 1000.0)
    assert classify_edges(sc.graph).n_ch == 17


def test_negative_gain_rejected_with_field_path():
    d = fig3_scenario_dict()
    d["gains"]["N_pr"] = -1.0
    with pytest.raises(ScenarioError, match="gains.N_pr"):
        scenario_from_dict(d)


def test_theta_and_geometry_both_rejected():
    d = fig3_scenario_dict()
    d["network"]["edges"][0]["geometry"] = {"length": 10.0, "diameter": 0.1}
    with pytest.raises(ScenarioError, match="edges\\[0\\].*theta or geometry"):
        scenario_from_dict(d)


def test_missing_capacity_field_path():
    d = fig3_scenario_dict()
    del d["tanks"]["capacity"]
    with pytest.raises(ScenarioError, match="tanks.capacity"):
        scenario_from_dict(d)


def test_wrong_setpoint_length_rejected():
    d = fig3_scenario_dict()
    d["schedule"][0]["q_ch_star"] = [0.01, 0.02, 0.03]
    with pytest.raises(ScenarioError, match="schedule\\[0\\].q_ch_star"):
        scenario_from_dict(d)


def test_event_time_requires_single_unit():
    d = fig3_scenario_dict()
    d["schedule"][1]["t_s"] = 3600.0
    with pytest.raises(ScenarioError, match="t_s or t_h"):
        scenario_from_dict(d)


def test_volume_capacity_mismatch_fails_validation():
    d = fig3_scenario_dict()
    d["tanks"]["initial_hot_volume"] = [40.0, 140.0]
    with pytest.raises(ScenarioError, match="topology validation failed"):
        scenario_from_dict(d)


def test_geometry_derived_theta_matches_colebrook():
    d = fig3_scenario_dict()
    geom = {"length": 200.0, "diameter": 0.25, "roughness": 2e-4}
    edge = d["network"]["edges"][0]
    del edge["theta"]
    edge["geometry"] = geom
    edge["nominal_flow"] = 0.05
    sc = scenario_from_dict(d)
    fluid = FluidProps(density=983.0, viscosity=4.67e-4, nominal_flow=0.02)
    pg = PipeGeometry(**geom)
    k = colebrook_friction(geom["roughness"] / geom["diameter"], reynolds(0.05, pg, fluid))
    assert sc.theta_by_edge[1] == pytest.approx(theta_from_geometry(k, pg, fluid), rel=1e-12)


def test_synthetic_generation_is_deterministic():
    a = synthesize_network(seed=7, n_producers=2, n_consumers=5, loops_per_layer=1)
    b = synthesize_network(seed=7, n_producers=2, n_consumers=5, loops_per_layer=1)
    assert a.graph.edges == b.graph.edges
    assert a.theta_by_edge == b.theta_by_edge
    assert np.array_equal(a.tank_shares, b.tank_shares)
    c = synthesize_network(seed=8, n_producers=2, n_consumers=5, loops_per_layer=1)
    assert a.theta_by_edge != c.theta_by_edge


def test_synthetic_setpoints_keep_all_producers_running():
    for seed in range(6):
        net = synthesize_network(seed=seed, n_producers=3, n_consumers=6, loops_per_layer=2)
        from dhflow.reduced import build_reduced_model

        model = build_reduced_model(net.graph, net.theta_by_edge)
        for frac in (0.25, 0.95):
            q_pr = model.B.astype(float) @ net.setpoint_vector(frac)
            assert (q_pr > 0.0).all()


def test_unknown_network_kind_rejected():
    d = fig3_scenario_dict()
    d["network"]["nodes"][0]["kind"] = "reservoir"
    with pytest.raises(ScenarioError, match="nodes\\[0\\].kind"):
        scenario_from_dict(d)
