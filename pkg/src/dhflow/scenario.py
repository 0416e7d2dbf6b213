"""Scenario files: parsing, validation and synthetic network generation.

A scenario is a JSON document holding the network (explicit nodes/edges or a
seeded synthetic specification), fluid properties, tank data, controller
gains, actuator saturation, the setpoint schedule and integrator settings.
Validation is total: every failure names the offending field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np

from .analysis import compute_equilibrium
from .control import FlowPIGains, Saturation, VolumeGains
from .errors import ScenarioError, TopologyError
from .graph import (
    JUNCTION,
    PIPE,
    PUMP,
    TANK_COLD,
    TANK_HOT,
    VALVE,
    Edge,
    NetworkGraph,
    Node,
    classify_edges,
    validate_topology,
)
from .hydraulics import (
    FluidProps,
    PipeGeometry,
    colebrook_friction,
    reynolds,
    signed_square,
    theta_from_geometry,
)
from .reduced import ReducedModel, build_reduced_model
from .sim import IntegratorConfig, Schedule, ScheduleEvent

__all__ = [
    "Scenario",
    "parse_scenario",
    "scenario_from_dict",
    "synthesize_network",
    "SyntheticNetwork",
    "build_fig3_network",
    "fig3_scenario_dict",
    "build_radial_network",
    "reference_scenario_dict",
]


# ---------------------------------------------------------------------------
# Scenario container
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Scenario:
    """A validated simulation scenario."""

    name: str
    graph: NetworkGraph
    theta_by_edge: Mapping[int, float]
    fluid: FluidProps
    capacity: np.ndarray
    v_sh0: np.ndarray
    flow_gains: FlowPIGains
    volume_gains: VolumeGains
    saturation: Optional[Saturation]
    schedule: Schedule
    integrator: IntegratorConfig
    pin_chords: bool = False
    initial: Mapping[str, Any] = field(default_factory=dict)

    def build_model(self) -> ReducedModel:
        return build_reduced_model(self.graph, self.theta_by_edge, capacity=self.capacity)

    def initial_state(self, model: ReducedModel, loop) -> np.ndarray:
        """Resolve the initial monolithic state vector.

        Plant flows default to the t=0 setpoint equilibrium flows, controller
        states to zero (cold start). ``initial.at_equilibrium`` places the
        whole closed loop at the exact equilibrium of the first event.
        """
        sp = self.schedule.initial
        b = model.B.astype(float)
        if self.initial.get("at_equilibrium"):
            eq = compute_equilibrium(model, sp.q_ch_star, sp.v_sh_star)
            return loop.pack(
                eq.q_ch, eq.q_pr, eq.V_sh, model.capacity - eq.V_sh, eq.x_ch, eq.x_a, eq.x_b
            )

        def pick(key, default):
            v = self.initial.get(key)
            return np.asarray(v, float) if v is not None else default

        q_ch = pick("q_ch", sp.q_ch_star.copy())
        q_pr = pick("q_pr", b @ sp.q_ch_star)
        v_sh = pick("V_sh", self.v_sh0.copy())
        x_ch = pick("x_ch", np.zeros(model.n_ch))
        # Each producer starts its flow reference at the tank-outlet flow it
        # measures locally; a zero start throws the high-gain adaptation far
        # from equilibrium.
        x_a = pick("x_a", b @ q_ch)
        x_b = pick("x_b", np.zeros(model.n_pr))
        return loop.pack(q_ch, q_pr, v_sh, model.capacity - v_sh, x_ch, x_a, x_b)


# ---------------------------------------------------------------------------
# JSON parsing with field-path diagnostics
# ---------------------------------------------------------------------------


def _req(d: Mapping, key: str, path: str):
    if key not in d:
        raise ScenarioError(f"{path}.{key}: required field is missing")
    return d[key]


def _num(value, path: str, positive=False, nonnegative=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if positive and v <= 0.0:
        raise ScenarioError(f"{path}: must be > 0, got {v}")
    if nonnegative and v < 0.0:
        raise ScenarioError(f"{path}: must be >= 0, got {v}")
    return v


def _int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ScenarioError(f"{path}: expected an integer, got {value!r}")
    return value


def _vector(value, n: int, path: str, positive=False) -> np.ndarray:
    """Scalar broadcast or exact-length list."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        arr = np.full(n, float(value))
    elif isinstance(value, list):
        if len(value) != n:
            raise ScenarioError(f"{path}: expected {n} entries, got {len(value)}")
        arr = np.array([_num(v, f"{path}[{i}]") for i, v in enumerate(value)])
    else:
        raise ScenarioError(f"{path}: expected a number or a list, got {value!r}")
    if positive and np.any(arr <= 0.0):
        raise ScenarioError(f"{path}: entries must be > 0, got {arr.tolist()}")
    return arr


def _parse_geometry(d: Mapping, path: str) -> PipeGeometry:
    return PipeGeometry(
        length=_num(_req(d, "length", path), f"{path}.length", positive=True),
        diameter=_num(_req(d, "diameter", path), f"{path}.diameter", positive=True),
        roughness=_num(d.get("roughness", 0.0), f"{path}.roughness", nonnegative=True),
    )


def _parse_explicit_network(net: Mapping, path: str):
    nodes = []
    for i, nd in enumerate(_req(net, "nodes", path)):
        p = f"{path}.nodes[{i}]"
        kind = _req(nd, "kind", p)
        if kind not in (JUNCTION, TANK_HOT, TANK_COLD):
            raise ScenarioError(f"{p}.kind: unknown node kind {kind!r}")
        try:
            nodes.append(
                Node(
                    id=_int(_req(nd, "id", p), f"{p}.id"),
                    kind=kind,
                    tank_id=nd.get("tank_id"),
                    layer=nd.get("layer"),
                )
            )
        except TopologyError as exc:
            raise ScenarioError(f"{p}: {exc}") from exc

    edges = []
    geometry_info = {}
    explicit_theta = {}
    for i, ed in enumerate(_req(net, "edges", path)):
        p = f"{path}.edges[{i}]"
        kind = _req(ed, "kind", p)
        if kind not in (PIPE, VALVE, PUMP):
            raise ScenarioError(f"{p}.kind: unknown edge kind {kind!r}")
        eid = _int(_req(ed, "id", p), f"{p}.id")
        has_theta = "theta" in ed
        has_geom = "geometry" in ed
        if has_theta and has_geom:
            raise ScenarioError(f"{p}: give either theta or geometry, not both")
        if kind == PUMP and (has_theta and ed["theta"] != 0.0 or has_geom):
            raise ScenarioError(f"{p}: pumps have no friction data")
        if kind == VALVE and has_geom:
            raise ScenarioError(f"{p}.geometry: valve coefficients must be explicit theta")
        if kind != PUMP and not (has_theta or has_geom):
            raise ScenarioError(f"{p}: {kind} needs theta or geometry")
        geom = _parse_geometry(ed["geometry"], f"{p}.geometry") if has_geom else None
        if has_theta:
            explicit_theta[eid] = _num(ed["theta"], f"{p}.theta", nonnegative=True)
        if has_geom:
            geometry_info[eid] = (geom, ed.get("nominal_flow"))
        try:
            edges.append(
                Edge(
                    id=eid,
                    kind=kind,
                    tail=_int(_req(ed, "tail", p), f"{p}.tail"),
                    head=_int(_req(ed, "head", p), f"{p}.head"),
                    inertia=_num(ed.get("inertia", 0.0), f"{p}.inertia", nonnegative=True),
                    geometry=geom,
                )
            )
        except TopologyError as exc:
            raise ScenarioError(f"{p}: {exc}") from exc

    producer_paths = {}
    for key, val in _req(net, "producer_paths", path).items():
        try:
            tid = int(key)
        except ValueError:
            raise ScenarioError(f"{path}.producer_paths: tank id {key!r} is not an integer")
        producer_paths[tid] = tuple(
            _int(e, f"{path}.producer_paths[{key}][{j}]") for j, e in enumerate(val)
        )
    tank_outlets = {}
    for key, val in _req(net, "tank_outlet_edges", path).items():
        try:
            tid = int(key)
        except ValueError:
            raise ScenarioError(f"{path}.tank_outlet_edges: tank id {key!r} is not an integer")
        tank_outlets[tid] = _int(val, f"{path}.tank_outlet_edges[{key}]")

    consumer_edges = tuple(
        _int(e, f"{path}.consumer_edges[{j}]")
        for j, e in enumerate(_req(net, "consumer_edges", path))
    )
    try:
        graph = NetworkGraph(
            nodes=tuple(nodes),
            edges=tuple(edges),
            consumer_edges=consumer_edges,
            producer_paths=producer_paths,
            tank_outlet_edges=tank_outlets,
        )
    except TopologyError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc
    return graph, explicit_theta, geometry_info


def _resolve_theta(graph, explicit, geometry_info, fluid: FluidProps, path: str):
    """Per-edge theta: explicit value, or Colebrook from geometry, or 0 for pumps."""
    theta = {}
    for e in graph.edges:
        if e.id in explicit:
            theta[e.id] = explicit[e.id]
        elif e.id in geometry_info:
            geom, q_nom = geometry_info[e.id]
            q = fluid.nominal_flow if q_nom is None else _num(
                q_nom, f"{path}: edge {e.id} nominal_flow", positive=True
            )
            re = reynolds(q, geom, fluid)
            k = colebrook_friction(geom.roughness / geom.diameter, re)
            theta[e.id] = theta_from_geometry(k, geom, fluid)
        else:
            theta[e.id] = 0.0
    return theta


def scenario_from_dict(data: Mapping, name: str = "scenario") -> Scenario:
    """Build and fully validate a scenario from a JSON-shaped mapping."""
    if not isinstance(data, Mapping):
        raise ScenarioError("scenario: top level must be an object")
    name = data.get("name", name)

    fl = data.get("fluid", {})
    fluid = FluidProps(
        density=_num(fl.get("density", 983.0), "fluid.density", positive=True),
        viscosity=_num(fl.get("viscosity", 4.67e-4), "fluid.viscosity", positive=True),
        nominal_flow=_num(fl.get("nominal_flow", 0.1), "fluid.nominal_flow", positive=True),
    )

    net = _req(data, "network", "scenario")
    if "synthetic" in net:
        syn = net["synthetic"]
        p = "network.synthetic"
        built = synthesize_network(
            seed=_int(_req(syn, "seed", p), f"{p}.seed"),
            n_producers=_int(_req(syn, "n_producers", p), f"{p}.n_producers"),
            n_consumers=_int(_req(syn, "n_consumers", p), f"{p}.n_consumers"),
            loops_per_layer=_int(syn.get("loops_per_layer", 0), f"{p}.loops_per_layer"),
            sites=syn.get("sites"),
        )
        graph, theta = built.graph, dict(built.theta_by_edge)
    else:
        graph, explicit, geometry_info = _parse_explicit_network(net, "network")
        theta = _resolve_theta(graph, explicit, geometry_info, fluid, "network")

    cls = classify_edges(graph)
    n_ch, n_pr = cls.n_ch, cls.n_pr
    n_st = len(graph.tank_ids)

    tanks = _req(data, "tanks", "scenario")
    capacity = _vector(_req(tanks, "capacity", "tanks"), n_st, "tanks.capacity", positive=True)
    v_sh0 = _vector(_req(tanks, "initial_hot_volume", "tanks"), n_st, "tanks.initial_hot_volume")

    g = _req(data, "gains", "scenario")
    try:
        flow_gains = FlowPIGains(
            M_ch=_vector(_req(g, "M_ch", "gains"), n_ch, "gains.M_ch", positive=True),
            N_ch=_vector(_req(g, "N_ch", "gains"), n_ch, "gains.N_ch", positive=True),
        )
        volume_gains = VolumeGains(
            N_pr=_vector(_req(g, "N_pr", "gains"), n_pr, "gains.N_pr", positive=True),
            N_sh=_vector(_req(g, "N_sh", "gains"), n_pr, "gains.N_sh", positive=True),
            M_a=_vector(_req(g, "M_a", "gains"), n_pr, "gains.M_a", positive=True),
            M_b=_vector(_req(g, "M_b", "gains"), n_pr, "gains.M_b", positive=True),
        )
    except ValueError as exc:
        raise ScenarioError(f"gains: {exc}") from exc

    sat_spec = data.get("saturation")
    saturation = None
    if sat_spec is not None:
        try:
            saturation = Saturation(
                u_nominal=_vector(
                    _req(sat_spec, "u_nominal", "saturation"), n_pr,
                    "saturation.u_nominal", positive=True,
                ),
                lower=_num(sat_spec.get("lower", 0.03), "saturation.lower", positive=True),
                upper=_num(sat_spec.get("upper", 1.15), "saturation.upper", positive=True),
            )
        except ValueError as exc:
            raise ScenarioError(f"saturation: {exc}") from exc

    events = []
    for i, ev in enumerate(_req(data, "schedule", "scenario")):
        p = f"schedule[{i}]"
        if "t_s" in ev and "t_h" in ev:
            raise ScenarioError(f"{p}: give t_s or t_h, not both")
        if "t_s" in ev:
            t = _num(ev["t_s"], f"{p}.t_s", nonnegative=True)
        elif "t_h" in ev:
            t = 3600.0 * _num(ev["t_h"], f"{p}.t_h", nonnegative=True)
        else:
            raise ScenarioError(f"{p}: event time t_s or t_h is required")
        q = ev.get("q_ch_star")
        v = ev.get("V_sh_star")
        events.append(
            ScheduleEvent(
                t=t,
                q_ch_star=None if q is None else _vector(q, n_ch, f"{p}.q_ch_star"),
                v_sh_star=None if v is None else _vector(v, n_st, f"{p}.V_sh_star"),
            )
        )
    schedule = Schedule(events=tuple(events))

    integ = data.get("integrator", {})
    if "t_end_s" in integ and "t_end_h" in integ:
        raise ScenarioError("integrator: give t_end_s or t_end_h, not both")
    t_end = (
        _num(integ["t_end_s"], "integrator.t_end_s", positive=True)
        if "t_end_s" in integ
        else 3600.0 * _num(integ.get("t_end_h", 24.0), "integrator.t_end_h", positive=True)
    )
    integrator = IntegratorConfig(
        dt=_num(integ.get("dt", 0.5), "integrator.dt", positive=True),
        t_end=t_end,
        decimation=_int(integ.get("decimation", 120), "integrator.decimation"),
    )

    initial = data.get("initial", {})
    if not isinstance(initial, Mapping):
        raise ScenarioError("initial: expected an object")
    resolved_initial = {}
    for key, n in (("q_ch", n_ch), ("q_pr", n_pr), ("V_sh", n_st),
                   ("x_ch", n_ch), ("x_a", n_pr), ("x_b", n_pr)):
        if key in initial:
            resolved_initial[key] = _vector(initial[key], n, f"initial.{key}")
    if "at_equilibrium" in initial:
        if not isinstance(initial["at_equilibrium"], bool):
            raise ScenarioError("initial.at_equilibrium: expected a boolean")
        resolved_initial["at_equilibrium"] = initial["at_equilibrium"]

    pin = data.get("pin_chords", False)
    if not isinstance(pin, bool):
        raise ScenarioError("pin_chords: expected a boolean")

    report = validate_topology(graph, tank_capacity=capacity, v_sh0=v_sh0)
    if not report.passed:
        raise ScenarioError(
            "network: topology validation failed: " + "; ".join(report.violations)
        )

    return Scenario(
        name=name,
        graph=graph,
        theta_by_edge=theta,
        fluid=fluid,
        capacity=capacity,
        v_sh0=v_sh0,
        flow_gains=flow_gains,
        volume_gains=volume_gains,
        saturation=saturation,
        schedule=schedule,
        integrator=integrator,
        pin_chords=pin,
        initial=resolved_initial,
    )


def parse_scenario(path) -> Scenario:
    """Load and validate a scenario JSON file."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc
    import os

    default_name = os.path.splitext(os.path.basename(str(path)))[0]
    return scenario_from_dict(data, name=default_name)


# ---------------------------------------------------------------------------
# Synthetic networks
# ---------------------------------------------------------------------------

THETA_RANGE = (1e3, 1e5)  # Pa s^2/m^6, log-uniform
INERTIA_RANGE = (1e4, 1e6)  # Pa s^2/m^3, log-uniform
BASE_CONSUMER_FLOW = 0.12  # m^3/s at full demand


@dataclass(frozen=True)
class SyntheticNetwork:
    """A generated network plus the dispatch data its setpoints derive from."""

    graph: NetworkGraph
    theta_by_edge: Mapping[int, float]
    consumer_max_flow: Mapping[int, float]  # consumer rep edge -> full-demand flow
    loop_base_flow: Mapping[int, float]  # loop pipe edge -> full-demand circulation
    tank_shares: np.ndarray  # dispatch fraction of total demand per tank

    def setpoint_vector(self, demand_fraction: float) -> np.ndarray:
        """Chord setpoints at a consumer demand fraction (dispatch shares fixed)."""
        cls = classify_edges(self.graph)
        total = demand_fraction * sum(self.consumer_max_flow.values())
        q = np.empty(cls.n_ch)
        n_c, a = cls.n_consumers, cls.n_loops
        for i, eid in enumerate(cls.chord_edges[:n_c]):
            q[i] = demand_fraction * self.consumer_max_flow[eid]
        for i, eid in enumerate(cls.chord_edges[n_c : n_c + a]):
            q[n_c + i] = demand_fraction * self.loop_base_flow[eid]
        for i in range(len(self.tank_shares) - 1):
            q[n_c + a + i] = self.tank_shares[i] * total
        return q

    def nominal_u_pr(self, max_fraction: float = 1.0) -> np.ndarray:
        """Equilibrium producer pump pressures at maximum consumer demand."""
        model = build_reduced_model(self.graph, self.theta_by_edge)
        q_star = self.setpoint_vector(max_fraction)
        q_pr = model.B.astype(float) @ q_star
        return model.theta_producer * signed_square(q_pr)


class _Builder:
    def __init__(self):
        self.nodes: list[Node] = []
        self.edges: list[Edge] = []
        self._nid = 0
        self._eid = 0

    def node(self, kind: str, tank_id=None, layer=None) -> int:
        self._nid += 1
        self.nodes.append(Node(id=self._nid, kind=kind, tank_id=tank_id, layer=layer))
        return self._nid

    def edge(self, kind: str, tail: int, head: int, inertia=0.0) -> int:
        self._eid += 1
        self.edges.append(Edge(id=self._eid, kind=kind, tail=tail, head=head, inertia=inertia))
        return self._eid


def synthesize_network(
    seed: int,
    n_producers: int,
    n_consumers: int,
    loops_per_layer: int = 0,
    sites: Optional[int] = None,
) -> SyntheticNetwork:
    """Seeded random DH network with the standard producer/consumer/tank plumbing.

    The distribution layers are mirrored random trees over junction sites with
    ``loops_per_layer`` extra pumped pipes per layer closing loops. Each
    consumer is a pump/pipe/valve chain across the layers; each tank hangs off
    a site with a pumped outlet path (the last tank's outlet is unpumped: its
    flow is dependent) and a cold-inlet valve; each producer is a
    pump/pipe/valve chain from its tank's cold to hot layer. Loss coefficients
    are log-uniform in [1e3, 1e5], pipe inertias in [1e4, 1e6]; this stands in
    for real installation data and is not calibrated to any actual
    installation.
    """
    if n_producers < 1:
        raise ScenarioError("network.synthetic.n_producers: must be >= 1")
    if n_consumers < 1:
        raise ScenarioError("network.synthetic.n_consumers: must be >= 1")
    if loops_per_layer < 0:
        raise ScenarioError("network.synthetic.loops_per_layer: must be >= 0")
    m = sites if sites is not None else max(4, n_producers + 1, math.ceil(n_consumers / 2))
    if loops_per_layer > 0 and m < 2:
        raise ScenarioError("network.synthetic.sites: loops need at least 2 sites")

    rng = np.random.default_rng(seed)
    b = _Builder()
    theta: dict[int, float] = {}

    def draw_theta() -> float:
        lo, hi = THETA_RANGE
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

    def draw_inertia() -> float:
        lo, hi = INERTIA_RANGE
        return float(np.exp(rng.uniform(np.log(lo), np.log(hi))))

    def pipe(tail, head) -> int:
        eid = b.edge(PIPE, tail, head, inertia=draw_inertia())
        theta[eid] = draw_theta()
        return eid

    def valve(tail, head) -> int:
        eid = b.edge(VALVE, tail, head)
        theta[eid] = draw_theta()
        return eid

    def pump(tail, head) -> int:
        eid = b.edge(PUMP, tail, head)
        theta[eid] = 0.0
        return eid

    supply = [b.node(JUNCTION, layer="supply") for _ in range(m)]
    ret = [b.node(JUNCTION, layer="return") for _ in range(m)]

    # Mirrored random spanning trees over the sites.
    parents = [int(rng.integers(0, k)) for k in range(1, m)]
    for k, p in enumerate(parents, start=1):
        pipe(supply[p], supply[k])
    for k, p in enumerate(parents, start=1):
        pipe(ret[p], ret[k])

    # Extra pumped pipes closing one loop each, mirrored across layers.
    loop_pairs = []
    for _ in range(loops_per_layer):
        u = int(rng.integers(0, m))
        v = int(rng.integers(0, m - 1))
        v = v + 1 if v >= u else v
        loop_pairs.append((u, v))
    for u, v in loop_pairs:
        w = b.node(JUNCTION, layer="supply")
        pump(supply[u], w)
        pipe(w, supply[v])
    for u, v in loop_pairs:
        w = b.node(JUNCTION, layer="return")
        pump(ret[u], w)
        pipe(w, ret[v])

    consumer_sites = [int(rng.integers(0, m)) for _ in range(n_consumers)]
    consumer_edges = []
    consumer_max = {}
    for s in consumer_sites:
        a = b.node(JUNCTION)
        c = b.node(JUNCTION)
        pump(supply[s], a)
        rep = pipe(a, c)
        valve(c, ret[s])
        consumer_edges.append(rep)
        consumer_max[rep] = float(BASE_CONSUMER_FLOW * rng.uniform(0.8, 1.2))

    tank_sites = [int(rng.integers(0, m)) for _ in range(n_producers)]
    tank_outlets = {}
    producer_paths = {}
    hot, cold = {}, {}
    for i, s in enumerate(tank_sites):
        tid = i + 1
        hot[tid] = b.node(TANK_HOT, tank_id=tid)
        cold[tid] = b.node(TANK_COLD, tank_id=tid)
        if tid < n_producers:  # pumped outlet: this tank's outlet flow is a chord
            c1 = b.node(JUNCTION)
            c2 = b.node(JUNCTION)
            valve(hot[tid], c1)
            pump(c1, c2)
            tank_outlets[tid] = pipe(c2, supply[s])
        else:  # the excluded outlet: dependent flow, no pump
            c1 = b.node(JUNCTION)
            valve(hot[tid], c1)
            tank_outlets[tid] = pipe(c1, supply[s])
        valve(ret[s], cold[tid])

    for tid in range(1, n_producers + 1):
        e1 = b.node(JUNCTION)
        e2 = b.node(JUNCTION)
        p_pump = pump(cold[tid], e1)
        p_pipe = pipe(e1, e2)
        p_valve = valve(e2, hot[tid])
        producer_paths[tid] = (p_pump, p_pipe, p_valve)

    graph = NetworkGraph(
        nodes=tuple(b.nodes),
        edges=tuple(b.edges),
        consumer_edges=tuple(consumer_edges),
        producer_paths=producer_paths,
        tank_outlet_edges=tank_outlets,
    )

    cls = classify_edges(graph)
    loop_base = {
        eid: float(0.3 * BASE_CONSUMER_FLOW * rng.uniform(0.5, 1.0))
        for eid in cls.loop_pipe_edges
    }
    shares = rng.uniform(0.7, 1.0, n_producers)
    shares = shares / shares.sum()

    return SyntheticNetwork(
        graph=graph,
        theta_by_edge=theta,
        consumer_max_flow=consumer_max,
        loop_base_flow=loop_base,
        tank_shares=shares,
    )


# ---------------------------------------------------------------------------
# Preset networks and scenarios
# ---------------------------------------------------------------------------


def build_fig3_network(
    j_consumer: float = 1e5,
    j_tank1: float = 1e5,
    j_tank2: float = 1e5,
    j_hx: float = 1e5,
    theta_pipe: float = 2.0e4,
    theta_valve: float = 5.0e3,
):
    """The two-producer, one-consumer network with explicit device chains.

    Edge ids 1..4 are the chord/producer representative pipes (consumer,
    tank-1 outlet, producer 1, producer 2); ids 5..7 are the tank valves whose
    flows reproduce the classic dependent-flow relations; the rest are the
    series pumps and valves. Returns (graph, theta_by_edge).
    """
    nodes = [
        Node(1, JUNCTION, layer="supply"),   # S
        Node(2, JUNCTION, layer="return"),   # R
        Node(3, TANK_HOT, tank_id=1),
        Node(4, TANK_COLD, tank_id=1),
        Node(5, TANK_HOT, tank_id=2),
        Node(6, TANK_COLD, tank_id=2),
        Node(7, JUNCTION),   # consumer internals
        Node(8, JUNCTION),
        Node(9, JUNCTION),   # producer 1 internals
        Node(10, JUNCTION),
        Node(11, JUNCTION),  # producer 2 internals
        Node(12, JUNCTION),
        Node(13, JUNCTION),  # tank 1 outlet internals
        Node(14, JUNCTION),
        Node(15, JUNCTION),  # tank 2 outlet internal
    ]
    edges = [
        Edge(1, PIPE, 7, 8, inertia=j_consumer),    # consumer heat exchanger
        Edge(2, PIPE, 14, 1, inertia=j_tank1),      # tank 1 hot outlet pipe
        Edge(3, PIPE, 9, 10, inertia=j_hx),         # producer 1 heat exchanger
        Edge(4, PIPE, 11, 12, inertia=j_hx),        # producer 2 heat exchanger
        Edge(5, VALVE, 2, 4),                       # tank 1 cold inlet
        Edge(6, VALVE, 1, 15),                      # tank 2 hot valve (into the tank)
        Edge(7, VALVE, 6, 2),                       # tank 2 cold valve (out of the tank)
        Edge(8, PUMP, 1, 7),                        # consumer pump
        Edge(9, VALVE, 8, 2),                       # consumer valve
        Edge(10, VALVE, 3, 13),                     # tank 1 outlet valve
        Edge(11, PUMP, 13, 14),                     # tank 1 outlet pump
        Edge(12, PUMP, 4, 9),                       # producer 1 pump
        Edge(13, VALVE, 10, 3),                     # producer 1 valve
        Edge(14, PUMP, 6, 11),                      # producer 2 pump
        Edge(15, VALVE, 12, 5),                     # producer 2 valve
        Edge(16, PIPE, 15, 5, inertia=j_tank2),     # tank 2 hot outlet pipe
    ]
    theta = {
        1: theta_pipe, 2: theta_pipe, 3: theta_pipe, 4: theta_pipe,
        5: theta_valve, 6: theta_valve, 7: theta_valve,
        8: 0.0, 9: theta_valve, 10: theta_valve, 11: 0.0,
        12: 0.0, 13: theta_valve, 14: 0.0, 15: theta_valve,
        16: theta_pipe,
    }
    graph = NetworkGraph(
        nodes=tuple(nodes),
        edges=tuple(edges),
        consumer_edges=(1,),
        producer_paths={1: (12, 3, 13), 2: (14, 4, 15)},
        tank_outlet_edges={1: 2, 2: 16},
    )
    return graph, theta


def build_radial_network():
    """Single producer, single tank, single consumer; the only chord is the consumer."""
    nodes = [
        Node(1, JUNCTION, layer="supply"),
        Node(2, JUNCTION, layer="return"),
        Node(3, TANK_HOT, tank_id=1),
        Node(4, TANK_COLD, tank_id=1),
        Node(5, JUNCTION),
        Node(6, JUNCTION),
        Node(7, JUNCTION),
        Node(8, JUNCTION),
        Node(9, JUNCTION),
    ]
    edges = [
        Edge(1, PIPE, 5, 6, inertia=2e5),   # consumer heat exchanger (the chord)
        Edge(2, PIPE, 7, 1, inertia=1e5),   # tank outlet pipe (dependent: only tank)
        Edge(3, PIPE, 8, 9, inertia=3e5),   # producer heat exchanger
        Edge(4, PUMP, 1, 5),
        Edge(5, VALVE, 6, 2),
        Edge(6, VALVE, 3, 7),
        Edge(7, VALVE, 2, 4),               # cold inlet
        Edge(8, PUMP, 4, 8),
        Edge(9, VALVE, 9, 3),
    ]
    theta = {1: 1.5e4, 2: 8e3, 3: 2.5e4, 4: 0.0, 5: 4e3, 6: 3e3, 7: 3.5e3, 8: 0.0, 9: 4.5e3}
    graph = NetworkGraph(
        nodes=tuple(nodes),
        edges=tuple(edges),
        consumer_edges=(1,),
        producer_paths={1: (8, 3, 9)},
        tank_outlet_edges={1: 2},
    )
    return graph, theta


REFERENCE_GAINS = {
    "M_ch": 1.0e5,
    "N_ch": 1.0e5,
    "N_pr": 7.11e4,
    "N_sh": 7.5e-3,
    "M_a": 14.06e-5,
    "M_b": 7.11e7,
}


def fig3_scenario_dict() -> dict:
    """Small explicit scenario on the two-producer network; parses and validates."""
    graph, theta = build_fig3_network()
    nodes = [
        {
            "id": n.id,
            "kind": n.kind,
            **({"tank_id": n.tank_id} if n.tank_id is not None else {}),
            **({"layer": n.layer} if n.layer is not None else {}),
        }
        for n in graph.nodes
    ]
    edges = []
    for e in graph.edges:
        d = {"id": e.id, "kind": e.kind, "tail": e.tail, "head": e.head}
        if e.kind == PIPE:
            d["inertia"] = e.inertia
        if e.kind != PUMP:
            d["theta"] = theta[e.id]
        edges.append(d)
    # q* = (consumer, tank-1 outlet): tank 2 covers the consumer's remainder.
    q_low = [0.02, 0.008]
    q_high = [0.036, 0.015]
    return {
        "name": "fig3",
        "network": {
            "nodes": nodes,
            "edges": edges,
            "consumer_edges": [1],
            "producer_paths": {"1": [12, 3, 13], "2": [14, 4, 15]},
            "tank_outlet_edges": {"1": 2, "2": 16},
        },
        "fluid": {"density": 983.0, "viscosity": 4.67e-4, "nominal_flow": 0.02},
        "tanks": {"capacity": 100.0, "initial_hot_volume": 40.0},
        "gains": dict(REFERENCE_GAINS),
        "saturation": None,
        "schedule": [
            {"t_h": 0.0, "q_ch_star": q_low, "V_sh_star": [40.0, 40.0]},
            {"t_h": 1.0, "V_sh_star": [48.0, 45.0]},
            {"t_h": 2.0, "q_ch_star": q_high},
        ],
        "integrator": {"dt": 0.25, "t_end_h": 3.0, "decimation": 240},
    }


REFERENCE_SEED = 0  # chosen so the drawn inertias suit dt = 0.25 (producer pipes land high)


def reference_scenario_dict(
    seed: int = REFERENCE_SEED,
    clipped: bool = True,
    pin_chords: bool = False,
) -> dict:
    """The 24 h reference study: 3 producers, 9 consumers, 6 loops, n_ch = 17.

    Low demand (25%) at t=0; the tanks charge over a staircase volume-setpoint
    schedule from 6 h to about 9 h; demand rises to 95% across three closely
    spaced steps from 12 h; the tanks discharge back from 18 h to about 21 h;
    24 h horizon, 1000 m^3 tanks. Setpoint maneuvers are staged in small
    increments because the producer pumps clip: one large jump parks them at
    a clipping bound and winds up the controller integrators, which have no
    anti-windup.
    """
    n_pr, n_c, lpl, sites = 3, 9, 3, 6
    net = synthesize_network(
        seed=seed, n_producers=n_pr, n_consumers=n_c, loops_per_layer=lpl, sites=sites
    )
    q_low = net.setpoint_vector(0.25).tolist()
    u_nom = net.nominal_u_pr(1.0).tolist()
    v_base, v_step, n_ramp = 350.0, 8.0, 30  # 350 -> 590 m^3 across the staircase
    schedule = [{"t_h": 0.0, "q_ch_star": q_low, "V_sh_star": [v_base] * n_pr}]
    for k in range(1, n_ramp + 1):  # charging staircase, 6 h .. ~9 h
        schedule.append(
            {"t_h": 6.0 + 0.1 * (k - 1), "V_sh_star": [v_base + v_step * k] * n_pr}
        )
    for j, frac in enumerate((0.4833, 0.7167, 0.95)):  # demand rise at ~12 h
        schedule.append(
            {"t_h": 12.0 + j / 3.0, "q_ch_star": net.setpoint_vector(frac).tolist()}
        )
    v_top = v_base + v_step * n_ramp
    for k in range(1, 25):  # discharging staircase, 18 h .. ~21 h
        schedule.append(
            {
                "t_h": 18.0 + (8.0 / 60.0) * (k - 1),
                "V_sh_star": [v_top - 10.0 * k] * n_pr,
            }
        )
    return {
        "name": "reference",
        "network": {
            "synthetic": {
                "seed": seed,
                "n_producers": n_pr,
                "n_consumers": n_c,
                "loops_per_layer": lpl,
                "sites": sites,
            }
        },
        "fluid": {"density": 983.0, "viscosity": 4.67e-4, "nominal_flow": 0.1},
        "tanks": {"capacity": 1000.0, "initial_hot_volume": [v_base] * n_pr},
        "gains": dict(REFERENCE_GAINS),
        "saturation": (
            {"lower": 0.03, "upper": 1.15, "u_nominal": u_nom} if clipped else None
        ),
        "schedule": schedule,
        "integrator": {"dt": 0.25, "t_end_h": 24.0, "decimation": 240},
        "pin_chords": pin_chords,
    }
