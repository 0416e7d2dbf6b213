"""Directed-graph model of the district heating network.

Nodes are junctions plus the hot and cold layers of each storage tank; edges
are pipes, valves and pumps with a fixed (arbitrary) orientation. This module
builds the node-edge incidence matrix, classifies edges into independent
chord/producer flows, constructs the fundamental loop matrix F with block
structure [I 0 G 0; 0 I 0 H], and extracts the tank-outlet sub-block B that
maps chord flows to each tank's hot-layer outlet flow.

Flow dependencies are cycles of the "merged" graph in which the two layers of
each tank collapse to one node: junction mass balance plus the constant-tank-
volume constraint make every feasible edge-flow vector a circulation there.
F and B are built in exact integer arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .errors import TopologyError
from .hydraulics import PipeGeometry

__all__ = [
    "Node",
    "Edge",
    "NetworkGraph",
    "EdgeClassification",
    "LoopMatrix",
    "ValidationReport",
    "build_incidence",
    "classify_edges",
    "fundamental_loop_matrix",
    "extract_B",
    "validate_topology",
]

JUNCTION = "junction"
TANK_HOT = "tank_hot"
TANK_COLD = "tank_cold"
NODE_KINDS = (JUNCTION, TANK_HOT, TANK_COLD)

PIPE = "pipe"
VALVE = "valve"
PUMP = "pump"
EDGE_KINDS = (PIPE, VALVE, PUMP)


@dataclass(frozen=True)
class Node:
    """A junction or a storage-tank layer.

    Junctions hold zero volume permanently; tank layers are identified by
    ``tank_id`` and come in hot/cold pairs. ``layer`` optionally tags
    distribution junctions as belonging to the supply or return side.
    """

    id: int
    kind: str
    tank_id: Optional[int] = None
    layer: Optional[str] = None

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise TopologyError(f"node {self.id}: unknown kind {self.kind!r}")
        if self.kind == JUNCTION and self.tank_id is not None:
            raise TopologyError(f"node {self.id}: junctions carry no tank_id")
        if self.kind != JUNCTION and self.tank_id is None:
            raise TopologyError(f"node {self.id}: tank layer requires tank_id")


@dataclass(frozen=True)
class Edge:
    """A pipe, valve or pump with fixed orientation tail -> head.

    ``inertia`` is the flow inertia J_E in Pa s^2/m^3: positive for pipes,
    zero for valves and pumps. Pumps contribute no friction (theta = 0).
    """

    id: int
    kind: str
    tail: int
    head: int
    inertia: float = 0.0
    geometry: Optional[PipeGeometry] = None

    def __post_init__(self):
        if self.kind not in EDGE_KINDS:
            raise TopologyError(f"edge {self.id}: unknown kind {self.kind!r}")
        if self.tail == self.head:
            raise TopologyError(f"edge {self.id}: tail == head == {self.tail}")
        if self.kind == PIPE and self.inertia <= 0.0:
            raise TopologyError(f"edge {self.id}: pipe inertia must be > 0, got {self.inertia}")
        if self.kind != PIPE and self.inertia != 0.0:
            raise TopologyError(f"edge {self.id}: {self.kind} must have zero inertia")
        if self.kind != PIPE and self.geometry is not None:
            raise TopologyError(f"edge {self.id}: geometry is only meaningful for pipes")


@dataclass(frozen=True)
class NetworkGraph:
    """The DH network with its designated device roles.

    ``consumer_edges`` lists one representative (heat-exchanger pipe) edge per
    consumer; ``producer_paths`` maps each tank id to the edge set of its
    producer (pump + heat-exchanger pipe + valve from cold to hot layer);
    ``tank_outlet_edges`` designates, per tank, the edge on which the
    hot-layer outlet flow is measured.
    """

    nodes: tuple[Node, ...]
    edges: tuple[Edge, ...]
    consumer_edges: tuple[int, ...]
    producer_paths: Mapping[int, tuple[int, ...]]
    tank_outlet_edges: Mapping[int, int]

    # derived lookups, filled in __post_init__
    node_by_id: Mapping[int, Node] = field(init=False, repr=False)
    edge_by_id: Mapping[int, Edge] = field(init=False, repr=False)
    tank_ids: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        node_by_id = {n.id: n for n in self.nodes}
        edge_by_id = {e.id: e for e in self.edges}
        if len(node_by_id) != len(self.nodes):
            raise TopologyError("duplicate node ids")
        if len(edge_by_id) != len(self.edges):
            raise TopologyError("duplicate edge ids")
        for e in self.edges:
            for endpoint in (e.tail, e.head):
                if endpoint not in node_by_id:
                    raise TopologyError(f"edge {e.id}: unknown endpoint node {endpoint}")
        object.__setattr__(self, "node_by_id", node_by_id)
        object.__setattr__(self, "edge_by_id", edge_by_id)
        object.__setattr__(
            self,
            "tank_ids",
            tuple(sorted({n.tank_id for n in self.nodes if n.tank_id is not None})),
        )

        for eid in self.consumer_edges:
            if eid not in edge_by_id:
                raise TopologyError(f"consumer edge {eid} not in graph")
        for tid, path in self.producer_paths.items():
            for eid in path:
                if eid not in edge_by_id:
                    raise TopologyError(f"producer path {tid}: edge {eid} not in graph")
        for tid, eid in self.tank_outlet_edges.items():
            if eid not in edge_by_id:
                raise TopologyError(f"tank {tid} outlet edge {eid} not in graph")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def node_ids(self) -> list[int]:
        return sorted(self.node_by_id)

    @property
    def edge_ids(self) -> list[int]:
        return sorted(self.edge_by_id)

    def tank_layer_nodes(self, tank_id: int) -> tuple[int, int]:
        """(hot node id, cold node id) of a tank."""
        hot = [n.id for n in self.nodes if n.tank_id == tank_id and n.kind == TANK_HOT]
        cold = [n.id for n in self.nodes if n.tank_id == tank_id and n.kind == TANK_COLD]
        if len(hot) != 1 or len(cold) != 1:
            raise TopologyError(
                f"tank {tank_id} must have exactly one hot and one cold layer node, "
                f"found {len(hot)} hot / {len(cold)} cold"
            )
        return hot[0], cold[0]

    def producer_rep_edge(self, tank_id: int) -> int:
        """The heat-exchanger pipe carrying the producer flow variable q_pr,i."""
        path = self.producer_paths.get(tank_id, ())
        pipes = sorted(e for e in path if self.edge_by_id[e].kind == PIPE)
        if not pipes:
            raise TopologyError(f"producer path of tank {tank_id} contains no pipe")
        return pipes[0]


@dataclass(frozen=True)
class EdgeClassification:
    """Partition of the edge set into independent and dependent flows.

    Chords are ordered: consumers (ascending edge id), one distribution pipe
    per loop (ascending edge id), then tank hot outlets (ascending tank id)
    with the highest-id tank's outlet excluded. Producer edges follow in
    ascending tank id. Everything else is a spanning-tree edge of the merged
    graph whose flow is dependent.
    """

    chord_edges: tuple[int, ...]
    producer_edges: tuple[int, ...]
    tree_edges: tuple[int, ...]
    loop_pipe_edges: tuple[int, ...]
    gdep_edges: tuple[int, ...]
    hdep_edges: tuple[int, ...]
    n_consumers: int
    n_loops: int
    n_producers: int

    @property
    def n_ch(self) -> int:
        return len(self.chord_edges)

    @property
    def n_pr(self) -> int:
        return len(self.producer_edges)


@dataclass(frozen=True)
class LoopMatrix:
    """Fundamental loop matrix F with block structure [I 0 G 0; 0 I 0 H].

    Columns are ordered by ``edge_order`` = chords, producer representatives,
    chord-dependent edges (ascending id), producer-dependent edges (ascending
    id); rows are the chord and producer flows. All entries lie in {-1, 0, 1}
    and every edge flow satisfies q_E = F^T (q_ch, q_pr).
    """

    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    edge_order: tuple[int, ...]
    chord_edges: tuple[int, ...]
    producer_edges: tuple[int, ...]

    @property
    def n_ch(self) -> int:
        return len(self.chord_edges)

    @property
    def n_pr(self) -> int:
        return len(self.producer_edges)

    @property
    def n_g(self) -> int:
        return self.G.shape[1]

    @property
    def n_h(self) -> int:
        return self.H.shape[1]

    @property
    def n_edges(self) -> int:
        return len(self.edge_order)

    def column_of(self, edge_id: int) -> int:
        return self.edge_order.index(edge_id)

    def edge_flows(self, q_ch: np.ndarray, q_pr: np.ndarray) -> np.ndarray:
        """All edge flows (in ``edge_order``) from the independent flows."""
        q_ind = np.concatenate([np.asarray(q_ch, float), np.asarray(q_pr, float)], axis=-1)
        return q_ind @ self.F.astype(float)


def build_incidence(graph: NetworkGraph) -> np.ndarray:
    """Node-edge incidence matrix B0, exact integers.

    Rows follow ascending node id, columns ascending edge id. Convention:
    +1 where the edge heads into the node, -1 where it leaves. Every column
    therefore sums to zero.
    """
    if not _connected(graph):
        raise TopologyError("graph is not connected")
    node_index = {nid: i for i, nid in enumerate(graph.node_ids)}
    b0 = np.zeros((graph.n_nodes, graph.n_edges), dtype=np.int64)
    for j, eid in enumerate(graph.edge_ids):
        e = graph.edge_by_id[eid]
        b0[node_index[e.tail], j] -= 1
        b0[node_index[e.head], j] += 1
    return b0


def incidence_in_loop_order(graph: NetworkGraph, lm: LoopMatrix) -> np.ndarray:
    """B0 with columns permuted to match the loop-matrix edge order."""
    b0 = build_incidence(graph)
    col = {eid: i for i, eid in enumerate(graph.edge_ids)}
    perm = [col[eid] for eid in lm.edge_order]
    return b0[:, perm]


class _UnionFind:
    def __init__(self, items: Iterable):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _merged_node(graph: NetworkGraph, node_id: int):
    """Node key in the merged graph: tank layers collapse onto their tank."""
    n = graph.node_by_id[node_id]
    return ("tank", n.tank_id) if n.tank_id is not None else ("junction", node_id)


def _merged_nodes(graph: NetworkGraph) -> list:
    keys = {_merged_node(graph, nid) for nid in graph.node_by_id}
    return sorted(keys)


def _connected(graph: NetworkGraph) -> bool:
    if not graph.nodes:
        return False
    uf = _UnionFind([n.id for n in graph.nodes])
    for e in graph.edges:
        uf.union(e.tail, e.head)
    roots = {uf.find(n.id) for n in graph.nodes}
    return len(roots) == 1


def classify_edges(graph: NetworkGraph) -> EdgeClassification:
    """Split edges into chords, producer representatives and tree edges.

    Chord selection is deterministic: designated consumer and tank-outlet
    representatives are removed first; any cycles left in the merged graph
    are then broken by turning the cycle-closing distribution pipe of lowest
    processing order (ascending edge id) into a loop chord.
    """
    tank_ids = list(graph.tank_ids)
    if not graph.producer_paths:
        raise TopologyError("network has no producers (n_pr = 0)")
    if sorted(graph.producer_paths) != tank_ids:
        raise TopologyError(
            f"producer paths {sorted(graph.producer_paths)} do not match tank ids {tank_ids}"
        )
    if sorted(graph.tank_outlet_edges) != tank_ids:
        raise TopologyError(
            f"tank outlet designations {sorted(graph.tank_outlet_edges)} "
            f"do not match tank ids {tank_ids}"
        )

    producer_reps = tuple(graph.producer_rep_edge(t) for t in tank_ids)
    outlet_reps = [graph.tank_outlet_edges[t] for t in tank_ids]
    # Highest-id tank keeps its outlet as a dependent flow.
    outlet_chords = tuple(outlet_reps[:-1])

    consumer_chords = tuple(sorted(graph.consumer_edges))
    designated = set(consumer_chords) | set(outlet_chords) | set(producer_reps)
    if len(designated) != len(consumer_chords) + len(outlet_chords) + len(producer_reps):
        raise TopologyError("designated chord/producer representative edges overlap")

    # Grow a spanning forest over the non-designated edges; leftover
    # cycle-closing edges become the loop chords.
    uf = _UnionFind(_merged_nodes(graph))
    loop_chords = []
    tree_edges = []
    for eid in graph.edge_ids:
        if eid in designated:
            continue
        e = graph.edge_by_id[eid]
        if uf.union(_merged_node(graph, e.tail), _merged_node(graph, e.head)):
            tree_edges.append(eid)
        else:
            loop_chords.append(eid)

    for eid in loop_chords:
        if graph.edge_by_id[eid].kind != PIPE:
            raise TopologyError(
                f"edge {eid} ({graph.edge_by_id[eid].kind}) closes a distribution loop; "
                "loop chords must be pipes"
            )

    # The designated edges must reconnect everything the tree left apart.
    roots = {uf.find(k) for k in _merged_nodes(graph)}
    n_merged = len(_merged_nodes(graph))
    if len(tree_edges) != n_merged - len(roots):
        raise TopologyError("internal error: spanning forest size mismatch")

    chords = consumer_chords + tuple(loop_chords) + outlet_chords
    hdep = sorted(
        eid
        for path in graph.producer_paths.values()
        for eid in path
        if eid not in producer_reps
    )
    non_dependent = designated | set(loop_chords) | set(hdep)
    gdep = sorted(eid for eid in graph.edge_by_id if eid not in non_dependent)

    cls = EdgeClassification(
        chord_edges=chords,
        producer_edges=producer_reps,
        tree_edges=tuple(tree_edges),
        loop_pipe_edges=tuple(loop_chords),
        gdep_edges=tuple(gdep),
        hdep_edges=tuple(hdep),
        n_consumers=len(consumer_chords),
        n_loops=len(loop_chords),
        n_producers=len(producer_reps),
    )
    expected = cls.n_consumers + cls.n_loops + cls.n_producers - 1
    if cls.n_ch != expected:
        raise TopologyError(f"chord count {cls.n_ch} != n_c + a + n_pr - 1 = {expected}")
    return cls


def _tree_structure(graph: NetworkGraph, cls: EdgeClassification):
    """Rooted spanning tree of the merged graph over the classification's tree edges."""
    adj: dict = {k: [] for k in _merged_nodes(graph)}
    for eid in cls.tree_edges:
        e = graph.edge_by_id[eid]
        u, v = _merged_node(graph, e.tail), _merged_node(graph, e.head)
        adj[u].append((v, eid, +1))  # +1: edge oriented away from u
        adj[v].append((u, eid, -1))

    root = _merged_nodes(graph)[0]
    parent = {root: None}  # node -> (parent node, edge id, sign of edge along parent->node)
    order = [root]
    stack = [root]
    while stack:
        u = stack.pop()
        for v, eid, sign in adj[u]:
            if v not in parent:
                parent[v] = (u, eid, sign)
                order.append(v)
                stack.append(v)
    if len(parent) != len(adj):
        raise TopologyError(
            "tree edges do not span the merged graph; edge classification is inconsistent"
        )
    depth = {root: 0}
    for v in order[1:]:
        depth[v] = depth[parent[v][0]] + 1
    return parent, depth


def fundamental_loop_matrix(graph: NetworkGraph, cls: EdgeClassification) -> LoopMatrix:
    """Build F so that q_E = F^T (q_ch, q_pr) reproduces all mass balances.

    Each chord or producer representative closes exactly one fundamental
    cycle with the spanning tree of the merged graph; walking that cycle in
    the chord's direction gives the +-1 coefficients of the dependent edges.
    """
    parent, depth = _tree_structure(graph, cls)

    rows = list(cls.chord_edges) + list(cls.producer_edges)
    edge_order = rows + list(cls.gdep_edges) + list(cls.hdep_edges)
    col = {eid: j for j, eid in enumerate(edge_order)}
    n_rows, n_cols = len(rows), len(edge_order)

    F = np.zeros((n_rows, n_cols), dtype=np.int64)
    for i, eid in enumerate(rows):
        e = graph.edge_by_id[eid]
        F[i, col[eid]] = 1
        # Tree path from head back to tail closes the cycle along the chord.
        u = _merged_node(graph, e.head)
        v = _merged_node(graph, e.tail)
        while u != v:
            if depth[u] >= depth[v]:
                pu, peid, sign = parent[u]
                # Edge traversed from u toward the root: against `sign`.
                F[i, col[peid]] += -sign
                u = pu
            else:
                pv, peid, sign = parent[v]
                F[i, col[peid]] += sign
                v = pv

    if not np.isin(F, (-1, 0, 1)).all():
        raise TopologyError("loop matrix construction produced entries outside {-1,0,1}")

    n_ch, n_pr = cls.n_ch, cls.n_pr
    n_g, n_h = len(cls.gdep_edges), len(cls.hdep_edges)
    ident = np.eye(n_rows, dtype=np.int64)
    if not np.array_equal(F[:, :n_rows], ident):
        raise TopologyError("loop matrix identity block corrupted")
    G = F[:n_ch, n_rows : n_rows + n_g]
    H = F[n_ch:, n_rows + n_g :]
    if np.any(F[n_ch:, n_rows : n_rows + n_g]) or np.any(F[:n_ch, n_rows + n_g :]):
        raise TopologyError(
            "chord and producer flows share a dependent edge; the network violates "
            "the producer-interfacing assumptions"
        )
    if n_h and (np.abs(H).sum(axis=0) != 1).any():
        raise TopologyError("a producer-path edge carries more than its own producer's flow")

    if np.linalg.matrix_rank(F.astype(float)) != n_rows:
        raise TopologyError("loop matrix is rank deficient; edge classification is invalid")

    return LoopMatrix(
        F=F,
        G=G.copy(),
        H=H.copy(),
        edge_order=tuple(edge_order),
        chord_edges=cls.chord_edges,
        producer_edges=cls.producer_edges,
    )


def extract_B(graph: NetworkGraph, lm: LoopMatrix) -> np.ndarray:
    """Tank-outlet sub-block B of F: V_sh' = q_pr - B q_ch, exact integers.

    Row i of -B0[hot_i] F^T restricted to chord columns gives the outlet flow
    of tank i in chord coordinates; the producer columns must reduce to the
    identity (each producer fills exactly its own tank).
    """
    b0 = incidence_in_loop_order(graph, lm)
    node_row = {nid: i for i, nid in enumerate(graph.node_ids)}
    tank_ids = graph.tank_ids
    hot_rows = [node_row[graph.tank_layer_nodes(t)[0]] for t in tank_ids]

    m = b0[hot_rows, :] @ lm.F.T  # n_ST x (n_ch + n_pr), integer
    n_ch = lm.n_ch
    if not np.array_equal(m[:, n_ch:], np.eye(len(tank_ids), dtype=np.int64)):
        raise TopologyError(
            "producer flows do not enter their tanks' hot layers with identity "
            "coefficient; check producer path orientation (cold -> hot)"
        )
    b = -m[:, :n_ch]
    if not np.isin(b, (-1, 0, 1)).all():
        raise TopologyError("tank-outlet sub-block has entries outside {-1,0,1}")
    return b


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of the structural topology checks."""

    violations: tuple[str, ...]
    warnings: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return not self.violations


def validate_topology(
    graph: NetworkGraph,
    tank_capacity: Optional[Sequence[float]] = None,
    v_sh0: Optional[Sequence[float]] = None,
    v_sc0: Optional[Sequence[float]] = None,
) -> ValidationReport:
    """Check the modeling assumptions; returns a report instead of raising.

    Covers: (a) every producer path runs from its tank's cold layer to the
    hot layer; (b) initial layer volumes sum to the tank capacity (when
    volumes are supplied); (c) no standalone tanks; connectivity;
    supply/return layer symmetry (when junctions carry layer tags); and the
    reducibility of the graph (classification + loop matrix construction).
    """
    violations: list[str] = []
    warnings: list[str] = []

    if not _connected(graph):
        violations.append("graph is not connected")

    tank_ids = graph.tank_ids
    for t in tank_ids:
        try:
            graph.tank_layer_nodes(t)
        except TopologyError as exc:
            violations.append(str(exc))

    # (a) + (c): each tank is fed by exactly one producer path from its cold
    # to its hot layer, and is attached to the network by a designated outlet.
    for t in tank_ids:
        path = graph.producer_paths.get(t)
        if not path:
            violations.append(f"tank {t} has no producer (standalone tank, assumption (c))")
            continue
        try:
            hot, cold = graph.tank_layer_nodes(t)
        except TopologyError:
            continue
        err = _check_chain(graph, path, start=cold, end=hot)
        if err:
            violations.append(
                f"producer of tank {t} is not a cold-to-hot chain through the tank "
                f"(assumption (a)): {err}"
            )
        kinds = [graph.edge_by_id[e].kind for e in path]
        if kinds.count(PUMP) != 1:
            violations.append(f"producer path of tank {t} must contain exactly one pump")
        if kinds.count(PIPE) < 1:
            violations.append(f"producer path of tank {t} must contain a heat-exchanger pipe")
        if t not in graph.tank_outlet_edges:
            violations.append(f"tank {t} has no designated hot-layer outlet edge")

    if not graph.producer_paths:
        violations.append("network has no producers")
    if not graph.consumer_edges:
        violations.append("network has no consumers")

    # (b) volumes, when provided.
    if tank_capacity is not None and v_sh0 is not None:
        cap = np.asarray(tank_capacity, float)
        vh = np.asarray(v_sh0, float)
        vc = cap - vh if v_sc0 is None else np.asarray(v_sc0, float)
        for i, t in enumerate(tank_ids):
            if not (0.0 <= vh[i] <= cap[i]):
                violations.append(
                    f"tank {t}: initial hot volume {vh[i]} outside [0, {cap[i]}]"
                )
            if abs(vh[i] + vc[i] - cap[i]) > 1e-9 * max(1.0, cap[i]):
                violations.append(
                    f"tank {t}: initial volumes {vh[i]} + {vc[i]} != capacity {cap[i]} "
                    "(assumption (b))"
                )

    # Supply/return symmetry, checked when junction layer tags are present.
    supply = [n for n in graph.nodes if n.layer == "supply"]
    ret = [n for n in graph.nodes if n.layer == "return"]
    if supply or ret:
        if len(supply) != len(ret):
            violations.append(
                f"supply layer has {len(supply)} junctions, return layer {len(ret)}"
            )
        n_sup = _layer_pipe_count(graph, "supply")
        n_ret = _layer_pipe_count(graph, "return")
        if n_sup != n_ret:
            violations.append(
                f"supply layer has {n_sup} distribution pipes, return layer {n_ret}"
            )
    else:
        warnings.append("no layer tags on junctions; supply/return symmetry not checked")

    # Reducibility: classification and loop matrix must go through.
    if not violations:
        try:
            cls = classify_edges(graph)
            lm = fundamental_loop_matrix(graph, cls)
            extract_B(graph, lm)
        except TopologyError as exc:
            violations.append(f"reduction failed: {exc}")

    return ValidationReport(violations=tuple(violations), warnings=tuple(warnings))


def _check_chain(graph: NetworkGraph, path: Sequence[int], start: int, end: int) -> str:
    """Empty string if `path` edges form a simple chain from start to end."""
    degree: dict[int, int] = {}
    for eid in path:
        e = graph.edge_by_id[eid]
        degree[e.tail] = degree.get(e.tail, 0) + 1
        degree[e.head] = degree.get(e.head, 0) + 1
    ends = sorted(n for n, d in degree.items() if d == 1)
    if sorted((start, end)) != ends:
        return f"endpoints {ends} instead of {sorted((start, end))}"
    if any(d > 2 for d in degree.values()):
        return "path branches"
    if len(path) != len(degree) - 1:
        return "path is not a simple chain"
    return ""


def _layer_pipe_count(graph: NetworkGraph, layer: str) -> int:
    ids = {n.id for n in graph.nodes if n.layer == layer}
    return sum(1 for e in graph.edges if e.tail in ids and e.head in ids)
