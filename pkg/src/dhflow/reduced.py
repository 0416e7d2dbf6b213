"""Reduced ODE plant: inertia matrices, regressor, disturbance and open-loop RHS.

Stacking the chord and producer flows as the independent variables turns the
differential-algebraic network equations into

    J_ch q_ch' = f_ch(q_ch) + u_ch
    J_pr q_pr' = f_pr(q_pr) + u_pr
    V_sh'      = q_pr - B q_ch,   V_sc' = -V_sh'

with J_ch symmetric positive definite, J_pr diagonal positive definite and a
zero cross-inertia block. The true producer friction coefficients live here,
on the plant side only; controllers never see them.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from .errors import InfeasibleStateError, TopologyError
from .graph import (
    PUMP,
    EdgeClassification,
    LoopMatrix,
    NetworkGraph,
    classify_edges,
    extract_B,
    fundamental_loop_matrix,
)
from .hydraulics import reduced_friction_maps, signed_square

__all__ = [
    "PlantState",
    "PumpAssignment",
    "ReducedModel",
    "build_reduced_model",
    "assemble_inertia",
    "regressor_W",
    "disturbance_psi",
    "open_loop_rhs",
]


@dataclass(frozen=True)
class PlantState:
    """Plant variables at one time instant (m^3/s and m^3)."""

    q_ch: np.ndarray
    q_pr: np.ndarray
    V_sh: np.ndarray
    V_sc: np.ndarray
    t: float = 0.0


@dataclass(frozen=True)
class PumpAssignment:
    """Maps control inputs to per-edge pump pressures.

    ``pump_edges`` lists, for each chord row then each producer row, the id
    of the pump sitting in series with that flow. The assignment satisfies
    F w_E = (u_ch, u_pr) exactly.
    """

    pump_edges: tuple[int, ...]
    columns: tuple[int, ...]  # loop-matrix column of each pump edge
    n_edges: int

    def w_edge(self, u_ch: np.ndarray, u_pr: np.ndarray) -> np.ndarray:
        """Per-edge pump pressure vector in loop-matrix column order."""
        w = np.zeros(self.n_edges)
        u = np.concatenate([u_ch, u_pr])
        w[list(self.columns)] = u
        return w


def assemble_pumps(graph: NetworkGraph, lm: LoopMatrix) -> PumpAssignment:
    """Identify the series pump of every chord and producer flow.

    Requires exactly one pump per chord and per producer path, oriented with
    the flow it actuates (loop-matrix coefficient +1); any other pump
    placement leaves the inputs without an identity coefficient and is
    rejected.
    """
    pump_ids = [eid for eid in lm.edge_order if graph.edge_by_id[eid].kind == PUMP]
    n_rows = lm.n_ch + lm.n_pr
    owner: dict[int, int] = {}
    for eid in pump_ids:
        colvec = lm.F[:, lm.column_of(eid)]
        nz = np.flatnonzero(colvec)
        if len(nz) != 1:
            raise TopologyError(
                f"pump edge {eid} is not in series with a single chord/producer flow"
            )
        row = int(nz[0])
        if colvec[row] != 1:
            raise TopologyError(
                f"pump edge {eid} is oriented against the flow it actuates; flip it"
            )
        if row in owner:
            raise TopologyError(
                f"flow {row} has two pumps (edges {owner[row]} and {eid}); exactly one "
                "pump per chord and per producer path is supported"
            )
        owner[row] = eid
    missing = [i for i in range(n_rows) if i not in owner]
    if missing:
        labels = [
            (lm.chord_edges + lm.producer_edges)[i] for i in missing
        ]
        raise TopologyError(
            f"flows of edges {labels} have no series pump; every chord and producer "
            "path needs one"
        )
    ordered = tuple(owner[i] for i in range(n_rows))
    return PumpAssignment(
        pump_edges=ordered,
        columns=tuple(lm.column_of(e) for e in ordered),
        n_edges=lm.n_edges,
    )


def assemble_inertia(lm: LoopMatrix, inertia_edge: np.ndarray):
    """Reduced inertia matrices (J_ch, J_pr) from per-edge inertias.

    Computes the full congruence F <J_E> F^T, verifies that the chord/producer
    cross block vanishes identically and that J_ch admits a Cholesky
    factorization; J_pr must come out diagonal.
    """
    j = np.asarray(inertia_edge, dtype=float)
    if j.shape != (lm.n_edges,):
        raise ValueError(f"inertia vector has shape {j.shape}, expected ({lm.n_edges},)")
    if np.any(j < 0.0):
        raise ValueError("edge inertias must be >= 0")

    f = lm.F.astype(float)
    full = (f * j) @ f.T
    n_ch = lm.n_ch
    cross = full[:n_ch, n_ch:]
    if np.any(cross != 0.0):
        raise TopologyError(
            "nonzero chord/producer cross-inertia block; the network violates the "
            "producer-interfacing assumptions"
        )
    j_ch = full[:n_ch, :n_ch]
    j_pr_full = full[n_ch:, n_ch:]
    if np.any(j_pr_full - np.diag(np.diag(j_pr_full)) != 0.0):
        raise TopologyError("producer inertia matrix is not diagonal")
    j_pr = np.diag(j_pr_full).copy()
    if np.any(j_pr <= 0.0):
        raise TopologyError("producer inertia must be positive; give each producer a pipe")
    try:
        cho_factor(j_ch, lower=True)
    except LinAlgError as exc:
        raise TopologyError(f"chord inertia matrix is not positive definite: {exc}") from exc
    return j_ch, j_pr


@dataclass(frozen=True)
class ReducedModel:
    """Immutable reduced plant: loop matrix, inertias and true friction data."""

    graph: NetworkGraph
    classification: EdgeClassification
    loop: LoopMatrix
    B: np.ndarray
    theta_edge: np.ndarray  # per-edge, loop-matrix column order
    theta_producer: np.ndarray  # per-producer path aggregate (the unknown theta)
    inertia_edge: np.ndarray
    J_ch: np.ndarray
    J_pr: np.ndarray  # diagonal entries
    pumps: PumpAssignment
    capacity: np.ndarray  # tank capacities, m^3

    _cho: tuple = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_cho", cho_factor(self.J_ch, lower=True))
        for name in ("B", "theta_edge", "theta_producer", "inertia_edge", "J_ch", "J_pr", "capacity"):
            getattr(self, name).setflags(write=False)

    @property
    def n_ch(self) -> int:
        return self.loop.n_ch

    @property
    def n_pr(self) -> int:
        return self.loop.n_pr

    @property
    def n_st(self) -> int:
        return self.B.shape[0]

    @property
    def n_loops(self) -> int:
        return self.classification.n_loops

    def f_ch(self, q_ch: np.ndarray) -> np.ndarray:
        """Chord friction map (Pa); batched over leading axes."""
        q_pr0 = np.zeros(np.shape(q_ch)[:-1] + (self.n_pr,))
        return reduced_friction_maps(self.loop, self.theta_edge, q_ch, q_pr0)[0]

    def f_pr(self, q_pr: np.ndarray) -> np.ndarray:
        """Producer friction map, componentwise -theta_i |q_i| q_i (Pa)."""
        return -self.theta_producer * signed_square(np.asarray(q_pr, float))

    def solve_J_ch(self, rhs: np.ndarray) -> np.ndarray:
        """J_ch^{-1} rhs through the cached Cholesky factors."""
        return cho_solve(self._cho, rhs)

    def tank_outlet_flows(self, q_ch: np.ndarray) -> np.ndarray:
        """Measured hot-layer outlet flow of each tank, (B q_ch)_i."""
        return q_ch @ self.B.T.astype(float) if np.ndim(q_ch) > 1 else self.B.astype(float) @ q_ch


def build_reduced_model(
    graph: NetworkGraph,
    theta_by_edge: Mapping[int, float],
    capacity: Optional[np.ndarray] = None,
) -> ReducedModel:
    """Assemble the reduced model from a graph and per-edge friction data.

    ``theta_by_edge`` maps edge id to the quadratic-loss coefficient; pumps
    must map to zero. Producer-path coefficients are aggregated into the
    per-producer unknown parameter vector.
    """
    cls = classify_edges(graph)
    lm = fundamental_loop_matrix(graph, cls)
    b = extract_B(graph, lm)

    theta = np.empty(lm.n_edges)
    inertia = np.empty(lm.n_edges)
    for j, eid in enumerate(lm.edge_order):
        e = graph.edge_by_id[eid]
        th = float(theta_by_edge[eid])
        if e.kind == PUMP and th != 0.0:
            raise TopologyError(f"pump edge {eid} must have theta = 0, got {th}")
        if e.kind != PUMP and th <= 0.0:
            raise TopologyError(f"{e.kind} edge {eid} must have theta > 0, got {th}")
        theta[j] = th
        inertia[j] = e.inertia

    j_ch, j_pr = assemble_inertia(lm, inertia)
    pumps = assemble_pumps(graph, lm)

    tank_ids = graph.tank_ids
    theta_pr = np.empty(len(tank_ids))
    for i, t in enumerate(tank_ids):
        theta_pr[i] = sum(float(theta_by_edge[eid]) for eid in graph.producer_paths[t])

    cap = np.full(len(tank_ids), np.inf) if capacity is None else np.asarray(capacity, float)
    if cap.shape != (len(tank_ids),):
        raise ValueError(f"capacity has shape {cap.shape}, expected ({len(tank_ids)},)")

    return ReducedModel(
        graph=graph,
        classification=cls,
        loop=lm,
        B=b,
        theta_edge=theta,
        theta_producer=theta_pr,
        inertia_edge=inertia,
        J_ch=j_ch,
        J_pr=j_pr,
        pumps=pumps,
        capacity=cap,
    )


def regressor_W(q_pr: np.ndarray) -> np.ndarray:
    """Diagonal regressor W = <|q_pr,i| q_pr,i> with W(q_pr) theta = -f_pr(q_pr)."""
    return np.diag(signed_square(np.asarray(q_pr, dtype=float)))


def disturbance_psi(B: np.ndarray, q_ch: np.ndarray, q_ch_star: np.ndarray) -> np.ndarray:
    """Chord-tracking disturbance Psi = B (q_ch* - q_ch) entering the volume dynamics."""
    return B.astype(float) @ (np.asarray(q_ch_star, float) - np.asarray(q_ch, float))


def open_loop_rhs(model: ReducedModel, state: PlantState, u_ch: np.ndarray, u_pr: np.ndarray):
    """Open-loop time derivatives (q_ch', q_pr', V_sh', V_sc').

    Raises :class:`InfeasibleStateError` if any hot-layer volume has left
    [0, capacity]; clamping instead would silently mask scenario infeasibility.
    """
    v_sh = np.asarray(state.V_sh, float)
    if np.any((v_sh < 0.0) | (v_sh > model.capacity)):
        i = int(np.flatnonzero((v_sh < 0.0) | (v_sh > model.capacity))[0])
        t = model.graph.tank_ids[i]
        raise InfeasibleStateError(
            f"tank {t}: hot-layer volume {v_sh[i]:.6g} m^3 outside "
            f"[0, {model.capacity[i]:.6g}] at t={state.t:.6g} s",
            tank_id=t,
        )
    dq_ch = model.solve_J_ch(model.f_ch(state.q_ch) + u_ch)
    dq_pr = (model.f_pr(state.q_pr) + u_pr) / model.J_pr
    dv_sh = state.q_pr - model.B.astype(float) @ state.q_ch
    return dq_ch, dq_pr, dv_sh, -dv_sh
