"""Equilibria, energy functions, loop-law verification and convergence metrics.

These are plant-side diagnostics: they may use the true friction
coefficients and the tank-outlet block, which the controllers never see.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .control import FlowPIGains, VolumeGains
from .hydraulics import signed_square
from .reduced import ReducedModel
from .trajectory import Trajectory

__all__ = [
    "EquilibriumPoint",
    "ConvergenceReport",
    "compute_equilibrium",
    "loop_law_residual",
    "storage_S_ch",
    "hamiltonian_Htilde",
    "hamiltonian_structure_matrix",
    "convergence_metrics",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EquilibriumPoint:
    """Closed-loop equilibrium for constant setpoints.

    At this point the flow error, the backstepping coordinate and every
    controller derivative vanish; ``x_b`` sits at the true friction
    coefficients. Producers with zero equilibrium flow are flagged: they are
    "not in operation" and their parameter estimates need not converge.
    """

    q_ch: np.ndarray
    x_ch: np.ndarray
    q_pr: np.ndarray
    V_sh: np.ndarray
    x_a: np.ndarray
    x_b: np.ndarray
    infeasible_producers: tuple[int, ...] = ()

    @property
    def z_pr(self) -> np.ndarray:
        return np.zeros_like(self.q_pr)

    @property
    def feasible(self) -> bool:
        return not self.infeasible_producers


def compute_equilibrium(
    model: ReducedModel, q_ch_star: np.ndarray, v_sh_star: np.ndarray
) -> EquilibriumPoint:
    """Closed-loop equilibrium for the given setpoints.

    q_ch = q_ch*, x_ch = -f_ch(q_ch*), q_pr = x_a = B q_ch*, V_sh = V_sh*
    and x_b = theta. Any producer with (B q_ch*)_i = 0 is reported as out of
    operation; the estimation-convergence guarantee is withdrawn for it.
    """
    q_star = np.asarray(q_ch_star, float)
    v_star = np.asarray(v_sh_star, float)
    q_pr_bar = model.B.astype(float) @ q_star
    infeasible = tuple(
        model.graph.tank_ids[i] for i in np.flatnonzero(q_pr_bar == 0.0)
    )
    if infeasible:
        logger.warning(
            "producers of tanks %s have zero equilibrium flow (not in operation); "
            "their friction estimates need not converge",
            list(infeasible),
        )
    return EquilibriumPoint(
        q_ch=q_star.copy(),
        x_ch=-model.f_ch(q_star),
        q_pr=q_pr_bar,
        V_sh=v_star.copy(),
        x_a=q_pr_bar.copy(),
        x_b=model.theta_producer.copy(),
        infeasible_producers=infeasible,
    )


def loop_law_residual(
    model: ReducedModel,
    q_ch: np.ndarray,
    q_pr: np.ndarray,
    u_ch: np.ndarray,
    u_pr: np.ndarray,
) -> float:
    """Pressure loop-law residual ``max |F dP_E|`` at one closed-loop sample.

    Rebuilds all edge flows and their derivatives from the reduced dynamics,
    forms each edge's pressure drop J_E q_E' + theta_E |q_E| q_E - w_E with
    the pump pressures of the applied inputs, and sums around every
    fundamental loop. Exact reduction makes this vanish to solver precision;
    a corrupted per-edge coefficient shows up as a strictly positive residual.
    """
    f = model.loop.F.astype(float)
    q_edge = f.T @ np.concatenate([q_ch, q_pr])
    dq_ch = model.solve_J_ch(model.f_ch(q_ch) + u_ch)
    dq_pr = (model.f_pr(q_pr) + u_pr) / model.J_pr
    dq_edge = f.T @ np.concatenate([dq_ch, dq_pr])
    w_edge = model.pumps.w_edge(u_ch, u_pr)
    dp_edge = model.inertia_edge * dq_edge + model.theta_edge * signed_square(q_edge) - w_edge
    return float(np.abs(f @ dp_edge).max())


def storage_S_ch(
    model: ReducedModel,
    gains: FlowPIGains,
    q_ch: np.ndarray,
    x_ch: np.ndarray,
    q_ch_star: np.ndarray,
) -> float:
    """Storage function of the chord subsystem.

    S = 1/2 (q - q*)^T J_ch (q - q*) + 1/2 (x - x*)^T M_ch^{-1} (x - x*)
    with x* = -f_ch(q*); positive definite about the equilibrium and
    non-increasing along closed-loop trajectories between setpoint changes.
    """
    dq = np.asarray(q_ch, float) - np.asarray(q_ch_star, float)
    dx = np.asarray(x_ch, float) + model.f_ch(np.asarray(q_ch_star, float))
    return float(0.5 * dq @ model.J_ch @ dq + 0.5 * dx @ (dx / gains.M_ch))


def hamiltonian_Htilde(
    model: ReducedModel,
    gains: VolumeGains,
    z_pr: np.ndarray,
    V_sh: np.ndarray,
    x_a: np.ndarray,
    x_b: np.ndarray,
    q_ch_star: np.ndarray,
    v_sh_star: np.ndarray,
) -> float:
    """Shaped Hamiltonian of the volume/adaptation subsystem.

    Quadratic in the deviation from the equilibrium (0, V*, B q*, theta) with
    weights (J_pr, I, M_a^{-1}, M_b^{-1}); with the chord flows pinned at
    their setpoints its sampled values are non-increasing.
    """
    q_pr_bar = model.B.astype(float) @ np.asarray(q_ch_star, float)
    dv = np.asarray(V_sh, float) - np.asarray(v_sh_star, float)
    da = np.asarray(x_a, float) - q_pr_bar
    db = np.asarray(x_b, float) - model.theta_producer
    z = np.asarray(z_pr, float)
    return float(
        0.5 * (model.J_pr * z) @ z
        + 0.5 * dv @ dv
        + 0.5 * da @ (da / gains.M_a)
        + 0.5 * db @ (db / gains.M_b)
    )


def hamiltonian_structure_matrix(gains: VolumeGains, z_pr: np.ndarray) -> np.ndarray:
    """Structure matrix F(X) of the closed-loop Hamiltonian form.

    Its symmetric part is block-diag(-2 N_pr, -2 N_sh, 0, 0): the adaptation
    and integral channels are lossless, dissipation enters through the flow
    and volume errors only.
    """
    n = len(gains.N_pr)
    w = signed_square(np.asarray(z_pr, float))  # regressor evaluated at z_pr
    i_n = np.eye(n)
    zero = np.zeros((n, n))
    return np.block(
        [
            [-np.diag(gains.N_pr), -i_n, zero, np.diag(w)],
            [i_n, -np.diag(gains.N_sh), i_n, zero],
            [zero, -i_n, zero, zero],
            [-np.diag(w), zero, zero, zero],
        ]
    )


@dataclass(frozen=True)
class SegmentMetrics:
    """Convergence figures for one inter-event window."""

    t_start: float
    t_end: float
    q_settle_s: Optional[float]  # None if the 1% band was never held
    v_settle_s: Optional[float]
    q_overshoot: float
    terminal_q_err: float
    terminal_v_err: float


@dataclass(frozen=True)
class ConvergenceReport:
    """Settling, overshoot and terminal-error summary of a trajectory."""

    segments: tuple[SegmentMetrics, ...]
    terminal_q_err: float
    terminal_v_err: float
    theta_rel_err: float
    producer_feasible: tuple[bool, ...]
    theta_rel_err_feasible: float = field(default=np.nan)

    @property
    def all_settled(self) -> bool:
        return all(s.q_settle_s is not None and s.v_settle_s is not None for s in self.segments)


def _settle_time(t: np.ndarray, err: np.ndarray, band: float) -> Optional[float]:
    """Time from t[0] after which err stays below band; None if never."""
    inside = err <= band
    if not inside[-1]:
        return None
    bad = np.flatnonzero(~inside)
    if len(bad) == 0:
        return 0.0
    k = bad[-1] + 1
    return float(t[k] - t[0])


def convergence_metrics(
    traj: Trajectory,
    model: ReducedModel,
    band_fraction: float = 0.01,
) -> ConvergenceReport:
    """Per-segment settling times at the 1% band plus terminal errors.

    Flow errors settle into ``band_fraction * max|q*|``; volumes into
    ``band_fraction * capacity``. The terminal estimate error is reported
    both over all producers and restricted to those in operation
    (equilibrium flow nonzero); idle producers are exempt from convergence.
    """
    segs = []
    for t_a, t_b, sl in traj.segment_slices():
        t = traj.t[sl]
        q_err = np.abs(traj.q_ch[sl] - traj.q_star[sl]).max(axis=1)
        v_err = np.abs(traj.V_sh[sl] - traj.V_star[sl]).max(axis=1)
        q_band = band_fraction * np.abs(traj.q_star[sl]).max()
        v_band = band_fraction * model.capacity.max()
        step = float(np.abs(traj.q_star[sl][0] - traj.q_ch[sl][0]).max())
        if step > 1e-9 * max(1.0, float(np.abs(traj.q_star[sl]).max())):
            overshoot = float(max(0.0, q_err.max() - step) / step)
        else:
            overshoot = 0.0  # no flow-setpoint step in this window
        segs.append(
            SegmentMetrics(
                t_start=float(t_a),
                t_end=float(t_b),
                q_settle_s=_settle_time(t, q_err, q_band),
                v_settle_s=_settle_time(t, v_err, v_band),
                q_overshoot=overshoot,
                terminal_q_err=float(q_err[-1]),
                terminal_v_err=float(v_err[-1]),
            )
        )

    theta = model.theta_producer
    db = traj.x_b[-1] - theta
    rel = float(np.linalg.norm(db) / np.linalg.norm(theta))
    q_pr_bar = model.B.astype(float) @ traj.q_star[-1]
    feasible = tuple(bool(v != 0.0) for v in q_pr_bar)
    if any(feasible):
        mask = np.array(feasible)
        rel_feas = float(np.linalg.norm(db[mask]) / np.linalg.norm(theta[mask]))
    else:
        rel_feas = np.nan

    return ConvergenceReport(
        segments=tuple(segs),
        terminal_q_err=float(np.abs(traj.q_ch[-1] - traj.q_star[-1]).max()),
        terminal_v_err=float(np.abs(traj.V_sh[-1] - traj.V_star[-1]).max()),
        theta_rel_err=rel,
        producer_feasible=feasible,
        theta_rel_err_feasible=rel_feas,
    )
