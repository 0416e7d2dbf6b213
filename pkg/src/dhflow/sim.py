"""Fixed-step closed-loop simulation with piecewise-constant setpoints.

Plant and controller states integrate as one monolithic vector under
classical fourth-order Runge-Kutta. Schedule events snap to step boundaries
and swap setpoints without touching controller states; samples are recorded
at a fixed decimation together with the applied inputs and the two energy
diagnostics, so the run is bit-reproducible.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Optional, TYPE_CHECKING

import numpy as np

from .analysis import hamiltonian_Htilde, storage_S_ch
from .control import (
    ChordMeasurements,
    FlowPIGains,
    ProducerMeasurements,
    Saturation,
    VolumeGains,
    adaptive_volume_control,
    pi_flow_control,
    saturate_u_pr,
    z_transform,
)
from .errors import InfeasibleStateError, ScenarioError
from .reduced import PlantState, ReducedModel, open_loop_rhs
from .trajectory import Trajectory

if TYPE_CHECKING:  # pragma: no cover
    from .scenario import Scenario

__all__ = [
    "ScheduleEvent",
    "Schedule",
    "IntegratorConfig",
    "Setpoints",
    "apply_event",
    "ClosedLoop",
    "step",
    "run_closed_loop",
    "run_scenario",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScheduleEvent:
    """Setpoint change at time t; fields left as None are kept unchanged."""

    t: float
    q_ch_star: Optional[np.ndarray] = None
    v_sh_star: Optional[np.ndarray] = None


@dataclass(frozen=True)
class Schedule:
    """Strictly increasing setpoint events; the first must fix both setpoints at t=0."""

    events: tuple[ScheduleEvent, ...]

    def __post_init__(self):
        if not self.events:
            raise ScenarioError("schedule: at least one event (at t=0) is required")
        t = [e.t for e in self.events]
        if any(b <= a for a, b in zip(t[:-1], t[1:])):
            raise ScenarioError(f"schedule: event times must be strictly increasing, got {t}")
        first = self.events[0]
        if first.t != 0.0 or first.q_ch_star is None or first.v_sh_star is None:
            raise ScenarioError(
                "schedule: first event must be at t=0 and set both q_ch_star and V_sh_star"
            )

    @property
    def initial(self) -> "Setpoints":
        return Setpoints(
            q_ch_star=np.asarray(self.events[0].q_ch_star, float),
            v_sh_star=np.asarray(self.events[0].v_sh_star, float),
        )


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step RK4 configuration; events must land on step boundaries."""

    dt: float = 0.5
    t_end: float = 86400.0
    decimation: int = 120

    def __post_init__(self):
        if self.dt <= 0.0:
            raise ScenarioError(f"integrator.dt must be > 0, got {self.dt}")
        if self.t_end <= 0.0:
            raise ScenarioError(f"integrator.t_end must be > 0, got {self.t_end}")
        if self.decimation < 1:
            raise ScenarioError(f"integrator.decimation must be >= 1, got {self.decimation}")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass(frozen=True)
class Setpoints:
    q_ch_star: np.ndarray
    v_sh_star: np.ndarray


def apply_event(setpoints: Setpoints, event: ScheduleEvent) -> Setpoints:
    """Piecewise-constant setpoint update; both fields of an event apply atomically."""
    q = setpoints.q_ch_star if event.q_ch_star is None else np.asarray(event.q_ch_star, float)
    v = setpoints.v_sh_star if event.v_sh_star is None else np.asarray(event.v_sh_star, float)
    return Setpoints(q_ch_star=q, v_sh_star=v)


class ClosedLoop:
    """The monolithic closed-loop vector field and its state layout.

    State vector: [q_ch, q_pr, V_sh, V_sc, x_ch, x_a, x_b]. With
    ``pin_chords`` the chord flows are frozen at their setpoints, which
    removes the chord-tracking disturbance from the volume subsystem.
    """

    def __init__(
        self,
        model: ReducedModel,
        flow_gains: FlowPIGains,
        volume_gains: VolumeGains,
        saturation: Optional[Saturation] = None,
        pin_chords: bool = False,
    ):
        n_ch, n_pr, n_st = model.n_ch, model.n_pr, model.n_st
        if len(flow_gains.M_ch) != n_ch:
            raise ScenarioError(
                f"flow gains have dimension {len(flow_gains.M_ch)}, model has n_ch={n_ch}"
            )
        if len(volume_gains.N_pr) != n_pr:
            raise ScenarioError(
                f"volume gains have dimension {len(volume_gains.N_pr)}, model has n_pr={n_pr}"
            )
        if saturation is not None and len(saturation.u_nominal) != n_pr:
            raise ScenarioError(
                f"saturation nominal has dimension {len(saturation.u_nominal)}, "
                f"model has n_pr={n_pr}"
            )
        self.model = model
        self.flow_gains = flow_gains
        self.volume_gains = volume_gains
        self.saturation = saturation
        self.pin_chords = pin_chords
        self.sl_q_ch = slice(0, n_ch)
        self.sl_q_pr = slice(n_ch, n_ch + n_pr)
        self.sl_v_sh = slice(n_ch + n_pr, n_ch + n_pr + n_st)
        self.sl_v_sc = slice(n_ch + n_pr + n_st, n_ch + n_pr + 2 * n_st)
        self.sl_x_ch = slice(n_ch + n_pr + 2 * n_st, 2 * n_ch + n_pr + 2 * n_st)
        self.sl_x_a = slice(2 * n_ch + n_pr + 2 * n_st, 2 * n_ch + 2 * n_pr + 2 * n_st)
        self.sl_x_b = slice(2 * n_ch + 2 * n_pr + 2 * n_st, 2 * n_ch + 3 * n_pr + 2 * n_st)
        self.n_state = 2 * n_ch + 3 * n_pr + 2 * n_st

        # Cached constants for the integration-rate vector field. Values and
        # operation order match the public control/plant functions exactly.
        lm = model.loop
        self._G = lm.G.astype(float)
        # Transposed view, not a contiguous copy: keeps the BLAS accumulation
        # order identical to the reference friction map.
        self._Gth_T = (self._G * model.theta_edge[n_ch + n_pr : n_ch + n_pr + lm.n_g]).T
        self._th_ch = model.theta_edge[:n_ch].copy()
        self._th_pr = model.theta_producer.copy()
        self._B = model.B.astype(float)
        self._cap = model.capacity.copy()
        self._J_pr = model.J_pr.copy()
        from scipy.linalg import get_lapack_funcs

        self._chol = model._cho[0]  # same Cholesky factor the model solves with
        (self._potrs,) = get_lapack_funcs(("potrs",), (self._chol,))
        g = volume_gains
        self._c_verr = model.J_pr * (g.M_a - g.N_sh**2) + 1.0
        self._c_z = model.J_pr * g.N_sh + g.N_pr
        self._c_out = model.J_pr * g.N_sh
        self._sat_lo = None if saturation is None else saturation.lower * saturation.u_nominal
        self._sat_hi = None if saturation is None else saturation.upper * saturation.u_nominal

    def pack(self, q_ch, q_pr, v_sh, v_sc, x_ch, x_a, x_b) -> np.ndarray:
        return np.concatenate([q_ch, q_pr, v_sh, v_sc, x_ch, x_a, x_b]).astype(float)

    def controls(self, t: float, y: np.ndarray, sp: Setpoints):
        """Applied inputs and controller derivatives at one state."""
        q_ch = y[self.sl_q_ch]
        q_pr = y[self.sl_q_pr]
        v_sh = y[self.sl_v_sh]
        xi_ch = ChordMeasurements(q_ch=q_ch, q_ch_star=sp.q_ch_star)
        xi_pr = ProducerMeasurements(
            q_pr=q_pr,
            V_sh=v_sh,
            tank_outlet_flow=self.model.tank_outlet_flows(q_ch),
            J_pr=self.model.J_pr,
            V_sh_star=sp.v_sh_star,
        )
        u_ch, dx_ch = pi_flow_control(xi_ch, y[self.sl_x_ch], self.flow_gains)
        u_pr_raw, dx_a, dx_b = adaptive_volume_control(
            xi_pr, y[self.sl_x_a], y[self.sl_x_b], self.volume_gains
        )
        u_pr = u_pr_raw if self.saturation is None else saturate_u_pr(u_pr_raw, self.saturation)
        return u_ch, u_pr, u_pr_raw, dx_ch, dx_a, dx_b

    def rhs(self, t: float, y: np.ndarray, sp: Setpoints) -> np.ndarray:
        """Closed-loop vector field, integration-rate path.

        Same formulas and evaluation order as the public controller and plant
        functions (see :meth:`rhs_reference`), with constants precomputed.
        """
        q_ch = y[self.sl_q_ch]
        q_pr = y[self.sl_q_pr]
        v_sh = y[self.sl_v_sh]
        x_a = y[self.sl_x_a]

        if v_sh.min() < 0.0 or (v_sh > self._cap).any():
            i = int(np.flatnonzero((v_sh < 0.0) | (v_sh > self._cap))[0])
            tid = self.model.graph.tank_ids[i]
            raise InfeasibleStateError(
                f"tank {tid}: hot-layer volume {v_sh[i]:.6g} m^3 outside "
                f"[0, {self._cap[i]:.6g}] at t={t:.6g} s",
                tank_id=tid,
            )

        err = q_ch - sp.q_ch_star
        u_ch = -self.flow_gains.N_ch * err + y[self.sl_x_ch]
        v_err = v_sh - sp.v_sh_star
        n_sh = self.volume_gains.N_sh
        z = q_pr - x_a + n_sh * v_err
        # Regressor at the flow reconstructed from z, as the controller defines it.
        q_rec = z + x_a - n_sh * v_err
        w = np.abs(q_rec) * q_rec
        outlet = self._B @ q_ch
        u_pr = (
            w * y[self.sl_x_b]
            - self._c_verr * v_err
            - self._c_z * z
            + self._c_out * (outlet - x_a)
        )
        if self._sat_lo is not None:
            u_pr = np.minimum(np.maximum(u_pr, self._sat_lo), self._sat_hi)

        gq = q_ch @ self._G
        f_ch = -(np.abs(q_ch) * q_ch) * self._th_ch - (np.abs(gq) * gq) @ self._Gth_T
        rhs_ch, _ = self._potrs(self._chol, f_ch + u_ch, lower=True)

        dy = np.empty(self.n_state)
        if self.pin_chords:
            dy[self.sl_q_ch] = 0.0
            dy[self.sl_x_ch] = 0.0
        else:
            dy[self.sl_q_ch] = rhs_ch
            dy[self.sl_x_ch] = -self.flow_gains.M_ch * err
        dy[self.sl_q_pr] = (-self._th_pr * (np.abs(q_pr) * q_pr) + u_pr) / self._J_pr
        dv = q_pr - outlet
        dy[self.sl_v_sh] = dv
        dy[self.sl_v_sc] = -dv
        dy[self.sl_x_a] = -self.volume_gains.M_a * v_err
        dy[self.sl_x_b] = -self.volume_gains.M_b * w * z
        return dy

    def rhs_reference(self, t: float, y: np.ndarray, sp: Setpoints) -> np.ndarray:
        """Vector field composed from the public control and plant operations.

        The oracle for :meth:`rhs`; kept out of the integration loop.
        """
        u_ch, u_pr, _, dx_ch, dx_a, dx_b = self.controls(t, y, sp)
        state = PlantState(
            q_ch=y[self.sl_q_ch],
            q_pr=y[self.sl_q_pr],
            V_sh=y[self.sl_v_sh],
            V_sc=y[self.sl_v_sc],
            t=t,
        )
        dq_ch, dq_pr, dv_sh, dv_sc = open_loop_rhs(self.model, state, u_ch, u_pr)
        dy = np.empty(self.n_state)
        if self.pin_chords:
            dy[self.sl_q_ch] = 0.0
            dy[self.sl_x_ch] = 0.0
        else:
            dy[self.sl_q_ch] = dq_ch
            dy[self.sl_x_ch] = dx_ch
        dy[self.sl_q_pr] = dq_pr
        dy[self.sl_v_sh] = dv_sh
        dy[self.sl_v_sc] = dv_sc
        dy[self.sl_x_a] = dx_a
        dy[self.sl_x_b] = dx_b
        return dy


def step(loop: ClosedLoop, t: float, y: np.ndarray, sp: Setpoints, dt: float) -> np.ndarray:
    """One classical RK4 step with setpoints held constant across the stages."""
    k1 = loop.rhs(t, y, sp)
    k2 = loop.rhs(t + 0.5 * dt, y + (0.5 * dt) * k1, sp)
    k3 = loop.rhs(t + 0.5 * dt, y + (0.5 * dt) * k2, sp)
    k4 = loop.rhs(t + dt, y + dt * k3, sp)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _snap_events(schedule: Schedule, cfg: IntegratorConfig) -> list[tuple[int, ScheduleEvent]]:
    """Events mapped to step indices; warns when snapping moves an event."""
    out = []
    for ev in schedule.events:
        k = int(round(ev.t / cfg.dt))
        if abs(k * cfg.dt - ev.t) > 1e-9 * max(1.0, abs(ev.t)):
            logger.warning(
                "schedule event at t=%g s does not lie on the dt=%g grid; snapping to %g s",
                ev.t,
                cfg.dt,
                k * cfg.dt,
            )
        if k > cfg.n_steps:
            raise ScenarioError(f"schedule event at t={ev.t} s lies beyond t_end")
        out.append((k, ev))
    if any(b <= a for (a, _), (b, _) in zip(out[:-1], out[1:])):
        raise ScenarioError("schedule events collide after snapping to the step grid")
    return out


def run_closed_loop(
    loop: ClosedLoop,
    schedule: Schedule,
    cfg: IntegratorConfig,
    y0: np.ndarray,
) -> Trajectory:
    """Integrate [0, t_end], applying events at their steps and recording samples.

    On a physical-infeasibility error the partial trajectory is returned with
    its ``error`` field set.
    """
    model = loop.model
    events = _snap_events(schedule, cfg)
    n_steps = cfg.n_steps
    sample_steps = list(range(0, n_steps, cfg.decimation))
    if sample_steps[-1] != n_steps:
        sample_steps.append(n_steps)
    n_samples = len(sample_steps)

    n_ch, n_pr, n_st = model.n_ch, model.n_pr, model.n_st
    rec = Trajectory(
        t=np.empty(n_samples),
        q_ch=np.empty((n_samples, n_ch)),
        q_pr=np.empty((n_samples, n_pr)),
        V_sh=np.empty((n_samples, n_st)),
        V_sc=np.empty((n_samples, n_st)),
        x_ch=np.empty((n_samples, n_ch)),
        x_a=np.empty((n_samples, n_pr)),
        x_b=np.empty((n_samples, n_pr)),
        u_ch=np.empty((n_samples, n_ch)),
        u_pr=np.empty((n_samples, n_pr)),
        S_ch=np.empty(n_samples),
        H_tilde=np.empty(n_samples),
        sat_active=np.zeros(n_samples, dtype=np.int64),
        q_star=np.empty((n_samples, n_ch)),
        V_star=np.empty((n_samples, n_st)),
        event_times=tuple(k * cfg.dt for k, _ in events),
        dt=cfg.dt,
        decimation=cfg.decimation,
    )

    y = y0.copy()
    sp = schedule.initial
    ev_ptr = 0
    sat_steps = 0
    wall0 = time.perf_counter()
    written = 0

    def record(i: int, k: int):
        t = k * cfg.dt
        u_ch, u_pr, u_pr_raw, *_ = loop.controls(t, y, sp)
        rec.t[i] = t
        rec.q_ch[i] = y[loop.sl_q_ch]
        rec.q_pr[i] = y[loop.sl_q_pr]
        rec.V_sh[i] = y[loop.sl_v_sh]
        rec.V_sc[i] = y[loop.sl_v_sc]
        rec.x_ch[i] = y[loop.sl_x_ch]
        rec.x_a[i] = y[loop.sl_x_a]
        rec.x_b[i] = y[loop.sl_x_b]
        rec.u_ch[i] = u_ch
        rec.u_pr[i] = u_pr
        rec.sat_active[i] = int(np.any(u_pr != u_pr_raw))
        rec.q_star[i] = sp.q_ch_star
        rec.V_star[i] = sp.v_sh_star
        rec.S_ch[i] = storage_S_ch(model, loop.flow_gains, rec.q_ch[i], rec.x_ch[i], sp.q_ch_star)
        z = z_transform(
            ProducerMeasurements(
                q_pr=rec.q_pr[i],
                V_sh=rec.V_sh[i],
                tank_outlet_flow=rec.q_pr[i],  # unused by the transform
                J_pr=model.J_pr,
                V_sh_star=sp.v_sh_star,
            ),
            rec.x_a[i],
            loop.volume_gains,
        )
        rec.H_tilde[i] = hamiltonian_Htilde(
            model, loop.volume_gains, z, rec.V_sh[i], rec.x_a[i], rec.x_b[i],
            sp.q_ch_star, sp.v_sh_star,
        )

    try:
        sample_set = {k: i for i, k in enumerate(sample_steps)}
        for k in range(n_steps + 1):
            while ev_ptr < len(events) and events[ev_ptr][0] == k:
                sp = apply_event(sp, events[ev_ptr][1])
                if loop.pin_chords:
                    y[loop.sl_q_ch] = sp.q_ch_star
                ev_ptr += 1
            if k in sample_set:
                record(sample_set[k], k)
                written = sample_set[k] + 1
            if k == n_steps:
                break
            y = step(loop, k * cfg.dt, y, sp, cfg.dt)
    except InfeasibleStateError as exc:
        logger.error("simulation aborted: %s", exc)
        return _truncate(rec, written, str(exc))

    sat_duty = float(rec.sat_active.mean()) if n_samples else 0.0
    rec.diagnostics["saturation_duty"] = sat_duty
    rec.diagnostics["wall_time_s"] = time.perf_counter() - wall0
    if sat_duty > 0.10:
        rec.diagnostics["windup_warning"] = (
            f"producer saturation active on {sat_duty:.0%} of samples; integrator "
            "windup possible (no anti-windup is applied)"
        )
        logger.warning(rec.diagnostics["windup_warning"])
    idle = np.flatnonzero(np.abs(rec.q_pr[-1]) < 1e-12)
    if idle.size:
        rec.diagnostics["stalled_adaptation"] = [model.graph.tank_ids[i] for i in idle]
    return rec


def _truncate(rec: Trajectory, n: int, error: str) -> Trajectory:
    for name in (
        "t", "q_ch", "q_pr", "V_sh", "V_sc", "x_ch", "x_a", "x_b",
        "u_ch", "u_pr", "S_ch", "H_tilde", "sat_active", "q_star", "V_star",
    ):
        setattr(rec, name, getattr(rec, name)[:n])
    rec.error = error
    return rec


def run_scenario(scenario: "Scenario") -> Trajectory:
    """Build the model, resolve the initial state and integrate the scenario."""
    model = scenario.build_model()
    loop = ClosedLoop(
        model,
        scenario.flow_gains,
        scenario.volume_gains,
        saturation=scenario.saturation,
        pin_chords=scenario.pin_chords,
    )
    y0 = scenario.initial_state(model, loop)
    return run_closed_loop(loop, scenario.schedule, scenario.integrator, y0)
