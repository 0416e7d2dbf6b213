"""Scenario-level invariant suite backing the ``verify`` subcommand.

Runs the structural, friction, equilibrium and trajectory invariants on one
scenario and collects machine-readable pass/fail records. The trajectory
checks integrate the scenario as configured.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import compute_equilibrium, loop_law_residual
from .graph import validate_topology
from .hydraulics import generic_friction_map, reduced_friction_maps
from .scenario import Scenario
from .sim import ClosedLoop, run_closed_loop

__all__ = ["Check", "VerificationResult", "run_verification"]

S_CH_DECAY_SLACK = 1e-9
H_DECAY_SLACK = 1e-9
LOOP_LAW_TOL = 1e-9
EQUILIBRIUM_TOL = 1e-10
FRICTION_RTOL = 1e-12
CONSERVATION_REL_TOL = 1e-6


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""


@dataclass
class VerificationResult:
    scenario: str
    checks: list[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "passed": bool(self.passed),
            "checks": [
                {
                    "name": c.name,
                    "passed": bool(c.passed),
                    "value": float(c.value),
                    "tolerance": float(c.tolerance),
                    "detail": c.detail,
                }
                for c in self.checks
            ],
        }


def run_verification(scenario: Scenario, rng_seed: int = 0) -> VerificationResult:
    checks: list[Check] = []
    rng = np.random.default_rng(rng_seed)

    report = validate_topology(
        scenario.graph, tank_capacity=scenario.capacity, v_sh0=scenario.v_sh0
    )
    checks.append(
        Check(
            name="topology",
            passed=report.passed,
            value=float(len(report.violations)),
            tolerance=0.0,
            detail="; ".join(report.violations) or "all structural assumptions hold",
        )
    )

    model = scenario.build_model()
    lm = model.loop

    from .graph import incidence_in_loop_order

    b0 = incidence_in_loop_order(scenario.graph, lm)
    junction_rows = [
        i
        for i, nid in enumerate(scenario.graph.node_ids)
        if scenario.graph.node_by_id[nid].kind == "junction"
    ]
    resid = int(np.abs(b0[junction_rows] @ lm.F.T).max()) if junction_rows else 0
    checks.append(
        Check(
            name="junction_mass_balance",
            passed=resid == 0,
            value=float(resid),
            tolerance=0.0,
            detail="B0(junctions) F^T = 0 in integer arithmetic",
        )
    )

    rank = int(np.linalg.matrix_rank(lm.F.astype(float)))
    checks.append(
        Check(
            name="loop_matrix_rank",
            passed=rank == lm.n_ch + lm.n_pr,
            value=float(rank),
            tolerance=float(lm.n_ch + lm.n_pr),
            detail=f"rank(F) = {rank}, rows = {lm.n_ch + lm.n_pr}",
        )
    )

    eig_min = float(np.linalg.eigvalsh(model.J_ch).min())
    checks.append(
        Check(
            name="chord_inertia_spd",
            passed=eig_min > 0.0,
            value=eig_min,
            tolerance=0.0,
            detail="smallest eigenvalue of J_ch",
        )
    )

    # Closed-form vs generic friction map on random flows.
    q_ch = rng.uniform(-0.5, 0.5, size=(256, lm.n_ch))
    q_pr = rng.uniform(-0.5, 0.5, size=(256, lm.n_pr))
    fc1, fp1 = reduced_friction_maps(lm, model.theta_edge, q_ch, q_pr)
    fc2, fp2 = generic_friction_map(lm, model.theta_edge, q_ch, q_pr)
    scale = max(np.abs(fc2).max(), np.abs(fp2).max(), 1.0)
    err = max(np.abs(fc1 - fc2).max(), np.abs(fp1 - fp2).max()) / scale
    checks.append(
        Check(
            name="friction_closed_form",
            passed=err < FRICTION_RTOL,
            value=float(err),
            tolerance=FRICTION_RTOL,
            detail="closed-form vs -F f_E(F^T q), relative",
        )
    )

    sp0 = scenario.schedule.initial
    eq = compute_equilibrium(model, sp0.q_ch_star, sp0.v_sh_star)
    loop = ClosedLoop(
        model,
        scenario.flow_gains,
        scenario.volume_gains,
        saturation=scenario.saturation,
        pin_chords=scenario.pin_chords,
    )
    y_eq = loop.pack(
        eq.q_ch, eq.q_pr, eq.V_sh, model.capacity - eq.V_sh, eq.x_ch, eq.x_a, eq.x_b
    )
    eq_norm = float(np.abs(loop.rhs(0.0, y_eq, sp0)).max())
    checks.append(
        Check(
            name="equilibrium_zeroes_rhs",
            passed=eq_norm < EQUILIBRIUM_TOL,
            value=eq_norm,
            tolerance=EQUILIBRIUM_TOL,
            detail=(
                "producers out of operation: "
                + (str(list(eq.infeasible_producers)) if eq.infeasible_producers else "none")
            ),
        )
    )

    # Trajectory invariants on the configured run.
    y0 = scenario.initial_state(model, loop)
    traj = run_closed_loop(loop, scenario.schedule, scenario.integrator, y0)
    if traj.error:
        checks.append(
            Check(
                name="simulation_completes",
                passed=False,
                value=float("nan"),
                tolerance=0.0,
                detail=traj.error,
            )
        )
        return VerificationResult(scenario=scenario.name, checks=checks)

    cons = float(np.abs(traj.V_sh + traj.V_sc - model.capacity).max())
    cons_tol = CONSERVATION_REL_TOL * float(model.capacity.max())
    checks.append(
        Check(
            name="tank_conservation",
            passed=cons < cons_tol,
            value=cons,
            tolerance=cons_tol,
            detail="max |V_sh + V_sc - capacity| over all samples",
        )
    )

    worst_rise = -np.inf
    for _, _, sl in traj.segment_slices():
        s = traj.S_ch[sl]
        if len(s) > 1:
            worst_rise = max(worst_rise, float(np.diff(s).max()))
    checks.append(
        Check(
            name="S_ch_nonincreasing",
            passed=worst_rise <= S_CH_DECAY_SLACK,
            value=worst_rise,
            tolerance=S_CH_DECAY_SLACK,
            detail="largest sampled increase between schedule events",
        )
    )

    if scenario.pin_chords:
        worst_h = -np.inf
        for _, _, sl in traj.segment_slices():
            h = traj.H_tilde[sl]
            if len(h) > 1:
                worst_h = max(worst_h, float(np.diff(h).max()))
        checks.append(
            Check(
                name="H_tilde_nonincreasing",
                passed=worst_h <= H_DECAY_SLACK,
                value=worst_h,
                tolerance=H_DECAY_SLACK,
                detail="chord flows pinned (Psi = 0)",
            )
        )

    worst_loop = 0.0
    for k in range(traj.n_samples):
        worst_loop = max(
            worst_loop,
            loop_law_residual(model, traj.q_ch[k], traj.q_pr[k], traj.u_ch[k], traj.u_pr[k]),
        )
    checks.append(
        Check(
            name="pressure_loop_law",
            passed=worst_loop < LOOP_LAW_TOL,
            value=worst_loop,
            tolerance=LOOP_LAW_TOL,
            detail="max |F dP_E| over all recorded samples, Pa",
        )
    )

    return VerificationResult(scenario=scenario.name, checks=checks)
