"""Command-line interface: build, simulate, verify, equilibrium.

The log level is taken from the DHFLOW_LOG environment variable (DEBUG,
INFO, WARNING, ...). All numerical output that lands in files is
deterministic; rerunning a scenario reproduces the CSV byte for byte.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .analysis import compute_equilibrium, convergence_metrics
from .errors import DHFlowError
from .graph import validate_topology
from .scenario import parse_scenario
from .sim import run_scenario
from .trajectory import write_trajectory_csv
from .verify import run_verification

logger = logging.getLogger(__name__)


def _setup_logging():
    level = os.environ.get("DHFLOW_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _cmd_build(args) -> int:
    scenario = parse_scenario(args.scenario)
    model = scenario.build_model()
    report = validate_topology(
        scenario.graph, tank_capacity=scenario.capacity, v_sh0=scenario.v_sh0
    )
    cls = model.classification
    print(f"scenario: {scenario.name}")
    print(
        f"nodes: {scenario.graph.n_nodes}  edges: {scenario.graph.n_edges}  "
        f"consumers: {cls.n_consumers}  producers: {cls.n_producers}  loops: {cls.n_loops}"
    )
    print(f"n_ch = {model.n_ch}  n_pr = {model.n_pr}  n_ST = {model.n_st}")
    print(f"chord edges: {list(cls.chord_edges)}")
    print(f"producer edges: {list(cls.producer_edges)}")
    print(f"B =\n{model.B}")
    print(f"J_pr diag = {model.J_pr}")
    print(f"validation: {'pass' if report.passed else 'FAIL'}")
    for v in report.violations:
        print(f"  violation: {v}")
    for w in report.warnings:
        print(f"  note: {w}")
    if args.json:
        payload = {
            "name": scenario.name,
            "n_ch": model.n_ch,
            "n_pr": model.n_pr,
            "n_st": model.n_st,
            "loops": cls.n_loops,
            "chord_edges": list(cls.chord_edges),
            "producer_edges": list(cls.producer_edges),
            "edge_order": list(model.loop.edge_order),
            "F": model.loop.F.tolist(),
            "B": model.B.tolist(),
            "J_ch": model.J_ch.tolist(),
            "J_pr": model.J_pr.tolist(),
            "theta_producer": model.theta_producer.tolist(),
            "validation": {
                "passed": report.passed,
                "violations": list(report.violations),
                "warnings": list(report.warnings),
            },
        }
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {args.json}")
    return 0 if report.passed else 1


def _simulate_one(scenario_path: str, out_path: str) -> str:
    scenario = parse_scenario(scenario_path)
    traj = run_scenario(scenario)
    write_trajectory_csv(traj, out_path)
    status = "aborted: " + traj.error if traj.error else "ok"
    return f"{scenario.name}: {traj.n_samples} samples -> {out_path} ({status})"


def _cmd_simulate(args) -> int:
    paths = args.scenario
    if len(paths) == 1 and not os.path.isdir(args.output):
        print(_simulate_one(paths[0], args.output))
        return 0
    os.makedirs(args.output, exist_ok=True)
    jobs = []
    for p in paths:
        name = os.path.splitext(os.path.basename(p))[0]
        jobs.append((p, os.path.join(args.output, f"{name}.csv")))
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            for line in pool.map(_simulate_one, *zip(*jobs)):
                print(line)
    else:
        for p, o in jobs:
            print(_simulate_one(p, o))
    return 0


def _cmd_verify(args) -> int:
    scenario = parse_scenario(args.scenario)
    result = run_verification(scenario)
    width = max(len(c.name) for c in result.checks)
    for c in result.checks:
        mark = "PASS" if c.passed else "FAIL"
        print(f"[{mark}] {c.name:<{width}}  value={c.value:.3e}  tol={c.tolerance:.3e}  {c.detail}")
    print(f"verify: {'all checks passed' if result.passed else 'FAILURES PRESENT'}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result.to_dict(), fh, indent=2)
        print(f"wrote {args.json}")
    return 0 if result.passed else 1


def _cmd_equilibrium(args) -> int:
    scenario = parse_scenario(args.scenario)
    model = scenario.build_model()
    sp = scenario.schedule.initial
    eq = compute_equilibrium(model, sp.q_ch_star, sp.v_sh_star)
    np.set_printoptions(precision=6, suppress=False)
    print(f"q_ch*  = {sp.q_ch_star}")
    print(f"q_ch   = {eq.q_ch}")
    print(f"x_ch   = {eq.x_ch}")
    print(f"q_pr   = {eq.q_pr}")
    print(f"V_sh   = {eq.V_sh}")
    print(f"x_a    = {eq.x_a}")
    print(f"x_b(=theta) = {eq.x_b}")
    if eq.infeasible_producers:
        print(
            f"warning: producers of tanks {list(eq.infeasible_producers)} are not in "
            "operation (zero equilibrium flow); their estimates need not converge"
        )
    if args.json:
        payload = {
            "q_ch": eq.q_ch.tolist(),
            "x_ch": eq.x_ch.tolist(),
            "q_pr": eq.q_pr.tolist(),
            "V_sh": eq.V_sh.tolist(),
            "x_a": eq.x_a.tolist(),
            "x_b": eq.x_b.tolist(),
            "infeasible_producers": list(eq.infeasible_producers),
        }
        with open(args.json, "w") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {args.json}")
    return 0


def _cmd_metrics(args) -> int:
    scenario = parse_scenario(args.scenario)
    model = scenario.build_model()
    traj = run_scenario(scenario)
    rep = convergence_metrics(traj, model)
    for s in rep.segments:
        q_s = "unsettled" if s.q_settle_s is None else f"{s.q_settle_s:.0f} s"
        v_s = "unsettled" if s.v_settle_s is None else f"{s.v_settle_s:.0f} s"
        print(
            f"segment [{s.t_start / 3600:.1f} h, {s.t_end / 3600:.1f} h): "
            f"q settle {q_s}, V settle {v_s}, overshoot {s.q_overshoot:.2%}"
        )
    print(f"terminal |q - q*|  = {rep.terminal_q_err:.3e} m^3/s")
    print(f"terminal |V - V*|  = {rep.terminal_v_err:.3e} m^3")
    print(f"terminal |x_b - theta|/|theta| = {rep.theta_rel_err:.3e}")
    print(f"producers in operation: {list(rep.producer_feasible)}")
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(
        prog="dhflow",
        description="District heating hydraulic simulation with decentralized adaptive control",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build", help="build the reduced model and print F, B, J blocks")
    p.add_argument("scenario")
    p.add_argument("--json", help="write the build artifacts to a JSON file")
    p.set_defaults(func=_cmd_build)

    p = sub.add_parser("simulate", help="run scenario(s) and write trajectory CSV")
    p.add_argument("scenario", nargs="+")
    p.add_argument("-o", "--output", required=True, help="output CSV file or directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel scenarios (batch mode)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("verify", help="run the invariant suite; exit 0 iff all pass")
    p.add_argument("scenario")
    p.add_argument("--json", help="write the machine-readable check list to a JSON file")
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("equilibrium", help="print the closed-loop equilibrium")
    p.add_argument("scenario")
    p.add_argument("--json", help="write the equilibrium to a JSON file")
    p.set_defaults(func=_cmd_equilibrium)

    p = sub.add_parser("metrics", help="simulate and print convergence metrics")
    p.add_argument("scenario")
    p.set_defaults(func=_cmd_metrics)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DHFlowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
