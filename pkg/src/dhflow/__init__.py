"""Hydraulic simulation and decentralized adaptive control of district heating networks.

The package models a multi-producer district heating network as a directed
graph, reduces its differential-algebraic hydraulics to an ODE in the
independent chord and producer flows, closes the loop with a decentralized PI
flow controller and an adaptive backstepping storage-volume controller, and
verifies the structural, conservation and stability properties numerically.
"""

from .analysis import (
    ConvergenceReport,
    EquilibriumPoint,
    compute_equilibrium,
    convergence_metrics,
    hamiltonian_Htilde,
    loop_law_residual,
    storage_S_ch,
)
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
from .errors import (
    DHFlowError,
    InfeasibleStateError,
    NumericsError,
    ScenarioError,
    TopologyError,
)
from .graph import (
    Edge,
    EdgeClassification,
    LoopMatrix,
    NetworkGraph,
    Node,
    build_incidence,
    classify_edges,
    extract_B,
    fundamental_loop_matrix,
    validate_topology,
)
from .hydraulics import (
    FluidProps,
    PipeGeometry,
    colebrook_friction,
    edge_pressure_loss,
    generic_friction_map,
    reduced_friction_maps,
    reynolds,
    theta_from_geometry,
)
from .reduced import (
    PlantState,
    ReducedModel,
    assemble_inertia,
    build_reduced_model,
    disturbance_psi,
    open_loop_rhs,
    regressor_W,
)
from .scenario import (
    Scenario,
    parse_scenario,
    scenario_from_dict,
    synthesize_network,
)
from .sim import (
    ClosedLoop,
    IntegratorConfig,
    Schedule,
    ScheduleEvent,
    apply_event,
    run_closed_loop,
    run_scenario,
    step,
)
from .trajectory import Trajectory, read_trajectory_csv, write_trajectory_csv
from .verify import run_verification

__version__ = "0.1.0"
