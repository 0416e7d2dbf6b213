"""Decentralized control laws for flow and storage-volume regulation.

Two controllers close the loop. A proportional-integral law drives every
chord flow to its setpoint using only that chord's flow measurement. An
adaptive backstepping law regulates each tank's hot-layer volume while
estimating the producer's unknown friction coefficient online; it sees only
the local producer flow, tank volume, measured tank-outlet flow, its own
inertia and the volume setpoint. All gain matrices are diagonal, so component
i of either control law depends on component i of its measurements alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .hydraulics import signed_square

__all__ = [
    "FlowPIGains",
    "VolumeGains",
    "Saturation",
    "ChordMeasurements",
    "ProducerMeasurements",
    "pi_flow_control",
    "z_transform",
    "adaptive_volume_control",
    "saturate_u_pr",
]


def _positive_diag(name: str, v) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.ndim != 1:
        raise ValueError(f"{name} must be a diagonal (1-D) gain vector")
    if np.any(arr <= 0.0):
        raise ValueError(f"{name} must have strictly positive entries, got {arr}")
    return arr


@dataclass(frozen=True)
class FlowPIGains:
    """Diagonals of the PI gain matrices M_ch (integral) and N_ch (proportional)."""

    M_ch: np.ndarray
    N_ch: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "M_ch", _positive_diag("M_ch", self.M_ch))
        object.__setattr__(self, "N_ch", _positive_diag("N_ch", self.N_ch))
        if self.M_ch.shape != self.N_ch.shape:
            raise ValueError("M_ch and N_ch must have the same dimension")


@dataclass(frozen=True)
class VolumeGains:
    """Diagonals of the volume-controller gains N_pr, N_sh, M_a, M_b."""

    N_pr: np.ndarray
    N_sh: np.ndarray
    M_a: np.ndarray
    M_b: np.ndarray

    def __post_init__(self):
        for name in ("N_pr", "N_sh", "M_a", "M_b"):
            object.__setattr__(self, name, _positive_diag(name, getattr(self, name)))
        shapes = {getattr(self, n).shape for n in ("N_pr", "N_sh", "M_a", "M_b")}
        if len(shapes) != 1:
            raise ValueError("volume gain vectors must share one dimension")


@dataclass(frozen=True)
class Saturation:
    """Producer pump clipping band as fractions of the nominal pressure.

    ``u_nominal`` is the equilibrium pump pressure at maximum consumer
    demand; applied inputs are clamped to [lower, upper] times it.
    """

    u_nominal: np.ndarray
    lower: float = 0.03
    upper: float = 1.15

    def __post_init__(self):
        object.__setattr__(self, "u_nominal", _positive_diag("u_nominal", self.u_nominal))
        if not (0.0 < self.lower < self.upper):
            raise ValueError(
                f"saturation requires 0 < lower < upper, got ({self.lower}, {self.upper})"
            )


@dataclass(frozen=True)
class ChordMeasurements:
    """Local information of the chord controllers: own flow and its setpoint."""

    q_ch: np.ndarray
    q_ch_star: np.ndarray


@dataclass(frozen=True)
class ProducerMeasurements:
    """Local information of each producer's volume controller.

    ``tank_outlet_flow`` is the measured flow at the tank's hot-layer outlet;
    neither the matrix B nor the chord flows themselves are available.
    """

    q_pr: np.ndarray
    V_sh: np.ndarray
    tank_outlet_flow: np.ndarray
    J_pr: np.ndarray
    V_sh_star: np.ndarray


def pi_flow_control(xi: ChordMeasurements, x_ch: np.ndarray, gains: FlowPIGains):
    """PI chord-flow law: returns (u_ch, x_ch').

    u_ch = -N_ch (q_ch - q_ch*) + x_ch,  x_ch' = -M_ch (q_ch - q_ch*).
    """
    err = np.asarray(xi.q_ch, float) - np.asarray(xi.q_ch_star, float)
    u_ch = -gains.N_ch * err + x_ch
    dx_ch = -gains.M_ch * err
    return u_ch, dx_ch


def z_transform(xi: ProducerMeasurements, x_a: np.ndarray, gains: VolumeGains) -> np.ndarray:
    """Backstepping coordinate z_pr = q_pr - x_a + N_sh (V_sh - V_sh*)."""
    v_err = np.asarray(xi.V_sh, float) - np.asarray(xi.V_sh_star, float)
    return np.asarray(xi.q_pr, float) - x_a + gains.N_sh * v_err


def adaptive_volume_control(
    xi: ProducerMeasurements,
    x_a: np.ndarray,
    x_b: np.ndarray,
    gains: VolumeGains,
):
    """Adaptive backstepping volume law: returns (u_pr, x_a', x_b').

    x_b is the live estimate of the unknown producer friction coefficients;
    it is driven by the regressor evaluated at the flow reconstructed from
    the backstepping coordinate. With z_pr = 0 the adaptation is at rest
    regardless of the current estimate (an idle producer stalls it).
    """
    v_err = np.asarray(xi.V_sh, float) - np.asarray(xi.V_sh_star, float)
    j_pr = np.asarray(xi.J_pr, float)
    z = z_transform(xi, x_a, gains)
    # Regressor at q_pr = z + x_a - N_sh (V_sh - V_sh*), the measured flow.
    w = signed_square(z + x_a - gains.N_sh * v_err)

    u_pr = (
        w * x_b
        - (j_pr * (gains.M_a - gains.N_sh**2) + 1.0) * v_err
        - (j_pr * gains.N_sh + gains.N_pr) * z
        + j_pr * gains.N_sh * (np.asarray(xi.tank_outlet_flow, float) - x_a)
    )
    dx_a = -gains.M_a * v_err
    dx_b = -gains.M_b * w * z
    return u_pr, dx_a, dx_b


def saturate_u_pr(u_pr: np.ndarray, sat: Saturation) -> np.ndarray:
    """Clamp producer pump pressures to the configured band.

    A pure output clamp: the controller integrator states keep evolving, so
    sustained saturation winds them up (surfaced as a run diagnostic).
    """
    lo = sat.lower * sat.u_nominal
    hi = sat.upper * sat.u_nominal
    return np.clip(u_pr, lo, hi)
