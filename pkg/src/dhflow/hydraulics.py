"""Friction and pressure-drop physics for pipes and valves.

Pressure losses follow the quadratic law ``theta * |q| * q`` (Darcy-Weisbach
form). For pipes the coefficient ``theta`` is derived from geometry through
the Colebrook friction factor; for valves it is given directly; pumps have
``theta = 0``. The reduced friction maps express the per-edge losses in the
independent chord/producer flow coordinates of the loop matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericsError

__all__ = [
    "PipeGeometry",
    "FluidProps",
    "reynolds",
    "colebrook_friction",
    "theta_from_geometry",
    "edge_pressure_loss",
    "signed_square",
    "reduced_friction_maps",
    "generic_friction_map",
]


@dataclass(frozen=True)
class PipeGeometry:
    """Cylindrical pipe geometry; lengths in m, roughness absolute in m."""

    length: float
    diameter: float
    roughness: float = 0.0

    def __post_init__(self):
        if self.length <= 0.0:
            raise ValueError(f"pipe length must be > 0, got {self.length}")
        if self.diameter <= 0.0:
            raise ValueError(f"pipe diameter must be > 0, got {self.diameter}")
        if self.roughness < 0.0:
            raise ValueError(f"pipe roughness must be >= 0, got {self.roughness}")


@dataclass(frozen=True)
class FluidProps:
    """Water properties used for Reynolds/friction evaluation.

    ``nominal_flow`` is the per-edge flow magnitude at which the Reynolds
    number is evaluated once and then held constant.
    """

    density: float = 983.0
    viscosity: float = 4.67e-4
    nominal_flow: float = 0.1

    def __post_init__(self):
        if self.density <= 0.0:
            raise ValueError(f"fluid density must be > 0, got {self.density}")
        if self.viscosity <= 0.0:
            raise ValueError(f"fluid viscosity must be > 0, got {self.viscosity}")


def reynolds(q_nominal: float, geom: PipeGeometry, fluid: FluidProps) -> float:
    """Reynolds number at the nominal operating flow.

    Computed as ``rho * |q| / ((pi * d / 4) * nu)`` and treated as constant
    thereafter. A zero nominal flow leaves the friction factor undefined and
    is rejected.
    """
    if q_nominal == 0.0:
        raise NumericsError("Reynolds number undefined at zero nominal flow")
    return fluid.density * abs(q_nominal) / ((math.pi * geom.diameter / 4.0) * fluid.viscosity)


def _swamee_jain(rel_roughness: float, re: float) -> float:
    """Explicit approximation of the turbulent friction factor (initial guess)."""
    arg = rel_roughness / 3.7 + 5.74 / re**0.9
    return 0.25 / math.log10(arg) ** 2


def colebrook_residual(k: float, rel_roughness: float, re: float) -> float:
    """Residual of the Colebrook equation at friction factor ``k``."""
    return 1.0 / math.sqrt(k) + 2.0 * math.log10(rel_roughness / 3.7 + 2.51 / (re * math.sqrt(k)))


def colebrook_friction(
    rel_roughness: float,
    re: float,
    tol: float = 1e-13,
    max_iter: int = 100,
    damping: float = 1.0,
) -> float:
    """Solve the implicit Colebrook equation for the friction factor ``k``.

    Damped fixed-point iteration on ``x = 1/sqrt(k)``; the Swamee-Jain
    closed form provides the initial guess. Iteration stops once the update
    is below ``tol``; the returned factor satisfies the Colebrook equation
    with residual below 1e-12.
    """
    if re <= 0.0:
        raise NumericsError(f"Colebrook equation requires Re > 0, got {re}")
    if rel_roughness < 0.0:
        raise NumericsError(f"relative roughness must be >= 0, got {rel_roughness}")

    x = 1.0 / math.sqrt(_swamee_jain(rel_roughness, re))
    history = []
    for _ in range(max_iter):
        g = -2.0 * math.log10(rel_roughness / 3.7 + 2.51 * x / re)
        step = g - x
        x = x + damping * step
        history.append(x)
        if abs(step) < tol * max(1.0, abs(x)):
            k = 1.0 / (x * x)
            if abs(colebrook_residual(k, rel_roughness, re)) > 1e-12:
                break
            return k
    raise NumericsError(
        "Colebrook iteration did not converge "
        f"(rel_roughness={rel_roughness}, Re={re}); last iterates {history[-5:]}"
    )


def theta_from_geometry(k: float, geom: PipeGeometry, fluid: FluidProps) -> float:
    """Quadratic-loss coefficient ``theta = k * l * rho / (2 d)`` in Pa s^2/m^6."""
    if k < 0.0:
        raise ValueError(f"friction factor must be >= 0, got {k}")
    return k * geom.length * fluid.density / (2.0 * geom.diameter)


def edge_pressure_loss(theta: float, q):
    """Pressure loss ``theta * |q| * q`` across a single pipe or valve, in Pa."""
    if theta < 0.0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    q = np.asarray(q, dtype=float)
    out = theta * np.abs(q) * q
    return out if out.ndim else float(out)


def signed_square(q: np.ndarray) -> np.ndarray:
    """Elementwise ``|q| * q``, the monotone monomial of the quadratic loss law."""
    return np.abs(q) * q


def reduced_friction_maps(loop_matrix, theta_edge: np.ndarray, q_ch: np.ndarray, q_pr: np.ndarray):
    """Closed-form reduced friction maps in chord/producer coordinates.

    Evaluates, with ``phi(x) = |x| x`` applied elementwise,

        f_ch = -<theta_chord> phi(q_ch) - G <theta_g> phi(G^T q_ch)
        f_pr = -<theta_producer> phi(q_pr) - H <theta_h> phi(H^T q_pr)

    where the ``theta_*`` slices follow the loop-matrix column order. Because
    every H column has a single nonzero entry, ``f_pr`` reduces componentwise
    to ``-(sum of path thetas) |q_pr,i| q_pr,i``: each producer's loss depends
    on its own flow only. Accepts batched inputs with flows on the last axis.
    """
    theta_edge = np.asarray(theta_edge, dtype=float)
    if theta_edge.shape != (loop_matrix.n_edges,):
        raise ValueError(
            f"theta_edge has shape {theta_edge.shape}, expected ({loop_matrix.n_edges},)"
        )
    q_ch = np.asarray(q_ch, dtype=float)
    q_pr = np.asarray(q_pr, dtype=float)
    n_ch, n_pr = loop_matrix.n_ch, loop_matrix.n_pr
    if q_ch.shape[-1] != n_ch or q_pr.shape[-1] != n_pr:
        raise ValueError(
            f"flow shapes {q_ch.shape}, {q_pr.shape} inconsistent with (n_ch={n_ch}, n_pr={n_pr})"
        )

    th_ch = theta_edge[:n_ch]
    th_pr = theta_edge[n_ch : n_ch + n_pr]
    th_g = theta_edge[n_ch + n_pr : n_ch + n_pr + loop_matrix.n_g]
    th_h = theta_edge[n_ch + n_pr + loop_matrix.n_g :]

    g = loop_matrix.G.astype(float)
    h = loop_matrix.H.astype(float)
    f_ch = -signed_square(q_ch) * th_ch - signed_square(q_ch @ g) @ (g * th_g).T
    f_pr = -signed_square(q_pr) * th_pr - signed_square(q_pr @ h) @ (h * th_h).T
    return f_ch, f_pr


def generic_friction_map(loop_matrix, theta_edge: np.ndarray, q_ch: np.ndarray, q_pr: np.ndarray):
    """Brute-force friction maps ``-F f_E(F^T (q_ch, q_pr))``.

    Reconstructs every edge flow, applies the per-edge loss law and projects
    back through the loop matrix. Serves as the independent oracle for
    :func:`reduced_friction_maps`.
    """
    theta_edge = np.asarray(theta_edge, dtype=float)
    if theta_edge.shape != (loop_matrix.n_edges,):
        raise ValueError(
            f"theta_edge has shape {theta_edge.shape}, expected ({loop_matrix.n_edges},)"
        )
    q_ch = np.asarray(q_ch, dtype=float)
    q_pr = np.asarray(q_pr, dtype=float)
    n_ch, n_pr = loop_matrix.n_ch, loop_matrix.n_pr
    if q_ch.shape[-1] != n_ch or q_pr.shape[-1] != n_pr:
        raise ValueError(
            f"flow shapes {q_ch.shape}, {q_pr.shape} inconsistent with (n_ch={n_ch}, n_pr={n_pr})"
        )

    f = loop_matrix.F.astype(float)
    q_ind = np.concatenate([q_ch, q_pr], axis=-1)
    q_edge = q_ind @ f
    f_red = -(signed_square(q_edge) * theta_edge) @ f.T
    return f_red[..., :n_ch], f_red[..., n_ch:]
