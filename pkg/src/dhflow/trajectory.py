"""Recorded closed-loop trajectories and their bit-exact CSV form.

The CSV schema is fixed: ``t_s``, the chord flows, producer flows, hot and
cold layer volumes, parameter estimates, applied inputs, the two energy
diagnostics and the saturation flag, printed with 17 significant digits and
LF line endings so that repeated runs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = ["Trajectory", "csv_header", "write_trajectory_csv", "read_trajectory_csv"]


@dataclass
class Trajectory:
    """Uniformly sampled closed-loop run.

    Plant and controller states are kept in full (including ``x_ch`` and
    ``x_a``, which the CSV schema omits) together with the active setpoints
    at each sample and run-level diagnostics.
    """

    t: np.ndarray
    q_ch: np.ndarray
    q_pr: np.ndarray
    V_sh: np.ndarray
    V_sc: np.ndarray
    x_ch: np.ndarray
    x_a: np.ndarray
    x_b: np.ndarray
    u_ch: np.ndarray
    u_pr: np.ndarray
    S_ch: np.ndarray
    H_tilde: np.ndarray
    sat_active: np.ndarray
    q_star: np.ndarray
    V_star: np.ndarray
    event_times: tuple[float, ...] = ()
    dt: float = 0.0
    decimation: int = 1
    diagnostics: dict = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def n_samples(self) -> int:
        return len(self.t)

    @property
    def n_ch(self) -> int:
        return self.q_ch.shape[1]

    @property
    def n_pr(self) -> int:
        return self.q_pr.shape[1]

    @property
    def n_st(self) -> int:
        return self.V_sh.shape[1]

    def segment_slices(self) -> list[tuple[float, float, slice]]:
        """(t_start, t_end, sample slice) for each inter-event window."""
        bounds = sorted({0.0, *self.event_times, float(self.t[-1])})
        out = []
        for a, b in zip(bounds[:-1], bounds[1:]):
            idx = np.flatnonzero((self.t >= a) & (self.t < b))
            if a == bounds[-2]:
                idx = np.flatnonzero(self.t >= a)
            if len(idx):
                out.append((a, b, slice(idx[0], idx[-1] + 1)))
        return out


def csv_header(n_ch: int, n_pr: int, n_st: int) -> list[str]:
    cols = ["t_s"]
    cols += [f"q_ch_{i + 1}" for i in range(n_ch)]
    cols += [f"q_pr_{i + 1}" for i in range(n_pr)]
    cols += [f"V_sh_{i + 1}" for i in range(n_st)]
    cols += [f"V_sc_{i + 1}" for i in range(n_st)]
    cols += [f"x_b_{i + 1}" for i in range(n_pr)]
    cols += [f"u_ch_{i + 1}" for i in range(n_ch)]
    cols += [f"u_pr_{i + 1}" for i in range(n_pr)]
    cols += ["S_ch", "H_tilde", "sat_active"]
    return cols


def _fmt(x: float) -> str:
    return f"{x:.16e}"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """Write the trajectory in the fixed column order, deterministically."""
    if traj.n_samples == 0:
        raise ValueError("refusing to write an empty trajectory")
    header = csv_header(traj.n_ch, traj.n_pr, traj.n_st)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for k in range(traj.n_samples):
            row = [_fmt(traj.t[k])]
            row += [_fmt(v) for v in traj.q_ch[k]]
            row += [_fmt(v) for v in traj.q_pr[k]]
            row += [_fmt(v) for v in traj.V_sh[k]]
            row += [_fmt(v) for v in traj.V_sc[k]]
            row += [_fmt(v) for v in traj.x_b[k]]
            row += [_fmt(v) for v in traj.u_ch[k]]
            row += [_fmt(v) for v in traj.u_pr[k]]
            row += [_fmt(traj.S_ch[k]), _fmt(traj.H_tilde[k]), str(int(traj.sat_active[k]))]
            fh.write(",".join(row) + "\n")


def read_trajectory_csv(path) -> dict[str, np.ndarray]:
    """Read a trajectory CSV back into a column-name -> array mapping."""
    with open(path, "r", newline="") as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    data = np.array(rows, dtype=float)
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ValueError(f"malformed trajectory CSV {path}")
    return {name: data[:, j] for j, name in enumerate(header)}
