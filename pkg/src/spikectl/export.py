"""CSV writers for value grids, trajectories and evaluation reports.

Floats are written with 17 significant digits so that files round-trip
exactly and diff cleanly between runs.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .hjb import ValueGrid
from .sim import Trajectory

VALUE_HEADER = ("t", "y", "z", "n", "v", "gamma")
TRAJECTORY_HEADER = ("t", "y", "gamma", "n", "z", "post_mean", "post_var")
FLOAT_FMT = "%.17g"


def _write(path, header, columns, fmts) -> None:
    cols = [np.asarray(c).ravel() for c in columns]
    fmt = ",".join(fmts)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        if cols and cols[0].size:
            np.savetxt(fh, np.column_stack(cols).astype(object), fmt=fmt)


def write_value_csv(vg: ValueGrid, path, every: int = 1) -> None:
    """Rows ``t,y,z,n,v,gamma`` over every ``every``-th stored time slice, row-major."""
    g = vg.grid
    ks = np.arange(0, len(vg.times), every)
    if ks[-1] != len(vg.times) - 1:
        ks = np.append(ks, len(vg.times) - 1)
    T, Y, Z, N = np.meshgrid(vg.times[ks], g.y, g.z, np.arange(g.n_max + 1), indexing="ij")
    f = FLOAT_FMT
    _write(path, VALUE_HEADER, [T, Y, Z, N, vg.values[ks], vg.policy[ks]], [f, f, f, "%d", f, f])


def read_value_csv(path) -> np.ndarray:
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    f = FLOAT_FMT
    _write(path, TRAJECTORY_HEADER,
           [traj.times, traj.y_path, traj.gamma_path, traj.n_path, traj.z_path,
            traj.post_mean, traj.post_var],
           [f, f, f, "%d", f, f, f])


def write_jumps_csv(traj: Trajectory, path) -> None:
    _write(path, ("tau",), [traj.jump_times], [FLOAT_FMT])


def write_rows_csv(rows: list[dict], path) -> None:
    if not rows:
        Path(path).write_text("")
        return
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})


def write_report(items: dict, path) -> None:
    """Plain ``key = value`` lines."""
    lines = [f"{k} = {v!r}" if isinstance(v, float) else f"{k} = {v}" for k, v in items.items()]
    Path(path).write_text("\n".join(lines) + "\n")
