"""Serialization: diagnostics CSV, legacy-ASCII VTK snapshots, wall profiles.

Floats are written with shortest round-trip repr so that repeated runs of
the same configuration produce byte-identical files and the VTK reader
recovers bit-identical field values.
"""

from __future__ import annotations

import numpy as np

from .coupler import DiagnosticsRecord
from .grid import ChannelGrid, WallPair


def _fmt(x):
    return repr(float(x))


def write_diagnostics_csv(records, path):
    lines = [",".join(DiagnosticsRecord.COLUMNS)]
    for r in records:
        lines.append(",".join(_fmt(v) for v in r.as_row()))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_diagnostics_csv(path):
    with open(path, encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    return header, np.array(rows)


def write_vtk_structured(path, grid: ChannelGrid, scalars: dict,
                         vectors: dict | None = None, title="nschannel snapshot"):
    """Legacy-ASCII STRUCTURED_GRID snapshot of cell-centered fields."""
    nx, ny = grid.nx, grid.ny
    xs, ys = grid.xc, grid.yc
    lines = ["# vtk DataFile Version 3.0", title, "ASCII",
             "DATASET STRUCTURED_GRID",
             f"DIMENSIONS {nx} {ny} 1",
             f"POINTS {nx * ny} double"]
    for j in range(ny):
        for i in range(nx):
            lines.append(f"{_fmt(xs[i])} {_fmt(ys[j])} 0.0")
    lines.append(f"POINT_DATA {nx * ny}")
    for name, f in scalars.items():
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        for j in range(ny):
            for i in range(nx):
                lines.append(_fmt(f[i, j]))
    for name, (fx, fy) in (vectors or {}).items():
        lines.append(f"VECTORS {name} double")
        for j in range(ny):
            for i in range(nx):
                lines.append(f"{_fmt(fx[i, j])} {_fmt(fy[i, j])} 0.0")
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vtk_structured(path):
    """Read back a snapshot written by write_vtk_structured; returns
    (scalars, vectors) dictionaries of (nx, ny) arrays."""
    with open(path, encoding="ascii") as fh:
        tokens = fh.read().split("\n")
    it = iter(tokens)
    dims = None
    scalars, vectors = {}, {}
    line = next(it)
    while True:
        try:
            if line.startswith("DIMENSIONS"):
                _, sx, sy, _ = line.split()
                dims = (int(sx), int(sy))
                line = next(it)
            elif line.startswith("POINTS"):
                n = int(line.split()[1])
                for _ in range(n):
                    next(it)
                line = next(it)
            elif line.startswith("SCALARS"):
                name = line.split()[1]
                next(it)  # LOOKUP_TABLE
                nx, ny = dims
                vals = np.array([float(next(it)) for _ in range(nx * ny)])
                scalars[name] = vals.reshape(ny, nx).T.copy()
                line = next(it, "")
            elif line.startswith("VECTORS"):
                name = line.split()[1]
                nx, ny = dims
                fx = np.empty(nx * ny)
                fy = np.empty(nx * ny)
                for idx in range(nx * ny):
                    ax, ay, _ = next(it).split()
                    fx[idx], fy[idx] = float(ax), float(ay)
                vectors[name] = (fx.reshape(ny, nx).T.copy(),
                                 fy.reshape(ny, nx).T.copy())
                line = next(it, "")
            else:
                line = next(it)
        except StopIteration:
            break
    return scalars, vectors


def write_wall_profiles_csv(path, grid: ChannelGrid, psi: WallPair,
                            theta: WallPair):
    lines = ["x,psi_bottom,psi_top,theta_bottom,theta_top"]
    xs = grid.xc
    for i in range(grid.nx):
        lines.append(",".join(_fmt(v) for v in
                              (xs[i], psi.bottom[i], psi.top[i],
                               theta.bottom[i], theta.top[i])))
    with open(path, "w", encoding="ascii") as fh:
        fh.write("\n".join(lines) + "\n")


def cell_centered_velocity(u, v, grid: ChannelGrid):
    """Average the staggered velocity to cell centers for snapshots."""
    ucc = 0.5 * (u + np.roll(u, -1, axis=0))
    vcc = 0.5 * (v[:, :-1] + v[:, 1:])
    return ucc, vcc
