"""
CSV time series and legacy-VTK snapshots.

Numbers are written with 17 significant digits so that files are
bit-stable and round-trip exact.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .. import constitutive as cm
from .. import momentum as mo
from ..errors import InvalidArgumentError
from ..flow import blended_properties, phi_at_qp, volumetric_strain

VTK_QUAD = 9


def _num(x):
    return format(float(x), ".17g")


def write_probe_csv(path, times, series):
    """Header ``time,<probe names>`` then one row per step, LF line endings."""
    names = list(series)
    n = len(times)
    for name in names:
        if len(series[name]) != n:
            raise InvalidArgumentError(f"probe '{name}' has {len(series[name])} values, expected {n}")
    lines = [",".join(["time"] + names)]
    for i in range(n):
        lines.append(",".join([_num(times[i])] + [_num(series[k][i]) for k in names]))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def write_steps_csv(path, records):
    cols = ("time", "dt", "stagger_iterations", "newton_iterations", "relative_error",
            "max_phi", "cracked_area")
    lines = [",".join(cols)]
    for r in records:
        lines.append(",".join([_num(r.time), _num(r.dt), str(r.stagger_iterations),
                               str(r.newton_iterations), _num(r.relative_error),
                               _num(r.max_phi), _num(r.cracked_area)]))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def read_csv(path):
    """(header, rows as float array) of a file written by this module."""
    text = Path(path).read_text().splitlines()
    header = text[0].split(",")
    rows = np.array([[float(v) for v in line.split(",")] for line in text[1:]]).reshape(-1, len(header))
    return header, rows


def snapshot_fields(problem, state, names):
    """Point and cell arrays for the requested output names.

    Vectors ``u`` and ``v`` and scalars ``p`` and ``phi`` are nodal.  ``H``,
    ``eps_vol`` and ``sigma1`` (first principal total stress, sigma - alpha p I)
    are per-cell averages of the quadrature values.
    """
    mesh = problem.mesh
    out = {}
    for name in names:
        if name in ("u", "v"):
            out[name] = ("point", getattr(state, name).reshape(-1, 2))
        elif name in ("p", "phi"):
            out[name] = ("point", getattr(state, name))
        elif name == "H":
            out[name] = ("cell", state.H.mean(axis=1))
        elif name == "eps_vol":
            out[name] = ("cell", volumetric_strain(mesh, state.u).mean(axis=1))
        elif name == "sigma1":
            phi_qp = phi_at_qp(mesh, state.phi)
            sig = cm.effective_stress(mo.qp_strain(mesh, state.u), phi_qp, problem.mat)
            if problem.flow is not None:
                alpha = blended_properties(phi_qp, problem.flow, problem.mat).alpha
                p_qp = np.einsum("qa,ea->eq", mesh.N_q, state.p[mesh.elements])
                sig = cm.total_poroelastic_stress(sig, p_qp, alpha)
            out[name] = ("cell", cm.principal_stress(sig)[0].mean(axis=1))
        else:
            raise InvalidArgumentError(f"unknown output field '{name}'")
    return out


def write_vtk_snapshot(path, mesh, fields, title="porofrac snapshot"):
    """Legacy ASCII unstructured grid with quad cells.

    ``fields`` maps names to ("point" | "cell", array); 2-component arrays
    are written as 3D vectors with a zero z component.
    """
    n, e = mesh.n_nodes, mesh.n_elements
    lines = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII",
             "DATASET UNSTRUCTURED_GRID", f"POINTS {n} double"]
    lines += [f"{_num(x)} {_num(y)} 0" for x, y in mesh.nodes]
    lines.append(f"CELLS {e} {5 * e}")
    lines += ["4 " + " ".join(str(int(i)) for i in conn) for conn in mesh.elements]
    lines.append(f"CELL_TYPES {e}")
    lines += [str(VTK_QUAD)] * e
    for kind, count, header in (("point", n, "POINT_DATA"), ("cell", e, "CELL_DATA")):
        items = [(k, np.asarray(v)) for k, (where, v) in fields.items() if where == kind]
        if not items:
            continue
        lines.append(f"{header} {count}")
        for name, arr in items:
            if arr.shape[0] != count:
                raise InvalidArgumentError(f"field '{name}' has {arr.shape[0]} entries, expected {count}")
            if arr.ndim == 2:
                lines.append(f"VECTORS {name} double")
                lines += [f"{_num(a)} {_num(b)} 0" for a, b in arr]
            else:
                lines.append(f"SCALARS {name} double 1")
                lines.append("LOOKUP_TABLE default")
                lines += [_num(a) for a in arr]
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))
