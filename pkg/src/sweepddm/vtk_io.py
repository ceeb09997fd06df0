"""Legacy ASCII VTK export of triangle meshes and nodal fields."""

from __future__ import annotations

import numpy as np

VTK_TRIANGLE = 5


def write_legacy_vtk(path, nodes, triangles, point_data=None, title="sweepddm export"):
    """Write a triangle mesh with optional nodal scalar fields.

    ``point_data`` maps field names to real arrays of one value per node;
    complex fields must be split by the caller (e.g. into re/im/abs).
    """
    nodes = np.asarray(nodes, dtype=float)
    triangles = np.asarray(triangles, dtype=int)
    n, nt = nodes.shape[0], triangles.shape[0]
    lines = [
        "# vtk DataFile Version 3.0",
        title,
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {n} double",
    ]
    for x, y in nodes:
        lines.append(f"{x:.17g} {y:.17g} 0")
    lines.append(f"CELLS {nt} {4 * nt}")
    for a, b, c in triangles:
        lines.append(f"3 {a} {b} {c}")
    lines.append(f"CELL_TYPES {nt}")
    lines.extend(["5"] * nt)
    if point_data:
        lines.append(f"POINT_DATA {n}")
        for name, values in point_data.items():
            values = np.asarray(values, dtype=float)
            if values.shape[0] != n:
                raise ValueError(
                    f"field '{name}' has {values.shape[0]} values for {n} points"
                )
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines.extend(f"{v:.17g}" for v in values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_field_vtk(path, mesh, fields, title="sweepddm solution"):
    """Write a mesh plus complex nodal fields split into re/im/abs scalars."""
    point_data = {}
    for name, values in fields.items():
        values = np.asarray(values)
        point_data[f"{name}_re"] = values.real
        point_data[f"{name}_im"] = values.imag
        point_data[f"{name}_abs"] = np.abs(values)
    write_legacy_vtk(path, mesh.nodes, mesh.triangles, point_data, title=title)


def dump_mesh_vtk(mesh, path, title="sweepddm mesh"):
    """Dump mesh geometry only (points + triangle cells)."""
    write_legacy_vtk(path, mesh.nodes, mesh.triangles, None, title=title)
