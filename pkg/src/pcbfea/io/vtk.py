"""Legacy ASCII VTK unstructured-grid writer (hexahedra only)."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import FieldSizeMismatch
from ..mesher import Mesh

VTK_HEXAHEDRON = 12


def _fmt(x) -> str:
    # shortest round-trip repr keeps files byte-stable across runs
    return repr(float(x))


def _field_block(name: str, values, n: int, where: str) -> list[str]:
    a = np.asarray(values)
    if a.shape[0] != n:
        raise FieldSizeMismatch(f"{where} field {name!r} has {a.shape[0]} entries, mesh has {n}")
    key = name.replace(" ", "_")
    if a.ndim == 1:
        if np.issubdtype(a.dtype, np.integer):
            return [f"SCALARS {key} int 1", "LOOKUP_TABLE default", *(str(int(v)) for v in a)]
        return [f"SCALARS {key} double 1", "LOOKUP_TABLE default", *(_fmt(v) for v in a)]
    if a.ndim == 2 and a.shape[1] == 3:
        return [f"VECTORS {key} double", *(" ".join(_fmt(v) for v in row) for row in a)]
    raise FieldSizeMismatch(f"{where} field {name!r} must be (n,) or (n, 3), got {a.shape}")


def vtk_text(mesh: Mesh, point_data: dict | None = None, cell_data: dict | None = None, title: str = "pcbfea") -> str:
    """Render the file body; ``region`` cell data is always included."""
    point_data = dict(point_data or {})
    cell_data = {"region": mesh.element_region.astype(np.int64), **(cell_data or {})}
    n, ne = mesh.n_nodes, mesh.n_elements
    out = ["# vtk DataFile Version 3.0", title.replace("\n", " ")[:255], "ASCII", "DATASET UNSTRUCTURED_GRID"]
    out.append(f"POINTS {n} double")
    out += [" ".join(_fmt(v) for v in p) for p in mesh.nodes]
    out.append(f"CELLS {ne} {ne * 9}")
    out += ["8 " + " ".join(str(int(i)) for i in e) for e in mesh.elements]
    out.append(f"CELL_TYPES {ne}")
    out += [str(VTK_HEXAHEDRON)] * ne
    blocks = [_field_block(k, v, ne, "cell") for k, v in cell_data.items()]
    out.append(f"CELL_DATA {ne}")
    for b in blocks:
        out += b
    if point_data:
        blocks = [_field_block(k, v, n, "point") for k, v in point_data.items()]
        out.append(f"POINT_DATA {n}")
        for b in blocks:
            out += b
    return "\n".join(out) + "\n"


def write_vtk(path, mesh: Mesh, point_data: dict | None = None, cell_data: dict | None = None, title: str = "pcbfea") -> Path:
    """Write ``mesh`` and fields to ``path``.

    Arrays of shape ``(n,)`` become scalars, ``(n, 3)`` vectors. Field
    lengths are checked before anything is written.
    """
    text = vtk_text(mesh, point_data, cell_data, title)
    path = Path(path)
    path.write_text(text, encoding="ascii")
    return path
