"""Structured hexahedral meshing of the board slab and bonded components.

The board is a tensor-product grid whose x/y lines pass through every
component footprint edge and support patch edge, so each component sits on
whole cells and shares its bottom nodes with the board top (bonded contact).
Components are meshed on the same in-plane lines; round shapes are
represented by the cells whose centres fall inside them (staircase).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .elements import FACES, NODE_REF, jacobian, shape_functions
from .errors import DegenerateElement, ElementSizeTooCoarse
from .model import BoardModel, CylinderLying, CylinderUpright

logger = logging.getLogger(__name__)

MERGE_TOL = 1e-9  # m

_EDGES = np.array([[0, 1], [1, 2], [2, 3], [3, 0], [4, 5], [5, 6], [6, 7], [7, 4], [0, 4], [1, 5], [2, 6], [3, 7]])
_DN_CORNERS = shape_functions(NODE_REF)[1]


@dataclass(frozen=True)
class MeshParams:
    target_element_size: float = 2.0e-3  # m
    board_thickness_layers: int = 2
    curved_shape_facets: int = 16

    def __post_init__(self):
        if not self.target_element_size > 0:
            raise ValueError("target_element_size must be > 0")
        if self.board_thickness_layers < 1:
            raise ValueError("board_thickness_layers must be >= 1")
        if self.curved_shape_facets < 8:
            raise ValueError("curved_shape_facets must be >= 8")


# Lands within 20% of the 90,371 node / 59,671 element reference mesh for the
# AED board (see README).
REFERENCE_PARAMS = MeshParams(target_element_size=1.6e-3, board_thickness_layers=2, curved_shape_facets=16)


@dataclass
class Mesh:
    nodes: np.ndarray  # (n, 3) float, metres
    elements: np.ndarray  # (e, 8) int
    element_region: np.ndarray  # (e,) int index into ``regions``
    regions: tuple[str, ...]
    surface_tags: dict[str, np.ndarray] = field(default_factory=dict)  # name -> (f, 2) [element, local face]
    node_sets: dict[str, np.ndarray] = field(default_factory=dict)
    support_node_sets: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_coords(self, idx=None) -> np.ndarray:
        e = self.elements if idx is None else self.elements[idx]
        return self.nodes[e]

    def region_elements(self, name: str) -> np.ndarray:
        return np.nonzero(self.element_region == self.regions.index(name))[0]

    def face_nodes(self, tag: str) -> np.ndarray:
        """Node indices ``(f, 4)`` of the faces in surface ``tag``."""
        faces = self.surface_tags[tag]
        return self.elements[faces[:, 0][:, None], FACES[faces[:, 1]]]

    def surface_node_set(self, tag: str) -> np.ndarray:
        return np.unique(self.face_nodes(tag))

    def centroid(self) -> np.ndarray:
        return self.nodes.mean(axis=0)


# -- grid construction ------------------------------------------------------


def _axis_lines(breaks, h_default, refine):
    """Grid lines through every breakpoint with spacing <= the local target.

    ``refine`` is a list of (lo, hi, h) intervals demanding a finer size.
    """
    b = np.unique(np.round(np.asarray(breaks, dtype=float) / MERGE_TOL) * MERGE_TOL)
    parts = []
    for lo, hi in zip(b[:-1], b[1:]):
        h = h_default
        mid = 0.5 * (lo + hi)
        for r0, r1, hr in refine:
            if r0 - MERGE_TOL <= mid <= r1 + MERGE_TOL:
                h = min(h, hr)
        n = max(1, math.ceil((hi - lo) / h - 1e-9))
        parts.append(np.linspace(lo, hi, n + 1)[:-1])
    parts.append(b[-1:])
    return np.concatenate(parts)


def _block(xs, ys, zs, mask=None):
    """Coordinates and connectivity of a tensor grid, optionally masked per cell."""
    nx, ny, nz = len(xs) - 1, len(ys) - 1, len(zs) - 1
    X, Y, Z = np.meshgrid(xs, ys, zs, indexing="ij")
    coords = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
    idx = np.arange(coords.shape[0]).reshape(nx + 1, ny + 1, nz + 1)
    i, j, k = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
    if mask is not None:
        i, j, k = i[mask], j[mask], k[mask]
    i, j, k = i.ravel(), j.ravel(), k.ravel()
    conn = np.stack(
        [
            idx[i, j, k],
            idx[i + 1, j, k],
            idx[i + 1, j + 1, k],
            idx[i, j + 1, k],
            idx[i, j, k + 1],
            idx[i + 1, j, k + 1],
            idx[i + 1, j + 1, k + 1],
            idx[i, j + 1, k + 1],
        ],
        axis=1,
    )
    return coords, conn


def _merge(blocks):
    """Concatenate blocks and merge coincident nodes; drops unused nodes."""
    all_coords, all_conn, offset = [], [], 0
    for coords, conn in blocks:
        used, inv = np.unique(conn, return_inverse=True)
        all_coords.append(coords[used])
        all_conn.append(inv.reshape(conn.shape) + offset)
        offset += len(used)
    coords = np.concatenate(all_coords)
    conn = np.concatenate(all_conn)
    keys = np.round(coords / MERGE_TOL).astype(np.int64)
    _, first, inv = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    return coords[first], inv.ravel()[conn]


def _exterior_faces(elements):
    """(element, local face) pairs that belong to exactly one element."""
    fn = elements[:, FACES]  # (e, 6, 4)
    key = np.sort(fn.reshape(-1, 4), axis=1)
    _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
    once = counts[inv.ravel()] == 1
    flat = np.nonzero(once)[0]
    return np.stack([flat // 6, flat % 6], axis=1)


def box_mesh(size, divisions, origin=(0.0, 0.0, 0.0), region: str = "box") -> Mesh:
    """Uniform structured mesh of an axis-aligned box.

    Node sets and surface tags ``xmin``, ``xmax``, ``ymin``, ... name the six
    faces; ``exterior`` is the whole boundary.
    """
    lines = [o + np.linspace(0.0, s, n + 1) for o, s, n in zip(origin, size, divisions)]
    coords, conn = _block(*lines)
    mesh = Mesh(coords, conn, np.zeros(len(conn), dtype=np.int64), (region,))
    ext = _exterior_faces(conn)
    mesh.surface_tags["exterior"] = ext
    # local faces: 5 xi-, 3 xi+, 2 eta-, 4 eta+, 0 zeta-, 1 zeta+
    for name, lf in (("xmin", 5), ("xmax", 3), ("ymin", 2), ("ymax", 4), ("zmin", 0), ("zmax", 1)):
        mesh.surface_tags[name] = ext[ext[:, 1] == lf]
        mesh.node_sets[name] = mesh.surface_node_set(name)
    return mesh


# -- board meshing ----------------------------------------------------------


def _component_lines(comp, xs, ys, t, params):
    x0, x1, y0, y1 = comp.bbox()
    tol = MERGE_TOL
    cx = xs[(xs >= x0 - tol) & (xs <= x1 + tol)]
    cy = ys[(ys >= y0 - tol) & (ys <= y1 + tol)]
    H = comp.shape.total_height
    nz = max(1, math.ceil(H / params.target_element_size - 1e-9))
    if isinstance(comp.shape, CylinderLying):
        nz = max(nz, params.curved_shape_facets)
    zs = t + np.linspace(0.0, H, nz + 1)
    return cx, cy, zs


def generate_mesh(model: BoardModel, params: MeshParams | None = None) -> Mesh:
    """Mesh a validated :class:`BoardModel` (SI units) with hex8 elements."""
    params = params or MeshParams()
    if model.unit_system != "m":
        raise ValueError("generate_mesh expects a validated (SI) model")
    L, W, t = model.board_size
    h = params.target_element_size

    xb, yb = [0.0, L], [0.0, W]
    refine_x, refine_y = [], []
    for c in model.components:
        x0, x1, y0, y1 = c.bbox()
        xb += [x0, x1]
        yb += [y0, y1]
        if isinstance(c.shape, CylinderUpright):
            hr = c.shape.diameter / params.curved_shape_facets
            refine_x.append((x0, x1, hr))
            refine_y.append((y0, y1, hr))
        elif isinstance(c.shape, CylinderLying):
            hr = c.shape.diameter / params.curved_shape_facets
            (refine_y if c.shape.axis == "x" else refine_x).append((x0, x1, hr) if c.shape.axis == "y" else (y0, y1, hr))
    for s in model.supports:
        x0, x1, y0, y1 = s.bbox()
        xb += [min(max(x0, 0.0), L), min(max(x1, 0.0), L)]
        yb += [min(max(y0, 0.0), W), min(max(y1, 0.0), W)]
    xs = _axis_lines(xb, h, refine_x)
    ys = _axis_lines(yb, h, refine_y)
    zs = np.linspace(0.0, t, params.board_thickness_layers + 1)

    blocks = [_block(xs, ys, zs)]
    regions = ["board"]
    for c in model.components:
        cx, cy, cz = _component_lines(c, xs, ys, t, params)
        if len(cx) < 2 or len(cy) < 2:
            raise ElementSizeTooCoarse(f"{c.name}: footprint thinner than one element")
        mx, my, mz = [0.5 * (a[1:] + a[:-1]) for a in (cx, cy, cz)]
        Mx, My, Mz = np.meshgrid(mx - c.position[0], my - c.position[1], mz - t, indexing="ij")
        mask = c.shape.contains(Mx, My, Mz)
        if not mask.any():
            raise ElementSizeTooCoarse(f"{c.name}: no cell centre falls inside the shape; refine the mesh")
        blocks.append(_block(cx, cy, cz, mask))
        regions.append(c.name)

    nodes, elements = _merge(blocks)
    region = np.concatenate([np.full(len(b[1]), i, dtype=np.int64) for i, b in enumerate(blocks)])
    mesh = Mesh(nodes, elements, region, tuple(regions))

    jmin = corner_jacobians(mesh).min()
    if jmin <= 0:
        raise DegenerateElement(f"mesh contains an element with corner Jacobian {jmin:g}")
    _tag_surfaces(mesh, model)
    _tag_supports(mesh, model)
    logger.info("meshed %s: %d nodes, %d elements", model.name, mesh.n_nodes, mesh.n_elements)
    return mesh


def _tag_surfaces(mesh: Mesh, model: BoardModel):
    t = model.board_size[2]
    ext = _exterior_faces(mesh.elements)
    mesh.surface_tags["exterior"] = ext
    reg = mesh.element_region[ext[:, 0]]
    board = reg == 0
    zf = mesh.nodes[mesh.elements[ext[:, 0][:, None], FACES[ext[:, 1]]], 2]  # (f, 4)
    bottom = board & (ext[:, 1] == 0) & np.all(np.abs(zf) < MERGE_TOL, axis=1)
    top = board & (ext[:, 1] == 1) & np.all(np.abs(zf - t) < MERGE_TOL, axis=1)
    mesh.surface_tags["bottom"] = ext[bottom]
    mesh.surface_tags["top"] = ext[top]
    mesh.surface_tags["sides"] = ext[board & ~bottom & ~top]
    for i, name in enumerate(mesh.regions[1:], start=1):
        mesh.surface_tags[f"component:{name}"] = ext[reg == i]
    on_board = mesh.nodes[:, 2] <= t + MERGE_TOL
    mesh.node_sets["board"] = np.nonzero(on_board)[0]
    mesh.node_sets["board_top"] = np.nonzero(np.abs(mesh.nodes[:, 2] - t) < MERGE_TOL)[0]
    mesh.node_sets["board_bottom"] = np.nonzero(np.abs(mesh.nodes[:, 2]) < MERGE_TOL)[0]


def _tag_supports(mesh: Mesh, model: BoardModel):
    t = model.board_size[2]
    x, y, z = mesh.nodes.T
    for i, s in enumerate(model.supports):
        x0, x1, y0, y1 = s.bbox()
        sel = (x >= x0 - MERGE_TOL) & (x <= x1 + MERGE_TOL) & (y >= y0 - MERGE_TOL) & (y <= y1 + MERGE_TOL)
        sel &= z <= t + MERGE_TOL
        mesh.support_node_sets[s.name or f"support_{i}"] = np.nonzero(sel)[0]


# -- quality ----------------------------------------------------------------


def corner_jacobians(mesh: Mesh) -> np.ndarray:
    """Jacobian determinant of the reference map at each element corner, ``(e, 8)``."""
    X = mesh.element_coords()
    return np.linalg.det(jacobian(X, _DN_CORNERS))


@dataclass(frozen=True)
class QualityReport:
    n_nodes: int
    n_elements: int
    min_jacobian: float
    min_scaled_jacobian: float
    max_aspect_ratio: float
    region_counts: dict[str, int]


def mesh_quality_report(mesh: Mesh) -> QualityReport:
    X = mesh.element_coords()
    J = jacobian(X, _DN_CORNERS)
    det = np.linalg.det(J)
    cols = np.linalg.norm(J, axis=-2)  # lengths of the three edge vectors at each corner
    scaled = det / np.prod(cols, axis=-1)
    edges = np.linalg.norm(X[:, _EDGES[:, 0]] - X[:, _EDGES[:, 1]], axis=-1)
    with np.errstate(divide="ignore"):
        aspect = edges.max(axis=1) / edges.min(axis=1)
    counts = np.bincount(mesh.element_region, minlength=len(mesh.regions))
    return QualityReport(
        n_nodes=mesh.n_nodes,
        n_elements=mesh.n_elements,
        min_jacobian=float(det.min()) if det.size else float("nan"),
        min_scaled_jacobian=float(scaled.min()) if det.size else float("nan"),
        max_aspect_ratio=float(aspect.max()) if det.size else float("nan"),
        region_counts={r: int(n) for r, n in zip(mesh.regions, counts)},
    )
