"""Global dof numbering, sparse assembly, supports and weak springs."""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import elements as el
from .errors import NoConstraints
from .mesher import Mesh
from .model import DOF_NAMES, BoardModel, Gravity, LoadCase, Material, PointForce, UniformPressure

logger = logging.getLogger(__name__)

KINDS = ("stiffness", "mass", "geometric", "thermal")
WEAK_SPRING_FREQUENCY = 0.01  # Hz; where default weak springs put the rigid-body modes


def _chunk_size() -> int:
    # element batch per kernel call; bounds peak memory of the batched einsums
    return int(os.environ.get("PCBFEA_CHUNK", "4000"))


@dataclass
class DofMap:
    """Node-to-dof numbering (``dof = node * dofs_per_node + component``)."""

    n_nodes: int
    dofs_per_node: int = 3
    fixed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    values: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        self.fixed = np.asarray(self.fixed, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=float)
        self._refresh()

    def _refresh(self):
        order = np.argsort(self.fixed, kind="stable")
        self.fixed, self.values = self.fixed[order], self.values[order]
        mask = np.ones(self.n_dofs, dtype=bool)
        mask[self.fixed] = False
        self.free = np.nonzero(mask)[0]

    @property
    def n_dofs(self) -> int:
        return self.n_nodes * self.dofs_per_node

    def dofs(self, nodes, components=None) -> np.ndarray:
        comps = range(self.dofs_per_node) if components is None else components
        nodes = np.asarray(nodes, dtype=np.int64)
        return (nodes[:, None] * self.dofs_per_node + np.asarray(list(comps))[None, :]).ravel()

    def fix(self, nodes, components=None, value: float = 0.0) -> "DofMap":
        """Prescribe ``value`` on the given node components (later calls win)."""
        new = self.dofs(nodes, components)
        keep = ~np.isin(self.fixed, new)
        self.fixed = np.concatenate([self.fixed[keep], new])
        self.values = np.concatenate([self.values[keep], np.full(len(new), float(value))])
        self.fixed, idx = np.unique(self.fixed, return_index=True)
        self.values = self.values[idx]
        self._refresh()
        return self

    def full(self, u_free, fill=None) -> np.ndarray:
        """Expand a free-dof vector (or matrix of column vectors) to all dofs."""
        u_free = np.asarray(u_free)
        out = np.zeros((self.n_dofs,) + u_free.shape[1:])
        out[self.free] = u_free
        if fill is None:
            out[self.fixed] = self.values.reshape((-1,) + (1,) * (u_free.ndim - 1))
        return out

    @classmethod
    def from_supports(cls, mesh: Mesh, model: BoardModel) -> "DofMap":
        dm = cls(mesh.n_nodes, 3)
        for i, s in enumerate(model.supports):
            nodes = mesh.support_node_sets[s.name or f"support_{i}"]
            dm.fix(nodes, [DOF_NAMES.index(d) for d in s.constrained_dofs])
        return dm


# -- sparse assembly ---------------------------------------------------------


class AssemblyPlan:
    """CSR pattern of a mesh and the scatter positions of element entries.

    The pattern is built on the node graph and expanded to dofs, which keeps
    peak memory proportional to the number of nonzeros rather than to the
    number of element entries.
    """

    def __init__(self, elements: np.ndarray, n_nodes: int, dofs_per_node: int):
        d = self.d = dofs_per_node
        self.n = n_nodes * d
        ne, npe = elements.shape
        self.edofs = (elements[:, :, None] * d + np.arange(d)).reshape(ne, -1)

        keys = (np.repeat(elements, npe, axis=1).astype(np.int64) * n_nodes + np.tile(elements, (1, npe))).ravel()
        uniq, inv = np.unique(keys, return_inverse=True)
        del keys
        self._node_pos = inv.reshape(ne, npe, npe).astype(np.int64)
        node_rows = uniq // n_nodes
        node_cols = uniq % n_nodes
        deg = np.bincount(node_rows, minlength=n_nodes)
        node_ptr = np.concatenate([[0], np.cumsum(deg)])
        self._node_ptr = node_ptr

        # every dof row of node i holds the d dofs of each neighbour of i
        lens = np.repeat(deg * d, d)
        self.indptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        self.nnz = int(self.indptr[-1])
        expanded = (node_cols[:, None] * d + np.arange(d)).ravel()
        starts = np.repeat(node_ptr[:-1] * d, d)
        offs = np.arange(self.nnz) - np.repeat(self.indptr[:-1], lens) + np.repeat(starts, lens)
        self.indices = expanded[offs].astype(np.int32)

    def positions(self, idx) -> np.ndarray:
        """Flat CSR data positions of the ``(8d, 8d)`` entries of elements ``idx``."""
        d = self.d
        el_nodes = self.edofs[idx][:, ::d] // d  # (e, 8)
        rank = self._node_pos[idx] - self._node_ptr[el_nodes][:, :, None]  # (e, 8, 8)
        row_start = self.indptr[self.edofs[idx]].reshape(len(idx), -1, d)  # (e, 8, d)
        pos = row_start[:, :, :, None, None] + d * rank[:, :, None, :, None] + np.arange(d)
        return pos.reshape(len(idx), -1)

    def matrix(self, data) -> sp.csr_matrix:
        A = sp.csr_matrix((data, self.indices, self.indptr), shape=(self.n, self.n))
        A.has_sorted_indices = True
        return A


_PLANS: dict = {}


def assembly_plan(mesh: Mesh, dofs_per_node: int) -> AssemblyPlan:
    key = (id(mesh.elements), mesh.elements.shape, mesh.n_nodes, dofs_per_node)
    plan = _PLANS.get(key)
    if plan is None:
        if len(_PLANS) > 8:
            _PLANS.clear()
        plan = _PLANS[key] = AssemblyPlan(mesh.elements, mesh.n_nodes, dofs_per_node)
    return plan


def _region_chunks(mesh: Mesh, order=None):
    """Yield ``(region name, element indices)`` batches in a fixed order."""
    idx_all = np.arange(mesh.n_elements) if order is None else np.asarray(order)
    size = _chunk_size()
    for r, name in enumerate(mesh.regions):
        idx = idx_all[mesh.element_region[idx_all] == r]
        for s in range(0, len(idx), size):
            yield name, idx[s : s + size]


def assemble(
    mesh: Mesh,
    materials: dict[str, Material],
    kind: str = "stiffness",
    *,
    stress=None,
    formulation: str = "incompatible",
    lumping: str = "consistent",
    order=None,
) -> sp.csr_matrix:
    """Assemble a global operator over all dofs.

    ``kind`` is one of stiffness, mass, geometric (needs ``stress`` with
    shape ``(n_elements, 8, 6)`` at the Gauss points) or thermal.
    ``order`` permutes the element visitation sequence.
    """
    if kind not in KINDS:
        raise ValueError(f"kind must be one of {KINDS}")
    if kind == "geometric" and stress is None:
        raise ValueError("geometric stiffness needs a stress field")
    plan = assembly_plan(mesh, 1 if kind == "thermal" else 3)
    data = np.zeros(plan.nnz)
    for name, idx in _region_chunks(mesh, order):
        X = mesh.element_coords(idx)
        mat = materials[name]
        if kind == "stiffness":
            ke = el.element_stiffness(X, mat, formulation)
        elif kind == "mass":
            ke = el.element_mass(X, mat, lumping)
        elif kind == "geometric":
            ke = el.element_geometric_stiffness(X, stress[idx])
        else:
            ke = el.element_thermal(X, mat)[0]
        data += np.bincount(plan.positions(idx).ravel(), weights=ke.reshape(len(idx), -1).ravel(), minlength=plan.nnz)
    return plan.matrix(data)


def scatter_vector(mesh: Mesh, element_vectors, element_idx, dofs_per_node: int) -> np.ndarray:
    """Sum element vectors ``(e, 8*d)`` into a global vector."""
    plan = assembly_plan(mesh, dofs_per_node)
    return np.bincount(
        plan.edofs[element_idx].ravel(), weights=np.asarray(element_vectors).ravel(), minlength=plan.n
    )


# -- surface integrals ------------------------------------------------------

_QUAD_PTS = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]]) / np.sqrt(3.0)
_QUAD_REF = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)


def _quad_shape(st):
    s, t = st[:, 0:1], st[:, 1:2]
    N = 0.25 * (1 + s * _QUAD_REF[:, 0]) * (1 + t * _QUAD_REF[:, 1])
    dNs = 0.25 * _QUAD_REF[:, 0] * (1 + t * _QUAD_REF[:, 1])
    dNt = 0.25 * _QUAD_REF[:, 1] * (1 + s * _QUAD_REF[:, 0])
    return N, dNs, dNt


_QN, _QDS, _QDT = _quad_shape(_QUAD_PTS)


def face_quadrature(mesh: Mesh, tag: str):
    """Nodes ``(f, 4)``, shape values ``(4gp, 4)`` and outward area vectors ``(f, 4gp, 3)``."""
    nodes = mesh.face_nodes(tag)
    X = mesh.nodes[nodes]  # (f, 4, 3)
    a = np.einsum("ga,fai->fgi", _QDS, X)
    b = np.einsum("ga,fai->fgi", _QDT, X)
    return nodes, _QN, np.cross(a, b)  # unit Gauss weights


def face_area(mesh: Mesh, tag: str) -> float:
    _, _, dA = face_quadrature(mesh, tag)
    return float(np.linalg.norm(dA, axis=-1).sum())


def load_vector(mesh: Mesh, materials: dict[str, Material], load: LoadCase, scale: float = 1.0) -> np.ndarray:
    """Consistent nodal force vector (all structural dofs) for a load case."""
    n = mesh.n_nodes * 3
    kind = load.kind
    if isinstance(kind, Gravity):
        f = np.zeros(n)
        g = np.asarray(kind.acceleration, dtype=float)
        for name, idx in _region_chunks(mesh):
            X = mesh.element_coords(idx)
            rho = materials[name].density
            # integral of N over each element, times rho * g
            wN = el.element_thermal(X, materials[name], 1.0)[1]  # (e, 8)
            fe = rho * wN[:, :, None] * g
            f += scatter_vector(mesh, fe.reshape(len(idx), 24), idx, 3)
    elif isinstance(kind, UniformPressure):
        nodes, N, dA = face_quadrature(mesh, kind.face)
        fe = -kind.pressure * np.einsum("ga,fgi->fai", N, dA)
        f = np.bincount((nodes[:, :, None] * 3 + np.arange(3)).ravel(), weights=fe.ravel(), minlength=n)
    elif isinstance(kind, PointForce):
        node = int(np.argmin(np.linalg.norm(mesh.nodes - np.asarray(kind.location), axis=1)))
        f = np.zeros(n)
        f[3 * node : 3 * node + 3] = kind.force
    else:
        raise TypeError(f"unsupported load kind {type(kind).__name__}")
    return f * scale


# -- constraints ----------------------------------------------------------


def model_mass(mesh: Mesh, materials: dict[str, Material]) -> float:
    vol = el.element_volume(mesh.element_coords())
    rho = np.array([materials[name].density for name in mesh.regions])[mesh.element_region]
    return float(vol @ rho)


def default_weak_spring(mesh: Mesh, materials: dict[str, Material]) -> float:
    """Spring stiffness that lifts free rigid-body modes to about ``WEAK_SPRING_FREQUENCY``.

    A spring k on every dof shifts a mass-normalised mode by ``k |phi|^2``,
    roughly ``k / m_node``; tying k to the mean nodal mass keeps that shift
    mesh independent and far below any elastic frequency of a board.
    """
    return (2 * np.pi * WEAK_SPRING_FREQUENCY) ** 2 * model_mass(mesh, materials) / mesh.n_nodes


def add_weak_springs(K, stiffness: float, dofs=None):
    """Add ``stiffness`` (N/m) to every translational diagonal (or ``dofs``)."""
    if stiffness < 0:
        raise ValueError("weak spring stiffness must be >= 0")
    if stiffness == 0:
        return K
    d = np.zeros(K.shape[0])
    d[slice(None) if dofs is None else dofs] = stiffness
    return (K + sp.diags(d, format="csr")).tocsr()


@dataclass
class ReducedSystem:
    """Free-free block of an operator plus what is needed to recover reactions."""

    matrix: sp.csr_matrix
    rhs: np.ndarray | None
    dofmap: DofMap


def reduce_matrix(A, dofmap: DofMap) -> sp.csr_matrix:
    f = dofmap.free
    return A[f][:, f].tocsr()


def apply_supports(A, dofmap: DofMap, rhs=None, weak_springs: float = 0.0) -> ReducedSystem:
    """Eliminate constrained dofs; prescribed values move to the right-hand side."""
    if dofmap.dofs_per_node == 3 and len(dofmap.fixed) == 0 and weak_springs <= 0:
        raise NoConstraints("structural system has no supports and no weak springs")
    Aw = add_weak_springs(A, weak_springs) if weak_springs > 0 else A
    Kff = reduce_matrix(Aw, dofmap)
    b = None
    if rhs is not None:
        b = np.asarray(rhs, dtype=float)[dofmap.free]
        if np.any(dofmap.values):
            b = b - Aw[dofmap.free][:, dofmap.fixed] @ dofmap.values
    return ReducedSystem(Kff, b, dofmap)


# -- structural system ------------------------------------------------------


@dataclass
class SystemMatrices:
    mesh: Mesh
    materials: dict[str, Material]
    dofmap: DofMap
    K: sp.csr_matrix
    M: sp.csr_matrix | None = None
    Ksigma: sp.csr_matrix | None = None
    weak_spring_stiffness: float = 0.0
    formulation: str = "incompatible"

    def load(self, load_case: LoadCase, scale: float = 1.0) -> np.ndarray:
        return load_vector(self.mesh, self.materials, load_case, scale)

    def stiffness(self, prestressed: bool = False) -> sp.csr_matrix:
        K = self.K
        if prestressed:
            if self.Ksigma is None:
                raise ValueError("no geometric stiffness assembled; run a static solve first")
            K = K + self.Ksigma
        return add_weak_springs(K, self.weak_spring_stiffness)

    def total_mass(self) -> float:
        r = np.zeros(self.K.shape[0])
        r[0::3] = 1.0
        return float(r @ (self.M @ r))


def build_system(
    mesh: Mesh,
    materials: dict[str, Material],
    dofmap: DofMap,
    *,
    formulation: str = "incompatible",
    lumping: str = "consistent",
    mass: bool = True,
    weak_springs: float | str | None = None,
) -> SystemMatrices:
    """Assemble K (and M) for a mesh; ``weak_springs="default"`` uses :func:`default_weak_spring`."""
    K = assemble(mesh, materials, "stiffness", formulation=formulation)
    M = assemble(mesh, materials, "mass", lumping=lumping) if mass else None
    kw = default_weak_spring(mesh, materials) if weak_springs == "default" else float(weak_springs or 0.0)
    logger.info("assembled %d dofs, nnz(K)=%d", K.shape[0], K.nnz)
    return SystemMatrices(mesh, materials, dofmap, K, M, None, kw, formulation)


def strain_energy_form(mesh: Mesh, materials: dict[str, Material], shapes, formulation: str = "incompatible") -> np.ndarray:
    """``Phi^T K Phi`` evaluated element by element from strains, for full-dof ``shapes``."""
    Phi = np.asarray(shapes, dtype=float).reshape(mesh.n_nodes * 3, -1)
    plan = assembly_plan(mesh, 3)
    out = np.zeros((Phi.shape[1], Phi.shape[1]))
    size = max(1, _chunk_size() // max(1, Phi.shape[1] // 4))
    for r, name in enumerate(mesh.regions):
        idx_r = np.nonzero(mesh.element_region == r)[0]
        for s in range(0, len(idx_r), size):
            idx = idx_r[s : s + size]
            out += el.element_strain_energy_form(mesh.element_coords(idx), materials[name], Phi[plan.edofs[idx]], formulation)
    return 0.5 * (out + out.T)
