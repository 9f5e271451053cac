"""Linear static solve and stress recovery."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import elements as el
from ..assembly import SystemMatrices, apply_supports, assemble, assembly_plan
from ..errors import NoConstraints, SingularAfterConstraints, SolverDiverged
from ..linalg import Factor
from ..model import LoadCase


@dataclass
class StaticResult:
    u: np.ndarray  # all dofs
    applied: np.ndarray  # external load, all dofs
    reactions: np.ndarray  # support forces, nonzero on constrained dofs only
    relative_residual: float
    backward_error: float

    @property
    def displacement(self) -> np.ndarray:
        return self.u.reshape(-1, 3)

    @property
    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.displacement, axis=1)

    @property
    def max_node(self) -> int:
        return int(np.argmax(self.magnitude))

    @property
    def max_deformation(self) -> float:
        return float(self.magnitude.max())

    def equilibrium_error(self) -> float:
        """|sum(reactions) + sum(loads)| / |sum(loads)| over the three axes."""
        tot = self.applied.reshape(-1, 3).sum(axis=0)
        bal = self.reactions.reshape(-1, 3).sum(axis=0) + tot
        ref = np.linalg.norm(tot) or np.abs(self.applied).sum() or 1.0
        return float(np.linalg.norm(bal) / ref)


def _load(system: SystemMatrices, load) -> np.ndarray:
    if isinstance(load, LoadCase):
        return system.load(load)
    f = np.asarray(load, dtype=float)
    if f.shape != (system.K.shape[0],):
        raise ValueError("load vector must cover all structural dofs")
    return f


def factor_checked(A) -> Factor:
    """Factor a matrix that must be positive definite (a supported structure)."""
    try:
        F = Factor(A)
    except RuntimeError as exc:  # SuperLU: exactly singular
        raise SingularAfterConstraints(str(exc)) from exc
    if F.kind not in ("cholesky", "empty"):
        if F.kind == "lu" and A.shape[0] <= 200:
            # small systems always go through SuperLU; probe definiteness densely
            try:
                np.linalg.cholesky(A.toarray())
                return F
            except np.linalg.LinAlgError:
                pass
        raise SingularAfterConstraints("stiffness is singular or indefinite after applying supports")
    return F


def solve_static(system: SystemMatrices, load, factor: Factor | None = None) -> StaticResult:
    """Solve ``K u = f`` on the free dofs.

    ``load`` is a :class:`LoadCase` or a force vector over all dofs. Weak
    springs configured on ``system`` are included.
    """
    f = _load(system, load)
    dm = system.dofmap
    if len(dm.fixed) == 0 and system.weak_spring_stiffness <= 0:
        raise NoConstraints("static solve needs supports or weak springs")
    K = system.stiffness()
    red = apply_supports(system.K, dm, f, system.weak_spring_stiffness)
    F = factor or factor_checked(red.matrix)
    uf = F.solve(red.rhs)
    if not np.all(np.isfinite(uf)):
        raise SolverDiverged("non-finite displacement")
    u = dm.full(uf)
    Ku = K @ u
    reactions = np.zeros_like(u)
    reactions[dm.fixed] = Ku[dm.fixed] - f[dm.fixed]
    r = red.matrix @ uf - red.rhs
    nb = np.linalg.norm(red.rhs)
    rel = float(np.linalg.norm(r) / nb) if nb > 0 else float(np.linalg.norm(r))
    scale = abs(red.matrix).sum(axis=1).max() * np.linalg.norm(uf) + nb
    bwd = float(np.linalg.norm(r) / scale) if scale > 0 else 0.0
    return StaticResult(u, f, reactions, rel, bwd)


def element_stresses(system: SystemMatrices, u) -> np.ndarray:
    """Cauchy stress at the Gauss points of every element, ``(n_elements, 8, 6)``."""
    mesh = system.mesh
    plan = assembly_plan(mesh, 3)
    out = np.zeros((mesh.n_elements, 8, 6))
    u = np.asarray(u, dtype=float)
    for r, name in enumerate(mesh.regions):
        idx = np.nonzero(mesh.element_region == r)[0]
        for s in range(0, len(idx), 4000):
            b = idx[s : s + 4000]
            out[b] = el.element_stress(mesh.element_coords(b), system.materials[name], u[plan.edofs[b]], system.formulation)
    return out


def von_mises(stress) -> np.ndarray:
    s = np.asarray(stress)
    sx, sy, sz, txy, tyz, tzx = (s[..., i] for i in range(6))
    return np.sqrt(0.5 * ((sx - sy) ** 2 + (sy - sz) ** 2 + (sz - sx) ** 2) + 3 * (txy**2 + tyz**2 + tzx**2))


def prestress(system: SystemMatrices, result: StaticResult) -> SystemMatrices:
    """Assemble the geometric stiffness of a static stress state into ``system.Ksigma``."""
    stress = element_stresses(system, result.u)
    system.Ksigma = assemble(system.mesh, system.materials, "geometric", stress=stress)
    return system
