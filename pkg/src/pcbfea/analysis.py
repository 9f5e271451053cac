"""End-to-end pipelines on a board model: mesh, assemble, solve."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .assembly import DofMap, SystemMatrices, build_system
from .mesher import Mesh, MeshParams, generate_mesh
from .model import BoardModel, LoadCase
from .modal_post import ModeComparison, ParticipationTable, compare_modesets, participation
from .solvers import (
    ModeSet,
    NonlinearResult,
    RayleighDamping,
    StaticResult,
    TransientResult,
    modal_analysis,
    prestress,
    solve_newton_raphson,
    solve_static,
    transient_analysis,
)
from .thermal import TemperatureField, solve_thermal

logger = logging.getLogger(__name__)


@dataclass
class Analysis:
    model: BoardModel
    params: MeshParams
    mesh: Mesh
    system: SystemMatrices

    @classmethod
    def prepare(
        cls,
        model: BoardModel,
        params: MeshParams | None = None,
        *,
        formulation: str = "incompatible",
        lumping: str = "consistent",
        weak_springs: float | str | None = None,
        mass: bool = True,
    ) -> "Analysis":
        params = params or MeshParams()
        mesh = generate_mesh(model, params)
        dm = DofMap.from_supports(mesh, model)
        system = build_system(
            mesh, model.region_materials(), dm, formulation=formulation, lumping=lumping, mass=mass, weak_springs=weak_springs
        )
        logger.info("%s: %d nodes, %d elements, %d free dofs", model.name, mesh.n_nodes, mesh.n_elements, len(dm.free))
        return cls(model, params, mesh, system)

    def load_case(self, name: str | None = None) -> LoadCase:
        return self.model.load_case(name)

    def static(self, load: str | LoadCase | None = None) -> StaticResult:
        lc = load if isinstance(load, LoadCase) else self.load_case(load)
        return solve_static(self.system, lc)

    def modal(self, n_modes: int = 6, prestressed: bool = False, load: str | LoadCase | None = None) -> ModeSet:
        if prestressed and self.system.Ksigma is None:
            prestress(self.system, self.static(load))
        return modal_analysis(self.system, n_modes, prestressed)

    def prestressed_comparison(self, n_modes: int = 6, load=None) -> tuple[ModeSet, ModeSet, ModeComparison]:
        a = self.modal(n_modes)
        b = self.modal(n_modes, prestressed=True, load=load)
        return a, b, compare_modesets(a, b)

    def participation(self, modes: ModeSet) -> ParticipationTable:
        return participation(modes, self.system.M, self.mesh.nodes)

    def nonlinear(self, load=None, substeps: int = 5, **kw) -> NonlinearResult:
        lc = load if isinstance(load, LoadCase) else self.load_case(load)
        return solve_newton_raphson(self.system, lc, substeps, **kw)

    def transient(self, load=None, dt: float = 1e-4, t_end: float = 0.01, damping: RayleighDamping | None = None, probe_nodes=None) -> TransientResult:
        lc = load if isinstance(load, LoadCase) else self.load_case(load)
        return transient_analysis(self.system, lc, dt, t_end, damping, probe_nodes)

    def thermal(self) -> TemperatureField:
        if self.model.thermal_case is None:
            raise ValueError(f"model {self.model.name!r} has no thermal case")
        return solve_thermal(self.mesh, self.system.materials, self.model.thermal_case)

    # -- geometric queries used by reports and checks --------------------

    def region_nodes(self, name: str) -> np.ndarray:
        return np.unique(self.mesh.elements[self.mesh.region_elements(name)])

    def support_nodes(self) -> np.ndarray:
        sets = list(self.mesh.support_node_sets.values())
        return np.unique(np.concatenate(sets)) if sets else np.zeros(0, dtype=np.int64)

    def distance_to_supports(self, node: int) -> float:
        """In-plane distance from a node to the nearest support patch edge (0 inside)."""
        x, y = self.mesh.nodes[node, :2]
        best = np.inf
        for s in self.model.supports:
            x0, x1, y0, y1 = s.bbox()
            dx = max(x0 - x, 0.0, x - x1)
            dy = max(y0 - y, 0.0, y - y1)
            best = min(best, float(np.hypot(dx, dy)))
        return best
