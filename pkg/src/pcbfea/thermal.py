"""Steady conduction with sources and convection, flux recovery and ZZ error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import elements as el
from .assembly import DofMap, _region_chunks, assemble, assembly_plan, face_quadrature, reduce_matrix
from .errors import NegativeFilmCoefficient, SingularThermalSystem
from .linalg import Factor, relative_residual
from .mesher import Mesh
from .model import Material, ThermalCase

_N_GP = el.shape_functions(el.GAUSS.points)[0]  # (8 gp, 8 nodes)


@dataclass
class EnergyBalance:
    generated: float  # W
    convected: float  # W leaving through films
    dirichlet: float  # W leaving through fixed-temperature nodes (net)
    throughput: float = 0.0  # W, gross flow magnitude used for scaling

    @property
    def imbalance(self) -> float:
        scale = max(self.throughput, abs(self.generated) + abs(self.convected) + abs(self.dirichlet))
        return abs(self.generated - self.convected - self.dirichlet) / scale if scale > 0 else 0.0


@dataclass
class TemperatureField:
    temperature: np.ndarray  # degC per node
    balance: EnergyBalance
    relative_residual: float
    flux: np.ndarray | None = None  # recovered nodal flux, W/m^2
    indicator: np.ndarray | None = None  # per-element energy-norm error
    error_fraction: float | None = None

    @property
    def hotspot(self) -> int:
        return int(np.argmax(self.temperature))


def _convection_terms(mesh: Mesh, tag: str, h: float, sink: float):
    nodes, N, dA = face_quadrature(mesh, tag)
    w = np.linalg.norm(dA, axis=-1)  # (f, g)
    H = h * np.einsum("fg,ga,gb->fab", w, N, N)
    q = h * sink * np.einsum("fg,ga->fa", w, N)
    rows = np.repeat(nodes, 4, axis=1).ravel()
    cols = np.tile(nodes, (1, 4)).ravel()
    n = mesh.n_nodes
    Hg = sp.csr_matrix((H.ravel(), (rows, cols)), shape=(n, n))
    return Hg, np.bincount(nodes.ravel(), weights=q.ravel(), minlength=n)


def _source_vector(mesh: Mesh, materials, sources: dict[str, float]) -> np.ndarray:
    Q = np.zeros(mesh.n_nodes)
    plan = assembly_plan(mesh, 1)
    for name, idx in _region_chunks(mesh):
        rate = sources.get(name, 0.0)
        if rate:
            qe = el.element_thermal(mesh.element_coords(idx), materials[name], rate)[1]
            Q += np.bincount(plan.edofs[idx].ravel(), weights=qe.ravel(), minlength=mesh.n_nodes)
    return Q


def solve_thermal(
    mesh: Mesh, materials: dict[str, Material], case: ThermalCase, recover: bool = True
) -> TemperatureField:
    """Steady temperatures for ``case``; heat sources are keyed by region name.

    Convection contributes ``h int N N dA`` to the matrix and
    ``h T_sink int N dA`` to the load. Fixed temperatures are eliminated.
    """
    for cv in case.convection:
        if cv.film_coefficient < 0:
            raise NegativeFilmCoefficient(f"film coefficient on {cv.surface!r} is negative")
    K = assemble(mesh, materials, "thermal")
    Q = _source_vector(mesh, materials, dict(case.heat_sources))
    H = sp.csr_matrix(K.shape)
    F = np.zeros(mesh.n_nodes)
    for cv in case.convection:
        if cv.film_coefficient > 0:
            Hc, Fc = _convection_terms(mesh, cv.surface, cv.film_coefficient, cv.sink_temperature)
            H, F = H + Hc, F + Fc
    dm = DofMap(mesh.n_nodes, 1)
    for tag, temp in case.fixed_temperatures:
        dm.fix(mesh.surface_node_set(tag), [0], temp)
    if len(dm.fixed) == 0 and H.nnz == 0:
        if abs(Q.sum()) > 0:
            raise SingularThermalSystem("insulated model with a net heat source has no steady state")
        # no boundary exchange and no sources: the ambient state is the solution
        dm.fix([0], [0], case.ambient_temperature)
    A = (K + H).tocsr()
    rhs = Q + F
    Aff = reduce_matrix(A, dm)
    b = rhs[dm.free] - A[dm.free][:, dm.fixed] @ dm.values
    Tf = Factor(Aff).solve(b)
    T = dm.full(Tf)
    res = relative_residual(Aff, Tf, b)

    out = -(A @ T - rhs)[dm.fixed]  # heat leaving through each fixed node
    hflow = H @ T - F
    gross = float(np.abs(Q).sum() + np.abs(hflow).sum() + np.abs(out).sum())
    bal = EnergyBalance(float(Q.sum()), float(hflow.sum()), float(out.sum()), gross)
    field = TemperatureField(T, bal, res)
    if recover:
        field.flux = recover_flux(mesh, materials, T)
        field.indicator, field.error_fraction = error_estimate(mesh, materials, T)
    return field


def gauss_flux(coords, material, temps) -> tuple[np.ndarray, np.ndarray]:
    """Flux ``-k grad T`` at the Gauss points ``(e, 8, 3)`` and the weights ``(e, 8)``."""
    _, detJ, grad = el._geometry(np.asarray(coords))
    q = -material.thermal_conductivity * np.einsum("ea,egai->egi", temps, grad)
    return q, detJ * el.GAUSS.weights


def _region_nodal_flux(mesh: Mesh, materials, T):
    """Lumped L2 projection of the Gauss flux to nodes, separately per region."""
    out = {}
    for r, name in enumerate(mesh.regions):
        idx = np.nonzero(mesh.element_region == r)[0]
        conn = mesh.elements[idx]
        q, w = gauss_flux(mesh.element_coords(idx), materials[name], T[conn])
        wN = np.einsum("eg,ga->ea", w, _N_GP)  # (e, 8)
        wq = np.einsum("eg,ga,egi->eai", w, _N_GP, q)  # (e, 8, 3)
        den = np.bincount(conn.ravel(), weights=wN.ravel(), minlength=mesh.n_nodes)
        num = np.stack(
            [np.bincount(conn.ravel(), weights=wq[..., i].ravel(), minlength=mesh.n_nodes) for i in range(3)], axis=1
        )
        with np.errstate(invalid="ignore", divide="ignore"):
            out[name] = (num / den[:, None], den)
    return out


def recover_flux(mesh: Mesh, materials: dict[str, Material], T) -> np.ndarray:
    """Recovered nodal flux (W/m^2).

    Each region is projected on its own, so the tangential flux jump at a
    material interface is kept; the returned nodal field volume-averages
    the region values at shared nodes for output.
    """
    T = np.asarray(T, dtype=float)
    num = np.zeros((mesh.n_nodes, 3))
    den = np.zeros(mesh.n_nodes)
    for q, d in _region_nodal_flux(mesh, materials, T).values():
        touched = d > 0
        num[touched] += q[touched] * d[touched, None]
        den += d
    return num / den[:, None]


def error_estimate(mesh: Mesh, materials: dict[str, Material], T) -> tuple[np.ndarray, float]:
    """Per-element ZZ indicator and the global error fraction.

    ``eta_e^2 = int (q* - q)^T k^-1 (q* - q) dV`` with q* interpolated from the
    region's recovered nodal flux. The fraction is ``sqrt(sum eta^2)`` over
    the energy norm ``sqrt(int q^T k^-1 q dV)`` of the solution.
    """
    T = np.asarray(T, dtype=float)
    eta2 = np.zeros(mesh.n_elements)
    energy = 0.0
    nodal = _region_nodal_flux(mesh, materials, T)
    for r, name in enumerate(mesh.regions):
        idx = np.nonzero(mesh.element_region == r)[0]
        conn = mesh.elements[idx]
        k = materials[name].thermal_conductivity
        q, w = gauss_flux(mesh.element_coords(idx), materials[name], T[conn])
        qs = np.einsum("ga,eai->egi", _N_GP, nodal[name][0][conn])
        eta2[idx] = np.einsum("eg,egi->e", w, (qs - q) ** 2) / k
        energy += float(np.einsum("eg,egi->", w, q**2) / k)
    eta = np.sqrt(eta2)
    frac = float(np.sqrt(eta2.sum() / energy)) if energy > 0 else 0.0
    return eta, frac
