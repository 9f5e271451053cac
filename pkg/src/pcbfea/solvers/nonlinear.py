"""Incremental Newton-Raphson solve with convergence logging."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .. import elements as el
from ..assembly import SystemMatrices, _region_chunks, add_weak_springs, assembly_plan, reduce_matrix
from ..errors import MaxIterationsExceeded, SolverDiverged
from .static import _load, factor_checked

logger = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e6
EASY_ITERATIONS = 4  # a cut-back increment converging this fast is doubled again


@dataclass
class ConvergenceHistory:
    """Per-iteration norms and per-substep bookkeeping.

    Iteration ``i`` belongs to substep ``substep[i]``; its norms describe
    the state after the i-th correction was applied. ``criterion`` is the
    larger of the two normalised checks, so a value <= 1 means converged.
    """

    tol_force: float
    tol_disp: float
    substep: list[int] = field(default_factory=list)
    iteration: list[int] = field(default_factory=list)
    load_factor: list[float] = field(default_factory=list)
    force_residual: list[float] = field(default_factory=list)
    force_criterion: list[float] = field(default_factory=list)
    displacement_increment: list[float] = field(default_factory=list)
    displacement_criterion: list[float] = field(default_factory=list)
    moment_residual: list[float] = field(default_factory=list)
    criterion: list[float] = field(default_factory=list)
    substep_load_factor: list[float] = field(default_factory=list)
    substep_iterations: list[int] = field(default_factory=list)
    substep_converged: list[bool] = field(default_factory=list)

    COLUMNS = (
        "substep",
        "iteration",
        "load_factor",
        "force_residual",
        "force_criterion",
        "displacement_increment",
        "displacement_criterion",
        "moment_residual",
        "criterion",
    )

    def __len__(self) -> int:
        return len(self.iteration)

    def rows(self):
        return list(zip(*(getattr(self, c) for c in self.COLUMNS)))

    def substep_slice(self, s: int) -> slice:
        idx = [i for i, k in enumerate(self.substep) if k == s]
        return slice(idx[0], idx[-1] + 1) if idx else slice(0, 0)

    def extend(self, other: "ConvergenceHistory") -> None:
        for c in self.COLUMNS:
            getattr(self, c).extend(getattr(other, c))

    @property
    def converged(self) -> bool:
        return bool(self.substep_converged) and all(self.substep_converged)


@dataclass
class NonlinearResult:
    u: np.ndarray
    history: ConvergenceHistory

    @property
    def displacement(self) -> np.ndarray:
        return self.u.reshape(-1, 3)

    @property
    def max_deformation(self) -> float:
        return float(np.linalg.norm(self.displacement, axis=1).max())


class _Structure:
    """Assembles tangent and internal force at a state (u, alpha)."""

    def __init__(self, system: SystemMatrices, nonlinear: bool):
        self.s = system
        self.mesh = system.mesh
        self.nonlinear = nonlinear
        self.plan = assembly_plan(self.mesh, 3)
        nb = 9 if system.formulation == "incompatible" else 0
        self.alpha = np.zeros((self.mesh.n_elements, nb))
        self._af = np.zeros_like(self.alpha)
        self._ac = np.zeros((self.mesh.n_elements, nb, 24))

    def evaluate(self, u):
        data = np.zeros(self.plan.nnz)
        fint = np.zeros(self.plan.n)
        for name, idx in _region_chunks(self.mesh):
            st = el.nonlinear_element_state(
                self.mesh.element_coords(idx),
                self.s.materials[name],
                u[self.plan.edofs[idx]],
                self.alpha[idx],
                self.nonlinear,
                self.s.formulation,
            )
            pos = self.plan.positions(idx).ravel()
            data += np.bincount(pos, weights=st.stiffness.reshape(-1), minlength=self.plan.nnz)
            fint += np.bincount(self.plan.edofs[idx].ravel(), weights=st.force.ravel(), minlength=self.plan.n)
            self._af[idx], self._ac[idx] = st.alpha_force, st.alpha_coupling
        kw = self.s.weak_spring_stiffness
        Kt = add_weak_springs(self.plan.matrix(data), kw)
        return Kt, fint + kw * u

    def advance(self, du):
        """Update the condensed internal modes after a displacement correction."""
        if self.alpha.shape[1]:
            self.alpha -= self._af + np.einsum("eij,ej->ei", self._ac, du[self.plan.edofs])


def moment_about(points, forces, centre) -> np.ndarray:
    return np.cross(points - centre, forces).sum(axis=0)


def solve_newton_raphson(
    system: SystemMatrices,
    load,
    substeps: int = 5,
    tol_force: float = 0.005,
    tol_disp: float = 0.005,
    max_iterations: int = 25,
    geometry: str = "nonlinear",
    max_cutbacks: int = 0,
) -> NonlinearResult:
    """Apply ``load`` in equal increments, iterating each to equilibrium.

    A substep is converged when the out-of-balance force is at most
    ``tol_force`` times the applied load norm and the next Newton
    correction is at most ``tol_disp`` times the displacement norm.
    ``geometry="linear"`` drops the quadratic strain terms.

    With ``max_cutbacks > 0`` a substep that diverges or runs out of
    iterations is restarted from its last equilibrium with half the load
    increment, up to that many halvings. Only the successful attempt is
    kept in the history, so substeps may then be unequal. An increment
    that converges quickly after a cutback is doubled for the next one.
    """
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    if tol_force <= 0 or tol_disp <= 0:
        raise ValueError("tolerances must be positive")
    if geometry not in ("nonlinear", "linear"):
        raise ValueError("geometry must be 'nonlinear' or 'linear'")
    if max_cutbacks < 0:
        raise ValueError("max_cutbacks must be >= 0")
    f_ext = _load(system, load)
    body = _Structure(system, geometry == "nonlinear")
    hist = ConvergenceHistory(tol_force, tol_disp)
    u = system.dofmap.full(np.zeros(len(system.dofmap.free)))

    lam, s, depth = 0.0, 1, 0
    step = 1.0 / substeps
    while lam < 1.0 - 1e-12:
        target = min(lam + step, 1.0)
        saved = body.alpha.copy()
        trial = ConvergenceHistory(tol_force, tol_disp)
        try:
            u_new, it, ok = _substep(system, body, f_ext, u, target, s, trial, max_iterations)
        except SolverDiverged:
            if depth >= max_cutbacks:
                raise
            u_new, it, ok = None, 0, False
        if not ok and depth < max_cutbacks:
            body.alpha = saved
            step /= 2
            depth += 1
            logger.info("substep %d cut back to load increment %.4g", s, step)
            continue
        hist.extend(trial)
        hist.substep_load_factor.append(target)
        hist.substep_iterations.append(it)
        hist.substep_converged.append(ok)
        if not ok:
            raise MaxIterationsExceeded(
                f"substep {s} did not converge in {max_iterations} iterations", history=hist, displacement=u_new
            )
        u, lam, s = u_new, target, s + 1
        if depth and it <= EASY_ITERATIONS:
            step *= 2
            depth -= 1
    return NonlinearResult(u, hist)


def _substep(system, body, f_ext, u, lam, s, hist, max_iterations):
    """Newton iterations for one load level; returns (u, iterations, converged)."""
    dm = system.dofmap
    free = dm.free
    centre = system.mesh.centroid()
    f = lam * f_ext[free]
    fref = np.linalg.norm(f) or 1.0
    Kt, fint = body.evaluate(u)
    r = f - fint[free]
    du = factor_checked(reduce_matrix(Kt, dm)).solve(r)
    for it in range(1, max_iterations + 1):
        step = np.zeros_like(u)
        step[free] = du
        u = u + step
        body.advance(step)
        Kt, fint = body.evaluate(u)
        r = f - fint[free]
        if not np.all(np.isfinite(r)) or np.linalg.norm(r) > DIVERGENCE_FACTOR * fref:
            raise SolverDiverged(f"residual blew up in substep {s}, iteration {it}")
        du = factor_checked(reduce_matrix(Kt, dm)).solve(r)
        rn, dn, un = np.linalg.norm(r), np.linalg.norm(du), np.linalg.norm(u[free])
        rfull = np.zeros_like(u)
        rfull[free] = r
        mom = moment_about(system.mesh.nodes, rfull.reshape(-1, 3), centre)
        fc = hist.tol_force * fref
        uc = hist.tol_disp * un
        crit = max(rn / fc, dn / uc if uc > 0 else (0.0 if dn == 0 else np.inf))
        hist.substep.append(s)
        hist.iteration.append(it)
        hist.load_factor.append(lam)
        hist.force_residual.append(float(rn))
        hist.force_criterion.append(float(fc))
        hist.displacement_increment.append(float(np.linalg.norm(step)))
        hist.displacement_criterion.append(float(uc))
        hist.moment_residual.append(float(np.linalg.norm(mom)))
        hist.criterion.append(float(crit))
        logger.debug("substep %d it %d |r|=%.3e |du|=%.3e", s, it, rn, dn)
        if crit <= 1.0:
            return u, it, True
    return u, max_iterations, False
