"""Generalized symmetric eigensolver for natural frequencies."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..assembly import SystemMatrices, reduce_matrix, strain_energy_form
from ..errors import ConvergenceFailure, IndefiniteMass
from ..linalg import Factor

logger = logging.getLogger(__name__)

DENSE_LIMIT = 1500  # free dofs below which a dense eigensolve is used
RESIDUAL_TOL = 1e-8
GAP = 1e-8  # Ritz values below this fraction of the largest count as near-null


@dataclass
class ModeSet:
    """Mass-normalised eigenpairs, ascending.

    ``shapes`` has one column per mode over all structural dofs (constrained
    dofs are zero) or over whatever dof space the solver was given.
    """

    eigenvalues: np.ndarray  # omega^2, rad^2/s^2
    shapes: np.ndarray
    prestressed: bool = False
    residuals: np.ndarray | None = None

    @property
    def frequencies(self) -> np.ndarray:
        # tiny negative eigenvalues of semidefinite problems report as 0 Hz
        return np.sqrt(np.clip(self.eigenvalues, 0.0, None)) / (2 * np.pi)

    @property
    def n_modes(self) -> int:
        return len(self.eigenvalues)

    def __len__(self) -> int:
        return self.n_modes


def _norm1(A) -> float:
    return float(abs(A).sum(axis=0).max()) if sp.issparse(A) else float(np.abs(A).sum(axis=0).max())


def modal_residuals(K, M, lam, V) -> np.ndarray:
    """Normwise backward error ``|K v - lam M v| / ((|K| + |lam| |M|) |v|)`` per mode."""
    R = K @ V - (M @ V) * lam
    nk, nm = _norm1(K), _norm1(M)
    return np.linalg.norm(R, axis=0) / ((nk + np.abs(lam) * nm) * np.linalg.norm(V, axis=0))


def default_shift(K, M) -> float:
    """Small negative shift keeping ``K - sigma M`` positive definite for semidefinite K."""
    dk, dm = K.diagonal(), M.diagonal()
    lam_max = float(np.max(dk[dm > 0] / dm[dm > 0])) if np.any(dm > 0) else 1.0
    return -max(1.0, 1e4 * np.finfo(float).eps * lam_max)


def _split(Kr, Mr):
    """Index of a spectral gap separating near-null Ritz values, or None.

    A symmetric eigensolve is accurate to eps * |Kr| in absolute terms, which
    buries rigid-body eigenvalues next to elastic ones. Solving the two
    groups separately is exact up to coupling^2 / gap, which is checked.
    """
    q = np.diag(Kr) / np.diag(Mr)
    order = np.argsort(q)
    top = np.abs(q).max()
    small = order[q[order] < GAP * top]
    if len(small) in (0, len(q)):
        return None
    big = order[len(small):]
    gap = q[big].min()
    Ksb, Msb = Kr[np.ix_(small, big)], Mr[np.ix_(small, big)]
    coupling = np.abs(Ksb).max() + gap * np.abs(Msb).max()
    # only split when that beats the eps * |Kr| floor of a joint solve
    if coupling**2 / gap > np.finfo(float).eps * top * GAP:
        return None
    return small, big


def _ritz(V, K, M, stiffness_form):
    Kr = stiffness_form(V) if stiffness_form is not None else V.T @ (K @ V)
    Mr = V.T @ (M @ V)
    Kr, Mr = 0.5 * (Kr + Kr.T), 0.5 * (Mr + Mr.T)
    groups = _split(Kr, Mr) or (np.arange(len(Kr)),)
    lams, vecs = [], []
    for g in groups:
        try:
            lam, Q = sla.eigh(Kr[np.ix_(g, g)], Mr[np.ix_(g, g)])
        except sla.LinAlgError as exc:
            raise IndefiniteMass("projected mass matrix is not positive definite") from exc
        lams.append(lam)
        vecs.append(V[:, g] @ Q)
    return np.concatenate(lams), np.hstack(vecs)


def solve_modal(
    K,
    M,
    n_modes: int,
    shift: float | None = None,
    stiffness_form: Callable | None = None,
    prestressed: bool = False,
    dense_limit: int = DENSE_LIMIT,
) -> ModeSet:
    """Lowest ``n_modes`` eigenpairs of ``K phi = omega^2 M phi``.

    Large problems use shift-invert Lanczos (ARPACK) around ``shift``
    (default: a small negative value, so semidefinite K is handled too).
    The converged subspace is then refined by a Rayleigh-Ritz step;
    ``stiffness_form(V) -> V^T K V`` can supply a more accurate projected
    stiffness, which matters for near-zero rigid-body eigenvalues.
    """
    n = K.shape[0]
    # complete extraction is possible only on the dense path
    top = n if n <= dense_limit else n - 1
    if not 1 <= n_modes <= top:
        raise ValueError(f"n_modes must be in [1, {top}]")
    Md = M.diagonal()
    if np.any(Md <= 0):
        raise IndefiniteMass("mass matrix has non-positive diagonal entries")

    if n <= dense_limit:
        Kd = K.toarray() if sp.issparse(K) else np.asarray(K)
        Mdn = M.toarray() if sp.issparse(M) else np.asarray(M)
        try:
            _, V = sla.eigh(Kd, Mdn, subset_by_index=[0, n_modes - 1])
        except sla.LinAlgError as exc:
            raise IndefiniteMass("mass matrix is not positive definite") from exc
    else:
        sigma = default_shift(K, M) if shift is None else float(shift)
        A = (K - sigma * M).tocsc() if sigma else K
        F = Factor(A, refine=1)
        op = spla.LinearOperator(A.shape, matvec=F.solve, dtype=float)
        ncv = min(n, max(2 * n_modes + 1, n_modes + 20))
        try:
            _, V = spla.eigsh(K, n_modes, M, sigma=sigma, which="LM", OPinv=op, ncv=ncv, tol=1e-13)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceFailure(f"eigensolver did not converge: {exc}") from exc
    lam, V = _ritz(V, K, M, stiffness_form)
    order = np.argsort(lam)
    lam, V = lam[order], V[:, order]
    res = modal_residuals(K, M, lam, V)
    if np.any(res > RESIDUAL_TOL):
        logger.warning("modal residual %.2e exceeds %.0e", res.max(), RESIDUAL_TOL)
    return ModeSet(lam, V, prestressed, res)


def modal_analysis(
    system: SystemMatrices,
    n_modes: int = 6,
    prestressed: bool = False,
    shift: float | None = None,
    energy_form: bool = True,
) -> ModeSet:
    """Eigensolve of a structural system on its free dofs; shapes cover all dofs."""
    if system.M is None:
        raise ValueError("system has no mass matrix")
    dm = system.dofmap
    Keff = reduce_matrix(system.stiffness(prestressed), dm)
    Mf = reduce_matrix(system.M, dm)
    form = None
    if energy_form:
        Ksig = reduce_matrix(system.Ksigma, dm) if prestressed else None
        kw = system.weak_spring_stiffness

        def form(V):
            out = strain_energy_form(system.mesh, system.materials, dm.full(V, fill=0.0), system.formulation)
            if Ksig is not None:
                out = out + V.T @ (Ksig @ V)
            if kw:
                out = out + kw * (V.T @ V)
            return out

    ms = solve_modal(Keff, Mf, n_modes, shift, form, prestressed)
    ms.shapes = dm.full(ms.shapes, fill=0.0)
    return ms
