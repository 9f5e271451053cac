"""Hex8 isoparametric element kernels.

Node ordering follows the VTK hexahedron: nodes 0-3 on the reference face
zeta = -1 (counter-clockwise seen from +zeta), nodes 4-7 above them.
Structural dofs are interleaved per node (u0x, u0y, u0z, u1x, ...).

Voigt ordering is (xx, yy, zz, xy, yz, zx) everywhere in the package, with
engineering shear strains.

Every kernel is vectorised: ``coords`` may be a single element ``(8, 3)`` or
a batch ``(n, 8, 3)``; the result has the matching leading shape.

Two displacement formulations are available:

``"standard"``
    plain trilinear interpolation, full 2x2x2 Gauss integration.
``"incompatible"`` (default)
    the same element enriched with the nine Wilson bubble modes
    (1 - xi^2, 1 - eta^2, 1 - zeta^2 per component), integrated with the
    Taylor correction so the constant-strain patch test still holds, and
    statically condensed. It removes the shear locking that makes the plain
    element unusable for a 0.5 mm board meshed with millimetre-sized cells.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DegenerateElement

NODE_REF = np.array(
    [
        [-1, -1, -1],
        [1, -1, -1],
        [1, 1, -1],
        [-1, 1, -1],
        [-1, -1, 1],
        [1, -1, 1],
        [1, 1, 1],
        [-1, 1, 1],
    ],
    dtype=float,
)

# outward-oriented local faces (counter-clockwise seen from outside)
FACES = np.array(
    [
        [0, 3, 2, 1],  # zeta = -1
        [4, 5, 6, 7],  # zeta = +1
        [0, 1, 5, 4],  # eta = -1
        [1, 2, 6, 5],  # xi = +1
        [2, 3, 7, 6],  # eta = +1
        [3, 0, 4, 7],  # xi = -1
    ]
)

FORMULATIONS = ("incompatible", "standard")


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n, 3) reference coordinates
    weights: np.ndarray  # (n,)


def gauss_rule(order: int = 2) -> QuadratureRule:
    """Tensor-product Gauss-Legendre rule on [-1, 1]^3."""
    x, w = np.polynomial.legendre.leggauss(order)
    pts = np.array([(a, b, c) for c in x for b in x for a in x])
    wts = np.array([wa * wb * wc for wc in w for wb in w for wa in w])
    return QuadratureRule(pts, wts)


GAUSS = gauss_rule(2)


def shape_functions(xi) -> tuple[np.ndarray, np.ndarray]:
    """Trilinear shape functions and their reference gradients.

    Returns ``N`` with shape ``(..., 8)`` and ``dN`` with shape ``(..., 8, 3)``
    for reference points ``xi`` of shape ``(..., 3)``.
    """
    xi = np.asarray(xi, dtype=float)
    s = 1.0 + xi[..., None, :] * NODE_REF  # (..., 8, 3)
    N = 0.125 * s[..., 0] * s[..., 1] * s[..., 2]
    dN = np.empty(s.shape)
    dN[..., 0] = 0.125 * NODE_REF[:, 0] * s[..., 1] * s[..., 2]
    dN[..., 1] = 0.125 * NODE_REF[:, 1] * s[..., 0] * s[..., 2]
    dN[..., 2] = 0.125 * NODE_REF[:, 2] * s[..., 0] * s[..., 1]
    return N, dN


_N_GP, _DN_GP = shape_functions(GAUSS.points)  # (8gp, 8), (8gp, 8, 3)
_N_C, _DN_C = shape_functions(np.zeros(3))


def elasticity_matrix(E: float, nu: float) -> np.ndarray:
    """Isotropic 6x6 constitutive matrix in Voigt form."""
    lam = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))
    mu = E / (2.0 * (1.0 + nu))
    D = np.zeros((6, 6))
    D[:3, :3] = lam
    D[np.arange(3), np.arange(3)] += 2.0 * mu
    D[np.arange(3, 6), np.arange(3, 6)] = mu
    return D


def _batch(coords):
    X = np.asarray(coords, dtype=float)
    single = X.ndim == 2
    if single:
        X = X[None]
    return X, single


def _unbatch(a, single):
    return a[0] if single else a


def jacobian(coords, dN) -> np.ndarray:
    """``J[..., i, j] = d x_i / d xi_j`` for batched coords ``(n, 8, 3)``."""
    return np.einsum("eai,...aj->e...ij", coords, dN)


def _geometry(X, check=True):
    """Jacobians, determinants and physical gradients at the Gauss points."""
    J = jacobian(X, _DN_GP)  # (n, g, 3, 3)
    detJ = np.linalg.det(J)
    if check and np.any(detJ <= 0.0):
        bad = np.unique(np.nonzero(detJ <= 0.0)[0])
        raise DegenerateElement(f"non-positive Jacobian in {len(bad)} element(s), first index {bad[0]}")
    invJ = np.linalg.inv(J)
    grad = np.einsum("gaj,egjk->egak", _DN_GP, invJ)  # (n, g, 8, 3)
    return J, detJ, grad


def strain_matrix(grad) -> np.ndarray:
    """Small-strain B matrices ``(..., 6, 3*m)`` from gradients ``(..., m, 3)``."""
    m = grad.shape[-2]
    B = np.zeros(grad.shape[:-2] + (6, 3 * m))
    gx, gy, gz = grad[..., 0], grad[..., 1], grad[..., 2]
    B[..., 0, 0::3] = gx
    B[..., 1, 1::3] = gy
    B[..., 2, 2::3] = gz
    B[..., 3, 0::3] = gy
    B[..., 3, 1::3] = gx
    B[..., 4, 1::3] = gz
    B[..., 4, 2::3] = gy
    B[..., 5, 0::3] = gz
    B[..., 5, 2::3] = gx
    return B


def _bubble_gradients(X, detJ):
    """Physical gradients of the three bubble modes with the Taylor correction.

    The gradients use the centroid Jacobian and are scaled by detJ0 / detJ so
    that they integrate to zero over any element shape.
    """
    J0 = jacobian(X, _DN_C)  # (n, 3, 3)
    det0 = np.linalg.det(J0)
    inv0 = np.linalg.inv(J0)
    # d(1 - xi_k^2)/d xi_j = -2 xi_k delta_kj
    dP = -2.0 * GAUSS.points[:, :, None] * np.eye(3)  # (g, 3 modes, 3)
    grad = np.einsum("gmj,ejk->egmk", dP, inv0)
    return grad * (det0[:, None] / detJ)[:, :, None, None]


def element_stiffness(coords, material, formulation: str = "incompatible") -> np.ndarray:
    """Linear elastic stiffness ``(24, 24)`` (or batched)."""
    X, single = _batch(coords)
    D = elasticity_matrix(material.youngs_modulus, material.poisson_ratio)
    _, detJ, grad = _geometry(X)
    wdet = detJ * GAUSS.weights
    B = strain_matrix(grad)
    DB = np.einsum("ij,egjk->egik", D, B)
    K = np.einsum("eg,egji,egjk->eik", wdet, B, DB)
    if formulation == "incompatible":
        Ba = strain_matrix(_bubble_gradients(X, detJ))
        Kua = np.einsum("eg,egji,egjk->eik", wdet, B, np.einsum("ij,egjk->egik", D, Ba))
        Kaa = np.einsum("eg,egji,egjk->eik", wdet, Ba, np.einsum("ij,egjk->egik", D, Ba))
        K = K - Kua @ np.linalg.solve(Kaa, np.swapaxes(Kua, 1, 2))
    elif formulation != "standard":
        raise ValueError(f"unknown formulation {formulation!r}")
    K = 0.5 * (K + np.swapaxes(K, 1, 2))
    return _unbatch(K, single)


def element_mass(coords, material, lumping: str = "consistent") -> np.ndarray:
    """Mass matrix ``(24, 24)``; ``lumping`` is ``"consistent"`` or ``"row_sum"``."""
    X, single = _batch(coords)
    _, detJ, _ = _geometry(X)
    wdet = detJ * GAUSS.weights
    m = material.density * np.einsum("eg,ga,gb->eab", wdet, _N_GP, _N_GP)
    if lumping == "row_sum":
        m = _diag(m.sum(axis=2))
    elif lumping != "consistent":
        raise ValueError(f"unknown lumping {lumping!r}")
    M = _expand3(m)
    return _unbatch(M, single)


def _diag(v):
    out = np.zeros(v.shape + (v.shape[-1],))
    idx = np.arange(v.shape[-1])
    out[..., idx, idx] = v
    return out


def _expand3(s):
    """Scalar nodal matrix ``(n, 8, 8)`` -> interleaved vector matrix ``(n, 24, 24)``."""
    n = s.shape[0]
    out = np.zeros((n, 8, 3, 8, 3))
    for i in range(3):
        out[:, :, i, :, i] = s
    return out.reshape(n, 24, 24)


def voigt_to_tensor(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    T = np.empty(s.shape[:-1] + (3, 3))
    T[..., 0, 0], T[..., 1, 1], T[..., 2, 2] = s[..., 0], s[..., 1], s[..., 2]
    T[..., 0, 1] = T[..., 1, 0] = s[..., 3]
    T[..., 1, 2] = T[..., 2, 1] = s[..., 4]
    T[..., 2, 0] = T[..., 0, 2] = s[..., 5]
    return T


def element_geometric_stiffness(coords, stress) -> np.ndarray:
    """Initial-stress (stress-stiffening) matrix.

    ``stress`` holds Cauchy stress in Voigt form, either one 6-vector per
    element or one per Gauss point (``(8, 6)`` / ``(n, 8, 6)``).
    """
    X, single = _batch(coords)
    S = np.asarray(stress, dtype=float)
    if single:
        S = S[None]
    if S.ndim == 2:
        S = np.repeat(S[:, None, :], len(GAUSS.weights), axis=1)
    _, detJ, grad = _geometry(X)
    wdet = detJ * GAUSS.weights
    sig = voigt_to_tensor(S)  # (n, g, 3, 3)
    H = np.einsum("eg,egai,egij,egbj->eab", wdet, grad, sig, grad)
    return _unbatch(_expand3(H), single)


def element_thermal(coords, material, source: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Conductivity matrix ``(8, 8)`` and nodal load for a volumetric source in W/m^3."""
    X, single = _batch(coords)
    _, detJ, grad = _geometry(X)
    wdet = detJ * GAUSS.weights
    kt = material.thermal_conductivity * np.einsum("eg,egai,egbi->eab", wdet, grad, grad)
    kt = 0.5 * (kt + np.swapaxes(kt, 1, 2))
    q = np.asarray(source, dtype=float)
    load = np.einsum("eg,ga->ea", wdet, _N_GP) * (q[:, None] if q.ndim else q)
    return _unbatch(kt, single), _unbatch(load, single)


def element_volume(coords) -> np.ndarray:
    X, single = _batch(coords)
    _, detJ, _ = _geometry(X, check=False)
    return _unbatch(detJ @ GAUSS.weights, single)


def gauss_points_physical(coords) -> np.ndarray:
    X, single = _batch(coords)
    return _unbatch(np.einsum("ga,eai->egi", _N_GP, X), single)


def element_stress(coords, material, displacement, formulation: str = "incompatible") -> np.ndarray:
    """Cauchy stress (small strain) at the 8 Gauss points, ``(n, 8, 6)``.

    ``displacement`` is the element dof vector ``(24,)`` or ``(n, 24)``.
    """
    X, single = _batch(coords)
    u = np.asarray(displacement, dtype=float).reshape(X.shape[0], 24)
    D = elasticity_matrix(material.youngs_modulus, material.poisson_ratio)
    _, detJ, grad = _geometry(X)
    B = strain_matrix(grad)
    strain = np.einsum("egij,ej->egi", B, u)
    if formulation == "incompatible":
        wdet = detJ * GAUSS.weights
        Ba = strain_matrix(_bubble_gradients(X, detJ))
        DBa = np.einsum("ij,egjk->egik", D, Ba)
        Kau = np.einsum("eg,egji,egjk->eik", wdet, DBa, B)
        Kaa = np.einsum("eg,egji,egjk->eik", wdet, Ba, DBa)
        alpha = -np.linalg.solve(Kaa, np.einsum("eij,ej->ei", Kau, u)[..., None])[..., 0]
        strain = strain + np.einsum("egij,ej->egi", Ba, alpha)
    stress = np.einsum("ij,egj->egi", D, strain)
    return _unbatch(stress, single)


class NonlinearState(NamedTuple):
    """Condensed element response for one Newton iteration."""

    stiffness: np.ndarray  # (n, 24, 24) condensed tangent
    force: np.ndarray  # (n, 24) condensed internal force
    alpha_force: np.ndarray  # (n, 9) Kaa^-1 f_alpha
    alpha_coupling: np.ndarray  # (n, 9, 24) Kaa^-1 K_alpha_u


def _gauss_sum(wdet, A, C):
    """``sum_g w_g A_g^T C_g`` as one batched matmul over the stacked Gauss points."""
    n, g, r = A.shape[:3]
    Aw = (A * wdet[..., None, None]).reshape(n, g * r, -1)
    return np.swapaxes(Aw, 1, 2) @ C.reshape(n, g * r, -1)


def _nonlinear_strain_matrix(grad, F):
    """Variation of Green-Lagrange strain, ``dE = B_NL du``."""
    n, g = grad.shape[:2]
    B = np.zeros((n, g, 6, 24))
    gx, gy, gz = grad[..., 0], grad[..., 1], grad[..., 2]
    for i in range(3):
        Fi0, Fi1, Fi2 = F[..., i, 0:1], F[..., i, 1:2], F[..., i, 2:3]
        B[..., 0, i::3] = Fi0 * gx
        B[..., 1, i::3] = Fi1 * gy
        B[..., 2, i::3] = Fi2 * gz
        B[..., 3, i::3] = Fi0 * gy + Fi1 * gx
        B[..., 4, i::3] = Fi1 * gz + Fi2 * gy
        B[..., 5, i::3] = Fi2 * gx + Fi0 * gz
    return B


def nonlinear_element_state(
    coords, material, displacement, alpha=None, nonlinear: bool = True, formulation: str = "incompatible"
) -> NonlinearState:
    """Total-Lagrangian St. Venant-Kirchhoff response of incompatible-mode hex8.

    The bubble modes enhance the Green-Lagrange strain additively, so at
    small displacement the condensed tangent reduces exactly to
    :func:`element_stiffness`. With ``nonlinear=False`` the quadratic strain
    terms are dropped and the response is linear. ``formulation="standard"``
    has no bubble modes and ``alpha`` has zero columns.
    """
    X, _ = _batch(coords)
    n = X.shape[0]
    u = np.asarray(displacement, dtype=float).reshape(n, 8, 3)
    nb = 9 if formulation == "incompatible" else 0
    a = np.zeros((n, nb)) if alpha is None else np.asarray(alpha, dtype=float).reshape(n, nb)
    D = elasticity_matrix(material.youngs_modulus, material.poisson_ratio)
    _, detJ, grad = _geometry(X)
    wdet = detJ * GAUSS.weights
    Ba = strain_matrix(_bubble_gradients(X, detJ)) if nb else np.zeros(grad.shape[:2] + (6, 0))

    H = np.einsum("eai,egaj->egij", u, grad)  # displacement gradient
    if nonlinear:
        F = np.eye(3) + H
        Egl = 0.5 * (H + np.swapaxes(H, -1, -2) + np.einsum("egki,egkj->egij", H, H))
    else:
        F = np.broadcast_to(np.eye(3), H.shape)
        Egl = 0.5 * (H + np.swapaxes(H, -1, -2))
    E = np.stack(
        [Egl[..., 0, 0], Egl[..., 1, 1], Egl[..., 2, 2], 2 * Egl[..., 0, 1], 2 * Egl[..., 1, 2], 2 * Egl[..., 2, 0]],
        axis=-1,
    )
    E = E + np.einsum("egij,ej->egi", Ba, a)
    S = np.einsum("ij,egj->egi", D, E)  # second Piola-Kirchhoff

    B = _nonlinear_strain_matrix(grad, F)
    DB = D @ B
    DBa = D @ Ba
    f_u = _gauss_sum(wdet, B, S[..., None])[..., 0]
    f_a = _gauss_sum(wdet, Ba, S[..., None])[..., 0]
    Kuu = _gauss_sum(wdet, B, DB)
    if nonlinear:
        Kuu = Kuu + _expand3((wdet[..., None, None] * (grad @ voigt_to_tensor(S) @ np.swapaxes(grad, -1, -2))).sum(axis=1))
    Kua = _gauss_sum(wdet, B, DBa)
    Kaa = _gauss_sum(wdet, Ba, DBa)

    if nb:
        sol = np.linalg.solve(Kaa, np.concatenate([f_a[..., None], np.swapaxes(Kua, 1, 2)], axis=2))
        alpha_force, alpha_coupling = sol[..., 0], sol[..., 1:]
    else:
        alpha_force, alpha_coupling = np.zeros((n, 0)), np.zeros((n, 0, 24))
    K = Kuu - Kua @ alpha_coupling
    K = 0.5 * (K + np.swapaxes(K, 1, 2))
    f = f_u - np.einsum("eij,ej->ei", Kua, alpha_force)
    return NonlinearState(K, f, alpha_force, alpha_coupling)


def element_strain_energy_form(coords, material, modes, formulation: str = "incompatible") -> np.ndarray:
    """Bilinear strain-energy matrix ``sum_e int eps_i^T D eps_j dV`` for mode columns.

    ``modes`` holds element dof vectors ``(n, 24, k)``. Strains are formed
    from the displacement gradients, so rigid-body content contributes only
    at the square of rounding level; this is what makes near-zero
    eigenvalues computable, unlike ``phi^T K phi`` with the assembled K.
    """
    X, _ = _batch(coords)
    U = np.asarray(modes, dtype=float).reshape(X.shape[0], 24, -1)
    D = elasticity_matrix(material.youngs_modulus, material.poisson_ratio)
    _, detJ, grad = _geometry(X)
    wdet = detJ * GAUSS.weights
    B = strain_matrix(grad)
    eps = np.einsum("egij,ejk->egik", B, U)
    if formulation == "incompatible":
        Ba = strain_matrix(_bubble_gradients(X, detJ))
        DBa = np.einsum("ij,egjk->egik", D, Ba)
        Kau = np.einsum("eg,egji,egjk->eik", wdet, DBa, B)
        Kaa = np.einsum("eg,egji,egjk->eik", wdet, Ba, DBa)
        alpha = -np.linalg.solve(Kaa, np.einsum("eij,ejk->eik", Kau, U))
        eps = eps + np.einsum("egij,ejk->egik", Ba, alpha)
    return np.einsum("eg,egia,ij,egjb->ab", wdet, eps, D, eps)
