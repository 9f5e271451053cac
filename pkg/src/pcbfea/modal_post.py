"""Participation factors, effective masses and mode-set comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import CountMismatch, NonOrthonormalModes
from .solvers.modal import ModeSet

DIRECTIONS = ("X", "Y", "Z", "RX", "RY", "RZ")
ORTHO_TOL = 1e-8


def mass_centroid(M, nodes) -> np.ndarray:
    """Centre of mass from the x-translation block of a mass matrix."""
    ones = np.zeros(M.shape[0])
    ones[0::3] = 1.0
    w = (M @ ones)[0::3]
    return (w @ nodes) / w.sum()


def rigid_body_vectors(nodes, centre=None) -> np.ndarray:
    """Unit translations and small rotations about ``centre``, shape ``(3n, 6)``."""
    nodes = np.asarray(nodes, dtype=float)
    c = nodes.mean(axis=0) if centre is None else np.asarray(centre, dtype=float)
    d = nodes - c
    n = len(nodes)
    R = np.zeros((n, 3, 6))
    for i in range(3):
        R[:, i, i] = 1.0
        axis = np.eye(3)[i]
        R[:, :, 3 + i] = np.cross(axis, d)
    return R.reshape(3 * n, 6)


@dataclass
class ParticipationTable:
    frequencies: np.ndarray  # Hz
    factors: np.ndarray  # (modes, 6) Gamma
    effective_mass: np.ndarray  # (modes, 6) kg or kg m^2
    total: np.ndarray  # (6,) rigid-body mass and inertia about the centre
    centre: np.ndarray

    @property
    def cumulative_ratio(self) -> np.ndarray:
        return np.cumsum(self.effective_mass, axis=0) / self.total

    @property
    def captured(self) -> np.ndarray:
        return self.effective_mass.sum(axis=0)

    def __len__(self) -> int:
        return len(self.frequencies)


def participation(modes: ModeSet | np.ndarray, M, nodes=None, centre=None, influence=None, tol=ORTHO_TOL) -> ParticipationTable:
    """Gamma = phi^T M r per rigid-body direction; effective mass = Gamma^2.

    Rotations are taken about ``centre`` (default: the centre of mass).
    Pass ``influence`` to supply custom direction vectors instead.
    """
    Phi = modes.shapes if isinstance(modes, ModeSet) else np.asarray(modes)
    freqs = modes.frequencies if isinstance(modes, ModeSet) else np.full(Phi.shape[1], np.nan)
    MPhi = M @ Phi
    G = Phi.T @ MPhi
    err = np.abs(G - np.eye(G.shape[0])).max()
    if err > tol:
        raise NonOrthonormalModes(f"modes deviate from mass-orthonormality by {err:.2e}")
    if influence is None:
        if nodes is None:
            raise ValueError("nodes are needed to build rigid-body vectors")
        c = mass_centroid(M, nodes) if centre is None else np.asarray(centre, dtype=float)
        R = rigid_body_vectors(nodes, c)
    else:
        R = np.asarray(influence, dtype=float)
        c = np.full(3, np.nan) if centre is None else np.asarray(centre, dtype=float)
    gamma = MPhi.T @ R
    total = np.einsum("ij,ij->j", R, M @ R)
    return ParticipationTable(np.asarray(freqs), gamma, gamma**2, total, c)


def mac_matrix(a, b) -> np.ndarray:
    """Modal assurance criterion between the columns of ``a`` and ``b``."""
    a, b = np.asarray(a), np.asarray(b)
    num = (a.T @ b) ** 2
    return num / np.outer(np.einsum("ij,ij->j", a, a), np.einsum("ij,ij->j", b, b))


@dataclass
class ModeComparison:
    pairing: np.ndarray  # index into b for each mode of a
    mac: np.ndarray  # full MAC matrix (a x b)
    frequency_a: np.ndarray
    frequency_b: np.ndarray  # paired with a
    delta: np.ndarray  # f_b - f_a, Hz
    percent: np.ndarray  # 100 * delta / f_a (nan where f_a == 0)

    @property
    def paired_mac(self) -> np.ndarray:
        return self.mac[np.arange(len(self.pairing)), self.pairing]


def compare_modesets(a: ModeSet, b: ModeSet) -> ModeComparison:
    """Pair modes by maximal total MAC and report frequency differences."""
    if len(a) != len(b):
        raise CountMismatch(f"mode counts differ: {len(a)} vs {len(b)}")
    mac = mac_matrix(a.shapes, b.shapes)
    rows, cols = linear_sum_assignment(-mac)
    pairing = cols[np.argsort(rows)]
    fa, fb = a.frequencies, b.frequencies[pairing]
    delta = fb - fa
    with np.errstate(divide="ignore", invalid="ignore"):
        pct = np.where(fa > 0, 100.0 * delta / np.where(fa > 0, fa, 1.0), np.nan)
    return ModeComparison(pairing, mac, fa, fb, delta, pct)
