"""Rayleigh damping and Newmark time integration."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ..assembly import SystemMatrices, reduce_matrix
from ..errors import DegenerateFrequencies, NonPositiveDt, StepFailure
from ..linalg import Factor
from ..model import LoadCase


@dataclass(frozen=True)
class RayleighDamping:
    alpha: float = 0.0  # 1/s, mass proportional
    beta: float = 0.0  # s, stiffness proportional

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("Rayleigh coefficients must be >= 0")

    def ratio(self, frequency):
        """Modal damping ratio at ``frequency`` (Hz)."""
        w = 2 * np.pi * np.asarray(frequency, dtype=float)
        return self.alpha / (2 * w) + self.beta * w / 2

    def matrix(self, K, M):
        return self.alpha * M + self.beta * K


def fit_rayleigh(zeta: float, f_a: float, f_b: float) -> RayleighDamping:
    """Coefficients giving damping ratio ``zeta`` exactly at ``f_a`` and ``f_b``."""
    if zeta < 0:
        raise ValueError("damping ratio must be >= 0")
    if f_a <= 0 or f_b <= 0:
        raise ValueError("frequencies must be positive")
    if np.isclose(f_a, f_b, rtol=1e-12, atol=0.0):
        raise DegenerateFrequencies("two distinct frequencies are needed to fit Rayleigh damping")
    wa, wb = 2 * np.pi * f_a, 2 * np.pi * f_b
    return RayleighDamping(2 * zeta * wa * wb / (wa + wb), 2 * zeta / (wa + wb))


def damping_sweep(start: float, stop: float, step: float) -> np.ndarray:
    """Inclusive range of damping ratios, e.g. ``0.001:0.005:0.001``."""
    if step <= 0 or stop < start:
        raise ValueError("sweep needs step > 0 and stop >= start")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(n), 12)


@dataclass
class TransientResult:
    times: np.ndarray
    probes: np.ndarray  # dof indices recorded
    displacement: np.ndarray  # (steps + 1, n_probes)
    velocity: np.ndarray
    acceleration: np.ndarray
    energy: np.ndarray  # kinetic + strain, per step
    max_deformation: np.ndarray | None = None  # largest nodal |u| per step


def _as_operator(A):
    return sp.csr_matrix(A) if not sp.issparse(A) else A.tocsr()


def _force_function(force, n) -> Callable[[float], np.ndarray]:
    if callable(force):
        return force
    if force is None:
        zero = np.zeros(n)
        return lambda t: zero
    f = np.asarray(force, dtype=float)
    return lambda t: f


def solve_newmark(
    K,
    M,
    force=None,
    dt: float = 1e-3,
    t_end: float = 1.0,
    damping: RayleighDamping | None = None,
    C=None,
    u0=None,
    v0=None,
    gamma: float = 0.5,
    beta: float = 0.25,
    probes=None,
    monitor: Callable[[np.ndarray], float] | None = None,
) -> TransientResult:
    """Integrate ``M a + C v + K u = F(t)`` with the Newmark family.

    ``force`` is a vector, a callable ``t -> vector`` or None. ``probes``
    selects the dofs whose histories are kept (all by default).
    ``monitor(u)`` is evaluated every step, e.g. the peak nodal deflection.
    """
    if dt <= 0:
        raise NonPositiveDt(f"time step must be positive, got {dt}")
    if t_end <= 0:
        raise ValueError("t_end must be positive")
    K, M = _as_operator(K), _as_operator(M)
    n = K.shape[0]
    if C is None:
        C = damping.matrix(K, M) if damping is not None else None
    else:
        C = _as_operator(C)
    F = _force_function(force, n)
    u = np.zeros(n) if u0 is None else np.array(u0, dtype=float)
    v = np.zeros(n) if v0 is None else np.array(v0, dtype=float)
    probes = np.arange(n) if probes is None else np.asarray(probes, dtype=np.int64)

    def cv(x):
        return C @ x if C is not None else 0.0

    try:
        Mf = Factor(M)
        a = Mf.solve(F(0.0) - cv(v) - K @ u)
        a0, a1 = 1.0 / (beta * dt * dt), gamma / (beta * dt)
        Keff = K + a0 * M + (a1 * C if C is not None else 0)
        Kf = Factor(Keff)
    except (RuntimeError, ArithmeticError) as exc:
        raise StepFailure(f"factorisation failed: {exc}") from exc

    steps = int(round(t_end / dt))
    times = dt * np.arange(steps + 1)
    U, V, A = (np.empty((steps + 1, len(probes))) for _ in range(3))
    energy = np.empty(steps + 1)
    mon = np.empty(steps + 1) if monitor else None

    def record(i):
        U[i], V[i], A[i] = u[probes], v[probes], a[probes]
        energy[i] = 0.5 * (v @ (M @ v) + u @ (K @ u))
        if monitor:
            mon[i] = monitor(u)

    record(0)
    for i in range(1, steps + 1):
        t = times[i]
        # predictor terms of the average-acceleration family
        pu = a0 * u + v / (beta * dt) + (0.5 / beta - 1) * a
        rhs = F(t) + M @ pu
        if C is not None:
            pv = a1 * u + (gamma / beta - 1) * v + dt * (0.5 * gamma / beta - 1) * a
            rhs = rhs + C @ pv
        un = Kf.solve(rhs)
        if not np.all(np.isfinite(un)):
            raise StepFailure(f"non-finite state at t = {t:g} s")
        an = a0 * (un - u) - v / (beta * dt) - (0.5 / beta - 1) * a
        v = v + dt * ((1 - gamma) * a + gamma * an)
        u, a = un, an
        record(i)
    return TransientResult(times, probes, U, V, A, energy, mon)


def transient_analysis(
    system: SystemMatrices,
    load_case: LoadCase,
    dt: float,
    t_end: float,
    damping: RayleighDamping | None = None,
    probe_nodes=None,
) -> TransientResult:
    """Newmark response of a supported structure; probes are node indices (3 dofs each)."""
    if system.M is None:
        raise ValueError("system has no mass matrix")
    dm = system.dofmap
    K = reduce_matrix(system.stiffness(), dm)
    M = reduce_matrix(system.M, dm)
    f0 = system.load(load_case)[dm.free]

    def force(t):
        return f0 * load_case.scale(t)

    pos = -np.ones(dm.n_dofs, dtype=np.int64)
    pos[dm.free] = np.arange(len(dm.free))
    probes = None
    if probe_nodes is not None:
        probes = pos[dm.dofs(probe_nodes)]
        if np.any(probes < 0):
            raise ValueError("probe nodes must not be fully constrained")

    def peak(uf):
        return float(np.linalg.norm(dm.full(uf, fill=0.0).reshape(-1, 3), axis=1).max())

    return solve_newmark(K, M, force, dt, t_end, damping=damping, probes=probes, monitor=peak)
