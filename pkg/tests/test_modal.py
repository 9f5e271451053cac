import numpy as np
import pytest
import scipy.sparse as sp

from pcbfea.assembly import DofMap, build_system
from pcbfea.errors import IndefiniteMass
from pcbfea.mesher import box_mesh
from pcbfea.solvers import modal_analysis, prestress, solve_modal, solve_static
from pcbfea.solvers.modal import default_shift, modal_residuals


def cantilever(material, div=(20, 2, 2), L=0.4, h=0.02, **kw):
    mesh = box_mesh((L, h, h), div)
    dm = DofMap(mesh.n_nodes).fix(mesh.node_sets["xmin"])
    return build_system(mesh, {"box": material}, dm, **kw)


def test_cantilever_fundamental_matches_beam_theory(steel):
    L, h = 0.4, 0.02
    system = cantilever(steel, L=L, h=h)
    ms = modal_analysis(system, 4)
    EI = steel.youngs_modulus * h**4 / 12
    beam = 1.8751040687**2 / (2 * np.pi) * np.sqrt(EI / (steel.density * h * h * L**4))
    # the two bending planes are degenerate for a square section
    assert ms.frequencies[0] == pytest.approx(beam, rel=0.02)
    assert ms.frequencies[1] == pytest.approx(ms.frequencies[0], rel=1e-8)
    assert ms.residuals.max() < 1e-8


def test_sparse_and_dense_paths_agree(steel):
    system = cantilever(steel, div=(12, 2, 2))
    dm = system.dofmap
    K = system.stiffness()[dm.free][:, dm.free]
    M = system.M[dm.free][:, dm.free]
    dense = solve_modal(K, M, 6)
    lanczos = solve_modal(K, M, 6, dense_limit=0)
    assert np.allclose(lanczos.eigenvalues, dense.eigenvalues, rtol=1e-10)
    # mass orthonormal shapes
    G = lanczos.shapes.T @ (M @ lanczos.shapes)
    assert np.abs(G - np.eye(6)).max() < 1e-10


def test_free_body_rigid_modes(steel):
    mesh = box_mesh((0.2, 0.1, 0.01), (8, 4, 1))
    free = build_system(mesh, {"box": steel}, DofMap(mesh.n_nodes))
    ms = modal_analysis(free, 8)
    assert np.all(ms.frequencies[:6] < 1e-4)
    assert ms.frequencies[6] > 100.0
    sprung = build_system(mesh, {"box": steel}, DofMap(mesh.n_nodes), weak_springs="default")
    mw = modal_analysis(sprung, 8)
    assert np.all(mw.eigenvalues[:6] > 0)
    assert np.all(mw.frequencies[:6] < 0.02)
    assert mw.frequencies[6:] == pytest.approx(ms.frequencies[6:], rel=1e-6)


def test_axial_load_shifts_bending_frequency(steel):
    base = modal_analysis(cantilever(steel), 1).frequencies[0]
    shifted = []
    for sign in (1.0, -1.0):
        system = cantilever(steel)
        f = np.zeros(system.K.shape[0])
        tip = system.mesh.node_sets["xmax"]
        f[3 * tip] = sign * 2000.0 / len(tip)
        prestress(system, solve_static(system, f))
        shifted.append(modal_analysis(system, 1, prestressed=True).frequencies[0])
    assert shifted[0] > base > shifted[1]


def test_residual_is_a_backward_error(rng):
    n = 30
    A = rng.normal(size=(n, n))
    K = A @ A.T + n * np.eye(n)
    M = np.diag(rng.uniform(1, 2, n))
    lam, V = np.linalg.eigh(np.linalg.solve(np.sqrt(M), np.linalg.solve(np.sqrt(M), K).T))
    V = np.linalg.solve(np.sqrt(M), V)
    assert modal_residuals(K, M, lam, V).max() < 1e-14
    assert modal_residuals(K, M, lam * 1.01, V).min() > 1e-4


def test_complete_extraction_only_on_dense_path(rng):
    n = 12
    K = sp.diags(np.arange(1.0, n + 1)).tocsr()
    M = sp.eye(n).tocsr()
    ms = solve_modal(K, M, n)
    assert np.allclose(ms.eigenvalues, np.arange(1.0, n + 1))
    with pytest.raises(ValueError):
        solve_modal(K, M, n, dense_limit=0)
    with pytest.raises(ValueError):
        solve_modal(K, M, 0)


def test_bad_mass_rejected():
    K = sp.eye(4).tocsr()
    with pytest.raises(IndefiniteMass):
        solve_modal(K, sp.diags([1.0, 1.0, 0.0, 1.0]).tocsr(), 2)
    M = sp.csr_matrix(np.array([[1.0, 2, 0, 0], [2, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]))
    with pytest.raises(IndefiniteMass):
        solve_modal(K, M, 2)


def test_default_shift_is_negative():
    K = sp.diags([0.0, 1e6, 1e12]).tocsr()
    M = sp.eye(3).tocsr()
    s = default_shift(K, M)
    assert s < 0 and abs(s) >= 1.0


def test_rigid_eigenvalues_of_a_stiff_small_element(steel):
    # elastic eigenvalues near 1e12 would bury the rigid ones at eps * 1e12 in a joint solve
    mesh = box_mesh((0.01, 0.01, 0.01), (1, 1, 1))
    ms = modal_analysis(build_system(mesh, {"box": steel}, DofMap(mesh.n_nodes)), 12)
    assert ms.eigenvalues[6] > 1e11
    assert np.abs(ms.eigenvalues[:6]).max() < 1e-12
    assert ms.residuals.max() < 1e-14
    G = ms.shapes.T @ (build_system(mesh, {"box": steel}, DofMap(mesh.n_nodes)).M @ ms.shapes)
    assert np.abs(G - np.eye(12)).max() < 1e-12
