import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcbfea.assembly import DofMap, build_system
from pcbfea.errors import CountMismatch, NonOrthonormalModes
from pcbfea.mesher import box_mesh
from pcbfea.modal_post import (
    DIRECTIONS,
    compare_modesets,
    mac_matrix,
    mass_centroid,
    participation,
    rigid_body_vectors,
)
from pcbfea.solvers import ModeSet, modal_analysis

A, B, C = 0.12, 0.06, 0.02


@pytest.fixture(scope="module")
def free_box(steel):
    mesh = box_mesh((A, B, C), (3, 2, 1), origin=(0.01, -0.02, 0.0))
    return build_system(mesh, {"box": steel}, DofMap(mesh.n_nodes))


@pytest.fixture(scope="module")
def complete(free_box):
    n = free_box.K.shape[0]
    return modal_analysis(free_box, n, energy_form=False)


def test_complete_basis_recovers_mass_and_inertia(free_box, complete, steel):
    p = participation(complete, free_box.M, free_box.mesh.nodes)
    m = steel.density * A * B * C
    # consistent mass integrates the linear rigid fields exactly
    inertia = m / 12 * np.array([B * B + C * C, A * A + C * C, A * A + B * B])
    assert p.total == pytest.approx(np.r_[[m] * 3, inertia], rel=1e-12)
    assert np.abs(p.captured / p.total - 1).max() < 1e-8
    assert p.cumulative_ratio[-1] == pytest.approx(np.ones(6), abs=1e-8)
    assert np.allclose(p.centre, [0.01 + A / 2, -0.02 + B / 2, C / 2])
    assert len(p) == free_box.K.shape[0]


def test_truncated_set_captures_part_of_the_mass(steel):
    mesh = box_mesh((0.3, 0.03, 0.03), (12, 1, 1))
    sys_ = build_system(mesh, {"box": steel}, DofMap(mesh.n_nodes).fix(mesh.node_sets["xmin"]))
    ms = modal_analysis(sys_, 6)
    p = participation(ms, sys_.M, mesh.nodes)
    r = p.cumulative_ratio
    assert np.all(np.diff(r, axis=0) >= -1e-15)
    assert np.all(r[-1] < 1.0)
    # first bending mode of a cantilever carries about 61% of the mass
    z = DIRECTIONS.index("Z")
    assert max(r[0, z], r[1, z]) == pytest.approx(0.61, abs=0.05)


def test_rigid_vectors_and_centroid(free_box):
    nodes = free_box.mesh.nodes
    R = rigid_body_vectors(nodes, np.zeros(3))
    assert R.shape == (3 * len(nodes), 6)
    K = free_box.K
    assert np.abs(K @ R).max() < 1e-6 * abs(K).max()
    assert np.allclose(mass_centroid(free_box.M, nodes), nodes.mean(axis=0))


def test_non_orthonormal_modes_rejected(free_box, complete):
    with pytest.raises(NonOrthonormalModes):
        participation(complete.shapes[:, :5] * 1.01, free_box.M, free_box.mesh.nodes)
    with pytest.raises(ValueError):
        participation(complete.shapes[:, :5], free_box.M)


@settings(max_examples=20)
@given(st.lists(st.sampled_from([-1.0, 1.0]), min_size=4, max_size=4), st.permutations(range(4)))
def test_comparison_pairs_through_sign_and_order(signs, perm):
    rng = np.random.default_rng(0)
    V = np.linalg.qr(rng.normal(size=(20, 4)))[0]
    lam = np.array([1.0, 4.0, 9.0, 16.0])
    a = ModeSet(lam, V)
    perm = np.array(perm)
    b = ModeSet(lam[perm] * 1.1, V[:, perm] * signs)
    cmp_ = compare_modesets(a, b)
    assert np.array_equal(perm[cmp_.pairing], np.arange(4))
    assert np.allclose(cmp_.paired_mac, 1.0)
    assert np.allclose(cmp_.percent, 100 * (np.sqrt(1.1) - 1))


def test_mac_properties():
    rng = np.random.default_rng(1)
    a = rng.normal(size=(10, 3))
    M = mac_matrix(a, a)
    assert np.allclose(np.diag(M), 1.0)
    assert np.all((M >= 0) & (M <= 1 + 1e-12))
    with pytest.raises(CountMismatch):
        compare_modesets(ModeSet(np.ones(3), a), ModeSet(np.ones(2), a[:, :2]))
