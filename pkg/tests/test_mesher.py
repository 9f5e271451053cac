import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from pcbfea.elements import element_volume
from pcbfea.mesher import (
    MeshParams,
    box_mesh,
    corner_jacobians,
    generate_mesh,
    mesh_quality_report,
)

COARSE = MeshParams(target_element_size=8e-3, board_thickness_layers=2, curved_shape_facets=8)


@pytest.fixture(scope="module")
def aed_mesh(aed4):
    return generate_mesh(aed4, COARSE)


def face_areas(mesh, tag):
    # every tagged face of these meshes is an axis-aligned rectangle
    X = mesh.nodes[mesh.face_nodes(tag)]
    ext = X.max(axis=1) - X.min(axis=1)
    return np.sort(ext, axis=1)[:, 1:].prod(axis=1)


def n_connected(mesh):
    e = mesh.elements
    rows = np.repeat(e[:, 0], 7)
    cols = e[:, 1:].ravel()
    g = sp.coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(mesh.n_nodes,) * 2)
    return connected_components(g, directed=False)[0]


@pytest.mark.parametrize("div", [(1, 1, 1), (3, 2, 4), (5, 1, 2)])
def test_box_mesh_counts(div):
    nx, ny, nz = div
    m = box_mesh((1.0, 2.0, 0.5), div)
    assert m.n_nodes == (nx + 1) * (ny + 1) * (nz + 1)
    assert m.n_elements == nx * ny * nz
    assert len(m.surface_tags["exterior"]) == 2 * (nx * ny + ny * nz + nz * nx)
    assert element_volume(m.element_coords()).sum() == pytest.approx(1.0)
    assert face_areas(m, "zmin").sum() == pytest.approx(2.0)
    assert np.all(m.nodes[m.node_sets["xmax"], 0] == 1.0)


def test_box_mesh_jacobians_positive():
    m = box_mesh((1.0, 1.0, 1.0), (2, 2, 2), origin=(-1.0, 3.0, 0.0))
    assert corner_jacobians(m).min() > 0
    assert np.allclose(m.nodes.min(axis=0), [-1.0, 3.0, 0.0])


def test_mesh_params_validation():
    with pytest.raises(ValueError):
        MeshParams(target_element_size=0.0)
    with pytest.raises(ValueError):
        MeshParams(board_thickness_layers=0)
    with pytest.raises(ValueError):
        MeshParams(curved_shape_facets=4)


def test_aed_mesh_regions_and_quality(aed_mesh, aed4):
    q = mesh_quality_report(aed_mesh)
    assert q.min_jacobian > 0
    assert q.min_scaled_jacobian == pytest.approx(1.0)  # all cells are bricks
    assert set(q.region_counts) == {"board"} | {c.name for c in aed4.components}
    assert all(n > 0 for n in q.region_counts.values())
    assert n_connected(aed_mesh) == 1


def test_board_volume_is_exact(aed_mesh, aed4):
    L, W, T = aed4.board_size
    V = element_volume(aed_mesh.element_coords(aed_mesh.region_elements("board"))).sum()
    assert V == pytest.approx(L * W * T, rel=1e-12)
    assert face_areas(aed_mesh, "bottom").sum() == pytest.approx(L * W, rel=1e-12)


def test_cuboid_components_are_exact(aed_mesh, aed4):
    for c in aed4.components:
        V = element_volume(aed_mesh.element_coords(aed_mesh.region_elements(c.name))).sum()
        if type(c.shape).__name__ == "Cuboid":
            assert V == pytest.approx(c.shape.volume(), rel=1e-12), c.name


def test_round_components_converge_in_volume(aed4):
    errs = []
    for facets in (8, 16, 32):
        m = generate_mesh(aed4, MeshParams(8e-3, 1, facets))
        c = aed4.component("Battery")
        V = element_volume(m.element_coords(m.region_elements(c.name))).sum()
        errs.append(abs(V / c.shape.volume() - 1))
    assert errs[-1] < 0.05
    assert errs[-1] < errs[0]


def test_components_are_bonded_to_the_board(aed_mesh, aed4):
    top = set(aed_mesh.node_sets["board_top"])
    t = aed4.board_size[2]
    for name in aed_mesh.regions[1:]:
        nodes = np.unique(aed_mesh.elements[aed_mesh.region_elements(name)])
        base = nodes[np.abs(aed_mesh.nodes[nodes, 2] - t) < 1e-9]
        assert len(base) >= 4 and set(base) <= top, name


def test_in_plane_spacing_respects_target(aed4):
    h = 6e-3
    m = generate_mesh(aed4, MeshParams(h, 2, 16))
    X = m.element_coords(m.region_elements("board"))
    dx = X[:, :, 0].max(axis=1) - X[:, :, 0].min(axis=1)
    dy = X[:, :, 1].max(axis=1) - X[:, :, 1].min(axis=1)
    assert dx.max() <= h * (1 + 1e-9) and dy.max() <= h * (1 + 1e-9)
    # board layers
    dz = X[:, :, 2].max(axis=1) - X[:, :, 2].min(axis=1)
    assert np.allclose(dz, aed4.board_size[2] / 2)


def test_support_node_sets(aed_mesh, aed4):
    assert set(aed_mesh.support_node_sets) == {s.name for s in aed4.supports}
    for s in aed4.supports:
        nodes = aed_mesh.support_node_sets[s.name]
        x0, x1, y0, y1 = s.bbox()
        P = aed_mesh.nodes[nodes]
        assert len(nodes) > 0
        assert np.all((P[:, 0] >= x0 - 1e-9) & (P[:, 0] <= x1 + 1e-9))
        assert np.all(P[:, 2] <= aed4.board_size[2] + 1e-9)
        # the patch corners are mesh lines, so the patch is resolved exactly
        assert math.isclose(P[:, 0].max() - P[:, 0].min(), x1 - x0, rel_tol=1e-9)


def test_surface_tags_partition_the_exterior(aed_mesh):
    ext = aed_mesh.surface_tags["exterior"]
    parts = ["top", "bottom", "sides"] + [f"component:{r}" for r in aed_mesh.regions[1:]]
    total = sum(len(aed_mesh.surface_tags[p]) for p in parts)
    assert total == len(ext)


def test_refinement_increases_counts(aed4):
    a = generate_mesh(aed4, MeshParams(10e-3, 1, 8))
    b = generate_mesh(aed4, MeshParams(5e-3, 1, 8))
    assert b.n_nodes > 2 * a.n_nodes and b.n_elements > 2 * a.n_elements


def test_unvalidated_model_rejected():
    from pcbfea.model import aed_model_definition

    with pytest.raises(ValueError):
        generate_mesh(aed_model_definition(4), COARSE)
