"""Small mesh builders shared by the tests."""
import numpy as np

from pcbfea.mesher import box_mesh


def distorted_cube(rng, scale=0.15):
    """Unit-ish hex with perturbed corners (still well shaped)."""
    from pcbfea.elements import NODE_REF

    return 0.5 * NODE_REF * np.array([1.0, 0.8, 0.6]) + scale * rng.uniform(-0.5, 0.5, (8, 3)) * 0.5


def board_box(divisions=(16, 14, 1), size=(0.254, 0.216, 0.0005)):
    return box_mesh(size, divisions, region="board")


def edge_nodes(mesh, size):
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    tol = 1e-9
    return np.nonzero((x < tol) | (x > size[0] - tol) | (y < tol) | (y > size[1] - tol))[0]


def corner_nodes(mesh, size):
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    tol = 1e-9
    return np.nonzero(((x < tol) | (x > size[0] - tol)) & ((y < tol) | (y > size[1] - tol)))[0]
