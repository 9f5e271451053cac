import numpy as np
import pytest

from pcbfea.assembly import DofMap, build_system
from pcbfea.errors import NoConstraints, SingularAfterConstraints
from pcbfea.mesher import box_mesh
from pcbfea.model import Gravity, LoadCase, Material
from pcbfea.solvers import element_stresses, prestress, solve_static, von_mises

NU0 = Material("nu0", 70e9, 0.0, 2700.0, 200.0, 900.0)


def clamped(mesh, face="xmin"):
    return DofMap(mesh.n_nodes).fix(mesh.node_sets[face])


def tip_moment_load(mesh, L, b, h, kappa, E):
    """Consistent nodal forces of sigma_xx = E kappa (z - h/2) on the x = L face."""
    f = np.zeros(mesh.n_nodes * 3)
    tip = mesh.node_sets["xmax"]
    zs = np.unique(mesh.nodes[tip, 2])
    ys = np.unique(mesh.nodes[tip, 1])
    t = lambda z: E * kappa * (z - h / 2)  # noqa: E731
    fz = np.zeros(len(zs))
    for k in range(len(zs) - 1):
        z1, z2 = zs[k], zs[k + 1]
        fz[k] += (z2 - z1) * (2 * t(z1) + t(z2)) / 6
        fz[k + 1] += (z2 - z1) * (t(z1) + 2 * t(z2)) / 6
    wy = np.zeros(len(ys))
    for k in range(len(ys) - 1):
        wy[k] += (ys[k + 1] - ys[k]) / 2
        wy[k + 1] += (ys[k + 1] - ys[k]) / 2
    for n in tip:
        y, z = mesh.nodes[n, 1:]
        f[3 * n] = fz[np.searchsorted(zs, z)] * wy[np.searchsorted(ys, y)]
    return f


@pytest.mark.parametrize("div", [(4, 1, 1), (6, 2, 2)])
def test_pure_bending_is_exact_with_incompatible_modes(div):
    L, b, h, kappa = 1.0, 0.1, 0.05, 1e-3
    mesh = box_mesh((L, b, h), div)
    system = build_system(mesh, {"box": NU0}, clamped(mesh), mass=False)
    f = tip_moment_load(mesh, L, b, h, kappa, NU0.youngs_modulus)
    res = solve_static(system, f)
    x, z = mesh.nodes[:, 0], mesh.nodes[:, 2]
    ux = kappa * x * (z - h / 2)
    uz = -kappa * x**2 / 2
    d = res.displacement
    tol = 1e-9 * np.abs(uz).max()
    assert np.allclose(d[:, 0], ux, rtol=0, atol=tol)
    assert np.allclose(d[:, 2], uz, rtol=0, atol=tol)
    assert np.abs(d[:, 1]).max() < tol
    # bending stress is linear through the depth
    s = element_stresses(system, res.u)
    assert np.abs(s[..., 1:]).max() < 1e-8 * np.abs(s[..., 0]).max()


def test_standard_element_locks_in_bending():
    L, b, h, kappa = 1.0, 0.1, 0.05, 1e-3
    mesh = box_mesh((L, b, h), (4, 1, 1))
    system = build_system(mesh, {"box": NU0}, clamped(mesh), mass=False, formulation="standard")
    res = solve_static(system, tip_moment_load(mesh, L, b, h, kappa, NU0.youngs_modulus))
    assert res.max_deformation < 0.5 * kappa * L**2 / 2


def test_reactions_balance_gravity(steel):
    mesh = box_mesh((0.2, 0.05, 0.02), (8, 2, 2))
    system = build_system(mesh, {"box": steel}, clamped(mesh))
    res = solve_static(system, LoadCase(Gravity((0.0, 0.0, -9.81))))
    total = np.array([0.0, 0.0, -9.81 * steel.density * 0.2 * 0.05 * 0.02])
    assert res.reactions.reshape(-1, 3).sum(axis=0) == pytest.approx(-total, abs=1e-10 * abs(total[2]))
    assert res.equilibrium_error() < 1e-10
    assert res.relative_residual < 1e-10
    assert res.backward_error < 1e-15
    assert np.all(res.reactions[system.dofmap.free] == 0)
    assert mesh.nodes[res.max_node, 0] == pytest.approx(0.2)


def test_unsupported_and_mechanism_models():
    mesh = box_mesh((0.1, 0.1, 0.1), (2, 2, 2))
    free = build_system(mesh, {"box": NU0}, DofMap(mesh.n_nodes), mass=False)
    with pytest.raises(NoConstraints):
        solve_static(free, np.zeros(mesh.n_nodes * 3))
    # one pinned node leaves rotations free
    dm = DofMap(mesh.n_nodes).fix([0])
    pinned = build_system(mesh, {"box": NU0}, dm, mass=False)
    with pytest.raises(SingularAfterConstraints):
        solve_static(pinned, np.ones(mesh.n_nodes * 3))


def test_weak_springs_carry_self_equilibrated_load():
    mesh = box_mesh((0.4, 0.1, 0.1), (4, 1, 1))
    system = build_system(mesh, {"box": NU0}, DofMap(mesh.n_nodes), mass=True, weak_springs="default")
    f = np.zeros(mesh.n_nodes * 3)
    f[3 * mesh.node_sets["xmax"]] = 25.0
    f[3 * mesh.node_sets["xmin"]] = -25.0
    res = solve_static(system, f)
    stretch = res.displacement[mesh.node_sets["xmax"], 0].mean() - res.displacement[mesh.node_sets["xmin"], 0].mean()
    assert stretch == pytest.approx(100.0 * 0.4 / (NU0.youngs_modulus * 0.01), rel=1e-6)


def test_load_vector_shape_checked():
    mesh = box_mesh((0.1, 0.1, 0.1), (1, 1, 1))
    system = build_system(mesh, {"box": NU0}, clamped(mesh), mass=False)
    with pytest.raises(ValueError):
        solve_static(system, np.zeros(5))


def test_von_mises_reference_states():
    assert von_mises(np.array([3.0, 0, 0, 0, 0, 0])) == pytest.approx(3.0)
    assert von_mises(np.array([0, 0, 0, 2.0, 0, 0])) == pytest.approx(2.0 * np.sqrt(3))
    assert von_mises(np.array([5.0, 5.0, 5.0, 0, 0, 0])) == pytest.approx(0.0)


def test_prestress_assembles_geometric_stiffness(steel):
    mesh = box_mesh((0.3, 0.02, 0.02), (6, 1, 1))
    system = build_system(mesh, {"box": steel}, clamped(mesh))
    f = np.zeros(mesh.n_nodes * 3)
    f[3 * mesh.node_sets["xmax"]] = 1000.0 / 4
    res = solve_static(system, f)
    prestress(system, res)
    assert system.Ksigma is not None
    s = element_stresses(system, res.u)
    assert s[..., 0].mean() == pytest.approx(1000.0 / 4e-4, rel=1e-3)
    K0 = system.stiffness()
    Kp = system.stiffness(prestressed=True)
    # axial tension stiffens transverse motion of the free end
    v = np.zeros(mesh.n_nodes * 3)
    v[3 * mesh.node_sets["xmax"] + 2] = 1.0
    assert v @ (Kp @ v) > v @ (K0 @ v)
