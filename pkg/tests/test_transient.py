import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.signal import find_peaks

from pcbfea.assembly import DofMap, build_system
from pcbfea.errors import DegenerateFrequencies, NonPositiveDt
from pcbfea.mesher import box_mesh
from pcbfea.model import LoadCase, PointForce
from pcbfea.solvers import RayleighDamping, damping_sweep, fit_rayleigh, solve_newmark, transient_analysis

W = 2 * np.pi  # 1 Hz oscillator


def test_undamped_oscillator_follows_the_discrete_solution():
    # trapezoidal rule rotates by 2 atan(w dt / 2) per step and conserves energy
    dt = 1e-2
    r = solve_newmark([[W * W]], [[1.0]], None, dt, 5.0, u0=[1.0])
    n = np.arange(len(r.times))
    theta = 2 * np.arctan(W * dt / 2)
    assert np.abs(r.displacement[:, 0] - np.cos(n * theta)).max() < 1e-10
    assert np.abs(r.energy / r.energy[0] - 1).max() < 1e-12
    assert r.acceleration[0, 0] == pytest.approx(-W * W)


def test_step_load_doubles_static_deflection():
    k, F = W * W, 3.0
    r = solve_newmark([[k]], [[1.0]], [F], 1e-3, 1.0, probes=[0])
    assert r.displacement[:, 0].max() == pytest.approx(2 * F / k, rel=1e-4)
    assert r.displacement[:, 0].min() == pytest.approx(0.0, abs=1e-9)


def test_log_decrement_of_lightly_damped_oscillator():
    zeta = 0.005
    d = fit_rayleigh(zeta, 1.0, 5.0)
    assert d.ratio(1.0) == pytest.approx(zeta)
    r = solve_newmark([[W * W]], [[1.0]], None, 1e-3, 10.0, damping=d, u0=[1.0])
    x = r.displacement[:, 0]
    pk, _ = find_peaks(x)
    delta = np.log(x[pk[0]] / x[pk[-1]]) / (len(pk) - 1)
    assert delta == pytest.approx(2 * np.pi * zeta / np.sqrt(1 - zeta**2), rel=1e-3)


def test_fit_rayleigh_frozen_values():
    # independent 2x2 solve of zeta = alpha / 2w + beta w / 2 at 100 and 500 Hz
    d = fit_rayleigh(0.001, 100.0, 500.0)
    assert d.alpha == pytest.approx(1.0471975511965979, rel=1e-12)
    assert d.beta == pytest.approx(5.305164769729845e-07, rel=1e-12)


@given(st.floats(0.0, 0.2), st.floats(1.0, 1e3), st.floats(1.1, 50.0))
def test_rayleigh_fit_hits_both_frequencies(zeta, fa, ratio):
    fb = fa * ratio
    d = fit_rayleigh(zeta, fa, fb)
    assert d.ratio(fa) == pytest.approx(zeta, abs=1e-12)
    assert d.ratio(fb) == pytest.approx(zeta, abs=1e-12)
    # below target between the anchors
    assert d.ratio(np.sqrt(fa * fb)) <= zeta + 1e-12


def test_damping_argument_checks():
    with pytest.raises(DegenerateFrequencies):
        fit_rayleigh(0.01, 10.0, 10.0)
    with pytest.raises(ValueError):
        fit_rayleigh(-0.01, 10.0, 20.0)
    with pytest.raises(ValueError):
        RayleighDamping(-1.0, 0.0)
    with pytest.raises(NonPositiveDt):
        solve_newmark([[1.0]], [[1.0]], None, 0.0, 1.0)


def test_damping_sweep_is_inclusive():
    assert list(damping_sweep(0.001, 0.005, 0.001)) == [0.001, 0.002, 0.003, 0.004, 0.005]
    assert list(damping_sweep(0.01, 0.01, 0.5)) == [0.01]
    with pytest.raises(ValueError):
        damping_sweep(0.02, 0.01, 0.001)


def test_structural_transient_probes_and_monitor(steel):
    mesh = box_mesh((0.2, 0.02, 0.02), (10, 1, 1))
    dm = DofMap(mesh.n_nodes).fix(mesh.node_sets["xmin"])
    system = build_system(mesh, {"box": steel}, dm)
    tip = int(mesh.node_sets["xmax"][0])
    lc = LoadCase(PointForce((0.0, 0.0, -10.0), tuple(mesh.nodes[tip])), "tap", ((0.0, 0.0), (1e-4, 1.0), (2e-4, 0.0)))
    r = transient_analysis(system, lc, 2e-5, 2e-3, fit_rayleigh(0.02, 50.0, 2000.0), probe_nodes=[tip])
    assert r.displacement.shape == (101, 3)
    assert np.all(r.max_deformation >= np.abs(r.displacement).max(axis=1) - 1e-15)
    # after the pulse ends the damped structure only loses energy
    after = r.energy[r.times >= 2e-4]
    assert np.all(np.diff(after) <= 1e-12 * after.max())
    with pytest.raises(ValueError):
        transient_analysis(system, lc, 1e-4, 1e-3, probe_nodes=[int(mesh.node_sets["xmin"][0])])
