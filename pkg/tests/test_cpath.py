import numpy as np
import pytest

from vegoc import (CanonicalSystem, ParameterSet, connect,
                   continue_initial_state, make_time_mesh, solve_flat_css,
                   truncation_check)
from vegoc.cpath import PathProblem
from vegoc.errors import DefectiveTargetError, InvalidArgumentError
from vegoc.model import control_law, effort_from_tax


@pytest.fixture(scope="module")
def saddle_target(ops64):
    params = ParameterSet(R=28.0)
    pt = solve_flat_css(params, ops64, label="flat-28")
    assert pt.defect == 0
    return CanonicalSystem(params, ops64), pt


def test_time_mesh_shapes():
    tm = make_time_mesh(100.0, 40)
    assert tm.t[0] == 0.0 and tm.t[-1] == 100.0 and tm.m == 40
    assert np.all(np.diff(tm.t) > 0)
    # geometric grading: early steps finer than late ones
    h = np.diff(tm.t)
    assert h[0] < h[-1] / 3
    uni = make_time_mesh(10.0, 5, grading="uniform")
    assert np.allclose(np.diff(uni.t), 2.0)


def test_time_mesh_invalid():
    with pytest.raises(InvalidArgumentError):
        make_time_mesh(-1.0, 10)
    with pytest.raises(InvalidArgumentError):
        make_time_mesh(10.0, 10, grading="exotic")


def test_constant_path_at_target(saddle_target):
    system, pt = saddle_target
    path = connect(system, pt.u[:2 * system.n], pt, T=60.0, m=24)
    assert path.residual_inf < 1e-8
    assert path.mismatch < 1e-6
    # value of the constant path equals jca/rho to quadrature exactness
    assert path.J == pytest.approx(pt.jca / system.params.rho, abs=1e-10)
    assert np.max(np.abs(path.U - pt.u[None, :])) < 1e-6


def test_path_from_perturbed_states(saddle_target):
    system, pt = saddle_target
    n = system.n
    v0w0 = pt.u[:2 * n] * 1.05
    path = connect(system, v0w0, pt, T=120.0, m=48)
    assert path.residual_inf < 1e-8
    assert np.max(np.abs(path.initial_states() - v0w0)) < 1e-12
    assert path.mismatch_rel < 1e-3
    assert path.J == pytest.approx(pt.jca / system.params.rho, rel=0.05)
    assert path.J != pytest.approx(pt.jca / system.params.rho, abs=1e-6)


def test_path_tail_decays_geometrically(saddle_target):
    system, pt = saddle_target
    n = system.n
    path = connect(system, pt.u[:2 * n] * 1.05, pt, T=120.0, m=48)
    t = path.tmesh.t
    tail = t >= 0.9 * t[-1]
    dev = np.max(np.abs(path.U - pt.u[None, :]), axis=1)[tail]
    assert np.all(np.diff(dev) < 0)


def test_interior_residual_at_solution(saddle_target):
    system, pt = saddle_target
    n = system.n
    path = connect(system, pt.u[:2 * n] * 1.03, pt, T=100.0, m=32)
    prob = path._problem
    F = prob.residual(path.U, path.initial_states())
    assert np.max(np.abs(F)) < 1e-8


def test_effort_tax_identity_along_path(saddle_target):
    system, pt = saddle_target
    n = system.n
    path = connect(system, pt.u[:2 * n] * 1.04, pt, T=100.0, m=32)
    for k in range(0, path.U.shape[0], 7):
        v = np.maximum(path.v_t[k], 0.0)
        tau = path.lam_t[k]
        rebuilt = effort_from_tax(v, tau, path.params, clamp=True)
        assert np.max(np.abs(rebuilt - path.E_t[k])) < 1e-12


def test_defective_target_rejected(ops64):
    params = ParameterSet(R=20.0)
    pt = solve_flat_css(params, ops64, guess=(250, 10, 0.6, 1))
    assert pt.defect == 2
    system = CanonicalSystem(params, ops64)
    with pytest.raises(DefectiveTargetError):
        connect(system, pt.u[:2 * ops64.n], pt, T=50.0, m=16)


def test_sigma_continuation_noop(saddle_target):
    system, pt = saddle_target
    path = connect(system, pt.u[:2 * system.n] * 1.02, pt, T=80.0, m=24)
    same = continue_initial_state(path, path.initial_states())
    assert same is path


def test_truncation_report(saddle_target):
    system, pt = saddle_target
    path = connect(system, pt.u[:2 * system.n] * 1.05, pt, T=120.0, m=48)
    rep = truncation_check(path)
    assert rep["mismatch_rel"] < 1e-3
    rho, T = system.params.rho, path.tmesh.T
    assert abs(rep["boundary_v_lam"]) < np.exp(-rho * T) * 10 * \
        abs(float(pt.u[:system.n] @ (system.ops.M @ pt.u[2 * system.n:3 * system.n]))) + 1.0


def test_psi_reuse_between_problems(saddle_target):
    system, pt = saddle_target
    tm = make_time_mesh(50.0, 10)
    p1 = PathProblem(system, pt, tm)
    p2 = PathProblem(system, pt, make_time_mesh(100.0, 20), psi=p1.psi)
    assert p2.psi is p1.psi
