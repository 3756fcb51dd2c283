import numpy as np
import pytest

from vegoc import (ParameterSet, PrivateStepper, simulate, solve_flat_private,
                   step_private)
from vegoc.errors import InvalidArgumentError
from vegoc.model import PrivateSystem
from vegoc.private import average_profit


def test_trivial_state_stationary(params, private64):
    n = private64.n
    w0 = params.R * params.beta / params.r_w
    vw = np.concatenate([np.zeros(n), np.full(n, w0)])
    out = step_private(private64, vw, 0.5)
    assert np.max(np.abs(out - vw)) < 1e-12 * max(1.0, np.max(np.abs(vw)))


def test_steady_state_preserved_exactly(ops64):
    params = ParameterSet(R=60.0)
    system = PrivateSystem(params, ops64)
    pt = solve_flat_private(params, ops64)
    stepper = PrivateStepper(system, 1.0)
    out = stepper.step(pt.vw)
    assert np.max(np.abs(out - pt.vw)) < 1e-9


def test_stepper_rejects_nonpositive_dt(private64):
    with pytest.raises(InvalidArgumentError):
        PrivateStepper(private64, 0.0)


def test_blowup_detection(private64):
    n = private64.n
    vw = np.concatenate([np.full(n, 1e7), np.full(n, 1e7)])
    with pytest.raises(FloatingPointError):
        stepper = PrivateStepper(private64, 1e4, blowup=1e6)
        stepper.step(vw)


def test_simulate_records_profit(ops64):
    params = ParameterSet(R=60.0)
    system = PrivateSystem(params, ops64)
    pt = solve_flat_private(params, ops64)
    traj = simulate(system, pt.vw, dt=0.5, nsteps=20, record_every=5)
    assert traj.vw.shape[0] == len(traj.t)
    assert np.all(np.isfinite(traj.pi_avg))
    assert traj.pi_avg[0] == pytest.approx(pt.pi, rel=1e-10)


def test_positivity_maintained(ops64):
    params = ParameterSet(R=10.0)
    system = PrivateSystem(params, ops64)
    n = ops64.n
    # low rainfall: vegetation dies back toward the trivial state
    vw0 = np.concatenate([np.full(n, 5.0), np.full(n, 20.0)])
    traj = simulate(system, vw0, dt=0.5, nsteps=200, record_every=50)
    assert traj.vw.min() >= 0.0
    assert average_profit(system, traj.vw[-1]) < average_profit(system, traj.vw[0]) + 1e-12
