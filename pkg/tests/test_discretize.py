import numpy as np
import pytest

import delaysweep as ds
from delaysweep.errors import LevelTooLarge


@pytest.fixture(scope="module")
def feedback_pair(scenarios):
    sc = scenarios["delayed_feedback"]
    xbar, _ = ds.solve_delayed(sc.problem, sc.control_signal, 2**10)
    return sc, xbar


def test_sample_pair_nodes_and_controls(feedback_pair):
    sc, xbar = feedback_pair
    dp = ds.sample_pair(sc.problem, xbar, sc.control_signal, 3)
    assert dp.states.shape == (9, 1)
    # node states are exact samples of the reference
    for i, t in enumerate(dp.times):
        assert dp.states[i] == pytest.approx(xbar.eval(t))
    # controls sampled at right endpoints
    for i in range(8):
        assert dp.controls[i] == pytest.approx(
            sc.control_signal.eval(dp.times[i + 1]))


def test_sample_pair_delayed_values_use_history(feedback_pair):
    sc, xbar = feedback_pair
    dp = ds.sample_pair(sc.problem, xbar, sc.control_signal, 3)
    # lag(t) = t - 0.5 < 0 for early nodes: history value 1
    assert dp.delayed[0] == pytest.approx(1.0)
    assert dp.delayed[4] == pytest.approx(1.0)  # t=0.5 -> lag 0 -> x(0)=1


def test_sample_pair_level_guard(feedback_pair):
    sc, xbar = feedback_pair
    with pytest.raises(LevelTooLarge):
        ds.sample_pair(sc.problem, xbar, sc.control_signal, 25)


def test_residuals_vanish_for_unconstrained_constant_reference(scenarios):
    # steering scenario with zero control: reference is constant, interior
    sc = scenarios["steering_1d"]
    u0 = ds.ControlSignal.constant(np.zeros(1))
    xbar, _ = ds.solve_delayed(sc.problem, u0, 2**6)
    dp = ds.compute_residuals(
        ds.sample_pair(sc.problem, xbar, u0, 4), sc.problem)
    assert np.max(dp.radii) <= 1e-12
    assert np.allclose(dp.directions, 0.0)


def test_residual_radius_single_step_interior():
    # one interval, interior point: r = ||omega + g|| and rho is its unit vector
    M = ds.MovingPolyhedron.static(
        ds.Polyhedron([[1.0], [-1.0]], [5.0, 5.0]), (0.0, 1.0))
    g = ds.Perturbation.affine(B=[[1.0]], n=1, d=1, beta=1.0)
    hist = ds.History.constant([1.0], (-0.5, 0.0))
    prob = ds.SweepingProblem(M, g, ds.DelaySpec.constant(0.5), hist,
                              ds.ControlSet.box([0.0], [0.0]), (0.0, 1.0))
    # hand-built reference: x(t) = 1 - 2t (slope -2, while g = y = 1 early on)
    xbar = ds.Trajectory(np.array([0.0, 1.0]), np.array([[1.0], [-1.0]]), hist)
    dp = ds.compute_residuals(
        ds.sample_pair(prob, xbar, ds.ControlSignal.constant([0.0]), 0),
        prob)
    # omega = -2, g(0) = y(0) = 1: distance of -g-omega = 1 to N = {0} is 1
    assert dp.radii[0] == pytest.approx(1.0)
    assert dp.directions[0] == pytest.approx(-1.0)  # (omega + g + 0)/r


def test_residual_direction_unit_or_zero(feedback_pair):
    sc, xbar = feedback_pair
    dp = ds.compute_residuals(
        ds.sample_pair(sc.problem, xbar, sc.control_signal, 6), sc.problem)
    norms = np.linalg.norm(dp.directions, axis=1)
    mask = dp.radii > 1e-14
    assert np.allclose(norms[mask], 1.0)
    assert np.allclose(norms[~mask], 0.0)


def test_convergence_table_columns(feedback_pair, delayed_feedback_reference):
    sc, xbar_ref, _ = delayed_feedback_reference
    table = ds.convergence_study(sc.problem, xbar_ref, sc.control_signal,
                                 range(4, 7))
    assert list(table.column("level")) == [4, 5, 6]
    assert np.all(table.column("r_l2") > 0)
    assert np.all(np.diff(table.column("r_l2")) < 0)


def test_lipschitz_preserved_by_sampling(feedback_pair):
    sc, xbar = feedback_pair
    dp = ds.sample_pair(sc.problem, xbar, sc.control_signal, 5)
    assert dp.trajectory().lipschitz <= xbar.lipschitz + 1e-9
