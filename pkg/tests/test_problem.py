import numpy as np
import pytest

from delaysweep.errors import (
    DimensionMismatch,
    TimeOutOfRange,
    UnknownCatalogEntry,
)
from delaysweep.geometry import MovingPolyhedron, Polyhedron
from delaysweep.problem import (
    ControlSet,
    ControlSignal,
    DelaySpec,
    History,
    Perturbation,
    SweepingProblem,
    validate_assumptions,
)


def make_problem(beta=0.5, delay_track=None):
    M = MovingPolyhedron.static(Polyhedron([[1.0], [-1.0]], [2.0, 2.0]),
                                (0.0, 1.0))
    g = Perturbation.affine(A=[[0.1]], n=1, d=1, beta=beta)
    delay = delay_track or DelaySpec.constant(0.25)
    hist = History.constant([1.0], (-0.25, 0.0))
    controls = ControlSet.box([-1.0], [1.0])
    return SweepingProblem(M, g, delay, hist, controls, (0.0, 1.0))


def test_delay_constant_and_lag():
    d = DelaySpec.constant(0.5, domain=(0.0, 1.0))
    assert d.delay_at(0.3) == pytest.approx(0.5)
    assert d.lag(0.3) == pytest.approx(-0.2)
    assert d.max_delay == pytest.approx(0.5)
    with pytest.raises(TimeOutOfRange):
        d.lag(2.0)


def test_delay_track_must_be_nonincreasing():
    with pytest.raises(ValueError):
        DelaySpec.track([0.0, 1.0], [0.1, 0.5])
    with pytest.raises(ValueError):
        DelaySpec.track([0.0, 1.0], [0.5, -0.1])
    d = DelaySpec.track([0.0, 1.0], [0.5, 0.1])
    assert d.delay_at(0.5) == pytest.approx(0.3)
    assert d.lip == pytest.approx(0.4)


def test_history_interpolation_and_slope():
    h = History([-1.0, 0.0], [[0.0], [2.0]])
    assert h.eval(-0.5) == pytest.approx(1.0)
    assert h.slope_at(-0.5) == pytest.approx(2.0)
    assert h.lip == pytest.approx(2.0)
    assert h.sup_norm == pytest.approx(2.0)


def test_perturbation_affine_evaluation():
    g = Perturbation.affine(A=[[1.0]], B=[[2.0]], D=[[3.0]],
                            e=np.array([0.5]), n=1, d=1, beta=10.0)
    val = g(0.0, np.array([1.0]), np.array([1.0]), np.array([1.0]))
    assert val == pytest.approx(6.5)
    assert g.lip_est == pytest.approx(6.0)


def test_perturbation_catalog_unknown():
    with pytest.raises(UnknownCatalogEntry):
        Perturbation.from_catalog("nope", n=1, d=1)


def test_perturbation_shape_check():
    with pytest.raises(DimensionMismatch):
        Perturbation.affine(A=[[1.0, 0.0]], n=1, d=1)


def test_control_set_box_and_finite():
    box = ControlSet.box([-1.0], [1.0])
    assert box.contains(np.array([0.5]))
    assert box.dist(np.array([2.0])) == pytest.approx(1.0)
    assert np.allclose(box.project(np.array([2.0])), [1.0])
    fin = ControlSet.finite([[0.0], [1.0]])
    assert fin.dist(np.array([0.75])) == pytest.approx(0.25)
    assert fin.contains(np.array([1.0]))


def test_control_signal_step_eval():
    u = ControlSignal([0.0, 0.5], [[1.0], [2.0]])
    assert u.eval(0.25) == pytest.approx(1.0)
    assert u.eval(0.5) == pytest.approx(2.0)
    assert u.total_variation() == pytest.approx(1.0)
    sig = u.as_step_signal((0.0, 1.0))
    assert sig(0.75) == pytest.approx(2.0)


def test_problem_requires_history_coverage():
    M = MovingPolyhedron.static(Polyhedron([[1.0]], [2.0]), (0.0, 1.0))
    g = Perturbation.affine(n=1, d=1, beta=1.0)
    hist = History.constant([0.0], (-0.1, 0.0))  # too short for delay 0.25
    with pytest.raises(ValueError):
        SweepingProblem(M, g, DelaySpec.constant(0.25), hist,
                        ControlSet.box([0.0], [0.0]), (0.0, 1.0))


def test_problem_requires_compatible_initial_state():
    M = MovingPolyhedron.static(Polyhedron([[1.0]], [0.0]), (0.0, 1.0))
    g = Perturbation.affine(n=1, d=1, beta=1.0)
    hist = History.constant([1.0], (-0.25, 0.0))  # phi(t0)=1 outside C
    with pytest.raises(ValueError):
        SweepingProblem(M, g, DelaySpec.constant(0.25), hist,
                        ControlSet.box([0.0], [0.0]), (0.0, 1.0))


def test_validate_assumptions_passes_on_sound_problem():
    report = validate_assumptions(make_problem(), samples=400, seed=0)
    assert report.passed, [c.name for c in report.failed_checks()]


def test_validate_assumptions_flags_understated_growth():
    report = validate_assumptions(make_problem(beta=1e-4), samples=400, seed=0)
    failed = [c.name for c in report.failed_checks()]
    assert "growth(H3)" in failed
