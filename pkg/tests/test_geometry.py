import numpy as np
import pytest
from scipy.optimize import nnls

from delaysweep.errors import (
    InfeasiblePolyhedron,
    PointNotInSet,
    TimeOutOfRange,
)
from delaysweep.geometry import (
    MovingPolyhedron,
    Polyhedron,
    _project_enumerate,
    dist_to_normal_cone,
    distance,
    modulus_rate,
    normal_cone_contains,
    project,
)


def random_polyhedron(rng, n=None, s=None):
    n = n or int(rng.integers(1, 5))
    s = s or int(rng.integers(1, 7))
    normals = rng.standard_normal((s, n))
    while np.any(np.linalg.norm(normals, axis=1) < 1e-6):
        normals = rng.standard_normal((s, n))
    center = rng.standard_normal(n)
    offsets = normals @ center + rng.uniform(0.2, 1.5, s)
    return Polyhedron(normals, offsets), center


def test_rescaling_to_unit_normals():
    P = Polyhedron([[3.0, 0.0], [0.0, -2.0]], [6.0, 4.0])
    assert np.allclose(np.linalg.norm(P.normals, axis=1), 1.0)
    assert np.allclose(P.offsets, [2.0, 2.0])


def test_zero_normal_rejected():
    with pytest.raises(ValueError):
        Polyhedron([[0.0, 0.0]], [1.0])


def test_empty_intersection_rejected():
    with pytest.raises(InfeasiblePolyhedron):
        Polyhedron([[1.0], [-1.0]], [-1.0, -1.0])


def test_projection_box_corner():
    P = Polyhedron(np.vstack([np.eye(2), -np.eye(2)]), np.ones(4))
    res = project(P, np.array([2.0, 3.0]))
    assert np.allclose(res.point, [1.0, 1.0])
    assert set(res.active) <= {0, 1}
    assert np.all(res.multipliers >= 0)


def test_projection_interior_fast_path():
    P = Polyhedron(np.vstack([np.eye(2), -np.eye(2)]), np.ones(4))
    y = np.array([0.3, -0.4])
    res = project(P, y)
    assert res.point is not y
    assert np.array_equal(res.point, y)
    assert res.active == tuple()


def test_projection_halfspace_formula():
    P = Polyhedron([[1.0, 0.0]], [0.0])
    res = project(P, np.array([2.0, 5.0]))
    assert np.allclose(res.point, [0.0, 5.0])


def test_distance_zero_inside():
    P = Polyhedron([[1.0]], [1.0])
    assert distance(P, np.array([0.5])) == 0.0
    assert distance(P, np.array([3.0])) == pytest.approx(2.0)


def test_dist_to_normal_cone_interior_is_norm():
    P = Polyhedron([[1.0, 0.0]], [1.0])
    w = np.array([0.3, -0.4])
    assert dist_to_normal_cone(P, np.array([0.0, 0.0]), w) == pytest.approx(0.5)


def test_dist_to_normal_cone_on_face():
    P = Polyhedron([[1.0, 0.0]], [0.0])
    x = np.array([0.0, 1.0])
    # w along the outward normal: in the cone
    assert dist_to_normal_cone(P, x, np.array([2.0, 0.0])) == pytest.approx(0.0)
    # w pointing inward: nearest cone point is the origin
    d, p = dist_to_normal_cone(P, x, np.array([-1.0, 1.0]), return_cone_point=True)
    assert d == pytest.approx(np.sqrt(2.0))
    assert np.allclose(p, 0.0)


def test_dist_to_normal_cone_requires_membership():
    P = Polyhedron([[1.0]], [0.0])
    with pytest.raises(PointNotInSet):
        dist_to_normal_cone(P, np.array([1.0]), np.array([1.0]))


def test_normal_cone_contains_basic():
    P = Polyhedron(np.vstack([np.eye(2), -np.eye(2)]), np.ones(4))
    corner = np.array([1.0, 1.0])
    assert normal_cone_contains(P, corner, np.array([0.5, 0.5]), 1e-9)
    assert not normal_cone_contains(P, corner, np.array([-0.5, 0.5]), 1e-6)


def test_cone_distance_nnls_oracle():
    """Dual route: distance to cone(G) equals the NNLS residual."""
    rng = np.random.default_rng(7)
    for _ in range(200):
        n, s = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        G = rng.standard_normal((s, n))
        G /= np.linalg.norm(G, axis=1)[:, None]
        x0 = rng.standard_normal(n)
        P = Polyhedron(G, G @ x0)  # all constraints tight at x0
        w = rng.standard_normal(n)
        d = dist_to_normal_cone(P, x0, w)
        lam, res = nnls(G.T, w)
        assert d == pytest.approx(res, abs=1e-8)


def test_projection_paths_agree():
    rng = np.random.default_rng(11)
    for _ in range(300):
        P, center = random_polyhedron(rng)
        y = center + 2.0 * rng.standard_normal(P.dim)
        if np.all(P.slack(y) >= 0):
            continue
        a = project(P, y).point
        b = _project_enumerate(P, y, 1.0 + np.abs(P.offsets)).point
        assert np.linalg.norm(a - b) <= 1e-8


def test_projection_many_constraints_iterative():
    rng = np.random.default_rng(3)
    # 20 > ENUM_LIMIT constraints: tangent planes of the unit circle
    ang = np.linspace(0, 2 * np.pi, 20, endpoint=False)
    normals = np.column_stack([np.cos(ang), np.sin(ang)])
    P = Polyhedron(normals, np.ones(20))
    for _ in range(50):
        y = 3.0 * rng.standard_normal(2)
        res = project(P, y)
        assert P.contains(res.point, 1e-7)
        # optimality via the normal-cone criterion
        assert normal_cone_contains(P, res.point, y - res.point, 1e-6)


def test_moving_polyhedron_tracks_and_snapshot():
    M = MovingPolyhedron(
        [[-1.0], [1.0]],
        [([0.0, 1.0], [0.0, -1.0]), ([0.0, 1.0], [1.0, 2.0])],
        (0.0, 1.0),
    )
    snap = M.snapshot(0.25)
    assert snap.contains(np.array([0.5]))
    assert not snap.contains(np.array([0.1]))
    assert modulus_rate(M) == pytest.approx(1.0)
    assert not M.is_static
    with pytest.raises(TimeOutOfRange):
        M.snapshot(2.0)


def test_moving_polyhedron_static_snapshot_cached():
    P = Polyhedron([[1.0], [-1.0]], [1.0, 1.0])
    M = MovingPolyhedron.static(P, (0.0, 1.0))
    assert M.is_static
    assert M.snapshot(0.1) is M.snapshot(0.9)


def test_moving_polyhedron_empty_snapshot_rejected():
    with pytest.raises(InfeasiblePolyhedron):
        MovingPolyhedron(
            [[1.0], [-1.0]],
            [([0.0, 1.0], [1.0, -3.0]), ([0.0, 1.0], [1.0, 1.0])],
            (0.0, 1.0),
        )
