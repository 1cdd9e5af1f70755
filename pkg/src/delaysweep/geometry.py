"""Polyhedral geometry: projections, normal cones, moving sets.

Projection uses exhaustive active-set enumeration (exact at desk scale,
deterministic); above 12 constraints it falls back to cyclic projections
with a KKT polish step. Normal-cone distances are computed by enumerating
faces of the active-normal cone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import (
    InfeasiblePolyhedron,
    NumericalFailure,
    PointNotInSet,
    TimeOutOfRange,
)

ACTIVE_TOL = 1e-9
FEAS_TOL = 1e-12
KKT_TOL = 1e-10
ENUM_LIMIT = 12


@dataclass(frozen=True)
class ActiveSetResult:
    """Projection certificate: point, tight constraints, KKT multipliers."""

    point: np.ndarray
    active: tuple
    multipliers: np.ndarray


class Polyhedron:
    """Intersection of half-spaces {x : <n_j, x> <= c_j} with unit normals.

    Rows are rescaled jointly at construction; nonemptiness is verified by
    a feasibility solve unless ``_checked`` is passed by a trusted caller.
    """

    __slots__ = ("normals", "offsets")

    def __init__(self, normals, offsets, _checked: bool = False):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        offsets = np.atleast_1d(np.asarray(offsets, dtype=float))
        if normals.shape[0] != offsets.shape[0]:
            raise ValueError("one offset per normal required")
        if normals.shape[0] < 1:
            raise ValueError("need at least one half-space")
        if not _checked:
            norms = np.linalg.norm(normals, axis=1)
            if np.any(norms < 1e-14):
                raise ValueError("zero normal row rejected")
            normals = normals / norms[:, None]
            offsets = offsets / norms
        self.normals = normals
        self.offsets = offsets
        if not _checked and not _feasible(normals, offsets):
            raise InfeasiblePolyhedron("half-space intersection is empty")

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.normals.shape[0]

    def slack(self, y) -> np.ndarray:
        return self.offsets - self.normals @ np.asarray(y, dtype=float)

    def contains(self, y, tol: float = ACTIVE_TOL) -> bool:
        return bool(np.all(self.slack(y) >= -tol * (1.0 + np.abs(self.offsets))))

    def active_indices(self, x) -> np.ndarray:
        s = self.slack(x)
        return np.flatnonzero(s <= ACTIVE_TOL * (1.0 + np.abs(self.offsets)))

    def with_offsets(self, offsets) -> "Polyhedron":
        """Cheap snapshot constructor for pre-validated moving sets."""
        return Polyhedron(self.normals, np.asarray(offsets, dtype=float), _checked=True)

    def __eq__(self, other):
        return (
            isinstance(other, Polyhedron)
            and np.array_equal(self.normals, other.normals)
            and np.array_equal(self.offsets, other.offsets)
        )

    def __repr__(self):
        return f"Polyhedron(s={self.n_constraints}, n={self.dim})"


def _feasible(normals, offsets) -> bool:
    res = linprog(
        np.zeros(normals.shape[1]),
        A_ub=normals,
        b_ub=offsets,
        bounds=[(None, None)] * normals.shape[1],
        method="highs",
    )
    return res.status == 0


def _subset_projection(P: Polyhedron, y, active):
    """Equality-constrained least-squares projection onto the faces in `active`."""
    NA = P.normals[list(active)]
    M = NA @ NA.T
    rhs = NA @ y - P.offsets[list(active)]
    try:
        lam = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        lam, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    x = y - NA.T @ lam
    return x, lam, NA


def project(P: Polyhedron, y) -> ActiveSetResult:
    """Euclidean projection onto P with active set and KKT multipliers."""
    y = np.asarray(y, dtype=float)
    if y.shape != (P.dim,):
        raise ValueError("point dimension mismatch")
    scale = 1.0 + np.abs(P.offsets)
    slack = P.slack(y)
    if np.all(slack >= 0.0):
        return ActiveSetResult(y.copy(), tuple(), np.zeros(0))
    try:
        return _project_iterative(P, y, scale, max_cycles=60)
    except NumericalFailure:
        if P.n_constraints <= ENUM_LIMIT:
            return _project_enumerate(P, y, scale)
        return _project_iterative(P, y, scale)


def _project_enumerate(P: Polyhedron, y, scale) -> ActiveSetResult:
    m = P.n_constraints
    max_card = min(m, P.dim + 2)  # KKT active set never needs more independent rows
    for card in range(1, max_card + 1):
        for active in itertools.combinations(range(m), card):
            x, lam, NA = _subset_projection(P, y, active)
            if np.any(lam < -KKT_TOL):
                continue
            if np.any(P.slack(x) < -10 * FEAS_TOL * scale):
                continue
            # constraints in the working set must actually be tight
            if np.max(np.abs(NA @ x - P.offsets[list(active)])) > 1e-8:
                continue
            lam = np.maximum(lam, 0.0)
            if np.linalg.norm(y - x - NA.T @ lam) > 1e-8:
                continue
            return ActiveSetResult(x, active, lam)
    raise NumericalFailure("active-set enumeration exhausted without a KKT point")


def _project_iterative(P: Polyhedron, y, scale, max_cycles: int = 2000) -> ActiveSetResult:
    """Dykstra's alternating projections followed by an exact KKT polish.

    Plain cyclic projection only finds *a* feasible point; Dykstra's
    correction terms make the iterates converge to the nearest one, so the
    tight set at the limit identifies the true active set.
    """
    x = y.copy()
    corrections = np.zeros((P.n_constraints, P.dim))
    for _ in range(max_cycles):
        x_prev = x.copy()
        corr_prev = corrections.copy()
        for j in range(P.n_constraints):
            z = x + corrections[j]
            s = P.offsets[j] - P.normals[j] @ z
            x = z + s * P.normals[j] if s < 0.0 else z
            corrections[j] = z - x
        # x alone can repeat while the corrections still move, so test both
        if (np.linalg.norm(x - x_prev) < 1e-15
                and np.linalg.norm(corrections - corr_prev) < 1e-15):
            break
    # polish: re-solve on the epsilon-tight working set
    tight = np.flatnonzero(P.slack(x) <= 1e-6 * scale)
    for active in _polish_order(tight):
        xs, lam, NA = _subset_projection(P, y, active)
        if np.any(lam < -KKT_TOL) or np.any(P.slack(xs) < -10 * FEAS_TOL * scale):
            continue
        if np.max(np.abs(NA @ xs - P.offsets[list(active)])) > 1e-8:
            continue
        lam = np.maximum(lam, 0.0)
        if np.linalg.norm(y - xs - NA.T @ lam) > 1e-8:
            continue
        return ActiveSetResult(xs, tuple(active), lam)
    raise NumericalFailure("cyclic projection failed to identify a KKT active set")


def _polish_order(tight):
    tight = list(tight)
    for card in range(1, len(tight) + 1):
        yield from itertools.combinations(tight, card)


def distance(P: Polyhedron, y) -> float:
    y = np.asarray(y, dtype=float)
    if np.all(P.slack(y) >= 0.0):
        return 0.0
    return float(np.linalg.norm(y - project(P, y).point))


def _cone_distance(P: Polyhedron, active, w):
    """Distance from w to cone{normals[j] : j in active}, with the cone point."""
    w = np.asarray(w, dtype=float)
    if len(active) == 0:
        return float(np.linalg.norm(w)), np.zeros(P.dim)
    if len(active) > 16:
        raise NumericalFailure("active-normal cone too large for face enumeration")
    G = P.normals[np.asarray(active)]
    best_d = float(np.linalg.norm(w))
    best_p = np.zeros(P.dim)
    for card in range(1, len(active) + 1):
        for sub in itertools.combinations(range(len(active)), card):
            Gs = G[list(sub)]
            lam, *_ = np.linalg.lstsq(Gs.T, w, rcond=None)
            if np.any(lam < -KKT_TOL):
                continue
            p = Gs.T @ np.maximum(lam, 0.0)
            d = float(np.linalg.norm(w - p))
            if d < best_d - 1e-15:
                best_d, best_p = d, p
    return best_d, best_p


def dist_to_normal_cone(P: Polyhedron, x, w, return_cone_point: bool = False):
    """Euclidean distance from w to N_P(x) (cone of active normals)."""
    x = np.asarray(x, dtype=float)
    if not P.contains(x):
        raise PointNotInSet("x is not in the polyhedron (to tolerance)")
    active = P.active_indices(x)
    d, p = _cone_distance(P, active, w)
    return (d, p) if return_cone_point else d


def normal_cone_contains(P: Polyhedron, x, v, tol: float) -> bool:
    """True iff v lies within tol of N_P(x); interior points require ||v|| <= tol."""
    x = np.asarray(x, dtype=float)
    if distance(P, x) > tol:
        raise PointNotInSet("x is farther than tol from the polyhedron")
    active = P.active_indices(x)
    if len(active) == 0:
        return bool(np.linalg.norm(v) <= tol)
    d, _ = _cone_distance(P, active, v)
    return d <= tol


class MovingPolyhedron:
    """Fixed unit normals with continuous piecewise-affine offset tracks.

    Every snapshot on the horizon must be nonempty; this is verified at
    construction by feasibility solves at all track breakpoints and segment
    midpoints. The offset Lipschitz constant L_c doubles as the rate bound
    of the set's absolute-continuity modulus (unit normals give
    |d_{C(t)}(y) - d_{C(s)}(y)| <= max_j |c_j(t) - c_j(s)| <= L_c |t - s|).
    """

    __slots__ = ("normals", "tracks", "horizon", "lip_offsets", "_static_base")

    def __init__(self, normals, tracks, horizon):
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        norms = np.linalg.norm(normals, axis=1)
        if np.any(norms < 1e-14):
            raise ValueError("zero normal row rejected")
        t0, T = float(horizon[0]), float(horizon[1])
        if not T > t0:
            raise ValueError("horizon must satisfy T > t0")
        clean = []
        for j, (times, values) in enumerate(tracks):
            times = np.asarray(times, dtype=float)
            values = np.asarray(values, dtype=float) / norms[j]
            if times.ndim != 1 or times.shape != values.shape or len(times) < 1:
                raise ValueError("track breakpoints/values mismatch")
            if len(times) == 1:
                times = np.array([t0, T])
                values = np.repeat(values, 2)
            if np.any(np.diff(times) <= 0):
                raise ValueError("track breakpoints must increase")
            if times[0] > t0 + 1e-12 or times[-1] < T - 1e-12:
                raise ValueError("track must cover the horizon")
            clean.append((times, values))
        self.normals = normals / norms[:, None]
        self.tracks = clean
        self.horizon = (t0, T)
        slopes = [
            np.max(np.abs(np.diff(v) / np.diff(t))) if len(t) > 1 else 0.0
            for t, v in clean
        ]
        self.lip_offsets = float(max(slopes)) if slopes else 0.0
        self._static_base = None
        self._verify_feasibility()
        if self.is_static:
            self._static_base = Polyhedron(
                self.normals, self.offsets_at(t0), _checked=True
            )

    @classmethod
    def static(cls, poly: Polyhedron, horizon) -> "MovingPolyhedron":
        tracks = [([horizon[0], horizon[1]], [c, c]) for c in poly.offsets]
        return cls(poly.normals, tracks, horizon)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.normals.shape[0]

    @property
    def is_static(self) -> bool:
        return self.lip_offsets == 0.0

    def _verify_feasibility(self):
        t0, T = self.horizon
        knots = np.unique(
            np.clip(np.concatenate([t for t, _ in self.tracks]), t0, T)
        )
        samples = np.union1d(knots, (knots[:-1] + knots[1:]) / 2.0)
        samples = np.union1d(samples, [t0, T])
        for t in samples:
            if not _feasible(self.normals, self.offsets_at(t)):
                raise InfeasiblePolyhedron(f"snapshot at t={t} is empty")

    def offsets_at(self, t: float) -> np.ndarray:
        return np.array([np.interp(t, tt, vv) for tt, vv in self.tracks])

    def snapshot(self, t: float) -> Polyhedron:
        t0, T = self.horizon
        if t < t0 - 1e-12 or t > T + 1e-12:
            raise TimeOutOfRange(f"t={t} outside horizon [{t0}, {T}]")
        if self._static_base is not None:
            return self._static_base
        return Polyhedron(self.normals, self.offsets_at(t), _checked=True)


def modulus_rate(M: MovingPolyhedron) -> float:
    """Rate bound of the moving set's absolute-continuity modulus."""
    return M.lip_offsets
