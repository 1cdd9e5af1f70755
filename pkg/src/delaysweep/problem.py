"""Problem data model: delay, history, perturbation, controls, validators."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    TimeOutOfRange,
    UnknownCatalogEntry,
)
from .geometry import MovingPolyhedron, distance

_TOL = 1e-12


class DelaySpec:
    """Nonnegative, nonincreasing, Lipschitz delay t -> delta(t)."""

    __slots__ = ("kind", "times", "values", "lip", "max_delay", "domain")

    def __init__(self, kind, times, values, domain=None):
        self.kind = kind
        self.times = np.asarray(times, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if np.any(self.values < 0):
            raise ValueError("delay must be nonnegative (H4)")
        if np.any(np.diff(self.values) > 1e-12):
            raise ValueError("delay must be nonincreasing (H4)")
        self.max_delay = float(np.max(self.values))
        if not self.max_delay > 0:
            raise ValueError("maximal delay must be positive")
        if len(self.times) > 1:
            self.lip = float(np.max(np.abs(np.diff(self.values) / np.diff(self.times))))
        else:
            self.lip = 0.0
        self.domain = tuple(domain) if domain is not None else None

    @classmethod
    def constant(cls, value: float, domain=None) -> "DelaySpec":
        return cls("constant", [0.0], [value], domain)

    @classmethod
    def track(cls, times, values, domain=None) -> "DelaySpec":
        return cls("track", times, values, domain)

    def delay_at(self, t: float) -> float:
        if self.kind == "constant":
            return float(self.values[0])
        return float(np.interp(t, self.times, self.values))

    def lag(self, t: float) -> float:
        """Delayed argument t - delta(t)."""
        if self.domain is not None:
            a, b = self.domain
            if t < a - 1e-9 or t > b + 1e-9:
                raise TimeOutOfRange(f"t={t} outside [{a}, {b}]")
        return t - self.delay_at(t)

    def with_domain(self, domain) -> "DelaySpec":
        return DelaySpec(self.kind, self.times, self.values, domain)


class History:
    """Piecewise-affine history on [-Delta, t0] (or [t0 - Delta, t0])."""

    __slots__ = ("times", "values", "lip")

    def __init__(self, times, values):
        self.times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        self.values = values
        if len(self.times) != self.values.shape[0]:
            raise DimensionMismatch("history breakpoints/values mismatch")
        if len(self.times) > 1:
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("history breakpoints must increase")
            step = np.linalg.norm(np.diff(self.values, axis=0), axis=1)
            self.lip = float(np.max(step / np.diff(self.times)))
        else:
            self.lip = 0.0

    @classmethod
    def constant(cls, value, domain) -> "History":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls([domain[0], domain[1]], np.vstack([value, value]))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def domain(self):
        return (self.times[0], self.times[-1])

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.linalg.norm(self.values, axis=1)))

    def eval(self, s: float) -> np.ndarray:
        a, b = self.domain
        if s < a - 1e-9 or s > b + 1e-9:
            raise TimeOutOfRange(f"s={s} outside history domain [{a}, {b}]")
        idx = np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, len(self.times) - 2) \
            if len(self.times) > 1 else 0
        if len(self.times) == 1:
            return self.values[0].copy()
        t0, t1 = self.times[idx], self.times[idx + 1]
        w = (s - t0) / (t1 - t0)
        return (1 - w) * self.values[idx] + w * self.values[idx + 1]

    def slope_at(self, s: float) -> np.ndarray:
        if len(self.times) == 1:
            return np.zeros(self.dim)
        idx = np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, len(self.times) - 2)
        return (self.values[idx + 1] - self.values[idx]) / (self.times[idx + 1] - self.times[idx])


_PERTURBATION_REGISTRY: dict = {}


def register_perturbation(name: str, factory):
    """Register a custom pure evaluator factory under a catalog name."""
    _PERTURBATION_REGISTRY[name] = factory


class Perturbation:
    """Catalog perturbation g(t, x, y, u).

    The affine form is g = A x + B y + D u + e(t) with e either a constant
    vector or a piecewise-affine track. ``growth_beta`` is the declared
    linear-growth constant; validators sample it, never certify it.
    """

    __slots__ = ("form", "A", "B", "D", "e_times", "e_values", "growth_beta",
                 "lip_est", "_custom")

    def __init__(self, form, A, B, D, e_times, e_values, growth_beta, lip_est=None,
                 custom=None):
        self.form = form
        self.A = A
        self.B = B
        self.D = D
        self.e_times = e_times
        self.e_values = e_values
        self.growth_beta = float(growth_beta)
        self._custom = custom
        if lip_est is None and form == "affine":
            lip_est = float(
                np.linalg.norm(A, 2) + np.linalg.norm(B, 2) + np.linalg.norm(D, 2)
            )
        self.lip_est = lip_est

    @classmethod
    def affine(cls, A=None, B=None, D=None, e=None, *, n, d, beta=None) -> "Perturbation":
        A = np.zeros((n, n)) if A is None else np.asarray(A, dtype=float)
        B = np.zeros((n, n)) if B is None else np.asarray(B, dtype=float)
        D = np.zeros((n, d)) if D is None else np.asarray(D, dtype=float)
        if A.shape != (n, n) or B.shape != (n, n) or D.shape != (n, d):
            raise DimensionMismatch("affine perturbation matrix shapes")
        if e is None:
            e_times, e_values = np.array([0.0]), np.zeros((1, n))
        elif isinstance(e, tuple):
            e_times = np.asarray(e[0], dtype=float)
            e_values = np.atleast_2d(np.asarray(e[1], dtype=float))
        else:
            e_times, e_values = np.array([0.0]), np.atleast_2d(np.asarray(e, dtype=float))
        if beta is None:
            # conservative default consistent with ||g|| <= beta(1+||x||+||y||) on U
            beta = float(np.linalg.norm(A, 2) + np.linalg.norm(B, 2)) or 1.0
        return cls("affine", A, B, D, e_times, e_values, beta)

    @classmethod
    def from_catalog(cls, name: str, **kwargs) -> "Perturbation":
        if name == "affine":
            return cls.affine(**kwargs)
        if name in _PERTURBATION_REGISTRY:
            return _PERTURBATION_REGISTRY[name](**kwargs)
        raise UnknownCatalogEntry(f"unknown perturbation catalog entry {name!r}")

    @property
    def n(self) -> int:
        return self.A.shape[0] if self.form == "affine" else self._custom["n"]

    @property
    def d(self) -> int:
        return self.D.shape[1] if self.form == "affine" else self._custom["d"]

    def _e_at(self, t: float) -> np.ndarray:
        if len(self.e_times) == 1:
            return self.e_values[0]
        return np.array(
            [np.interp(t, self.e_times, self.e_values[:, i]) for i in range(self.e_values.shape[1])]
        )

    def __call__(self, t, x, y, u) -> np.ndarray:
        if self.form == "affine":
            return self.A @ x + self.B @ y + self.D @ u + self._e_at(t)
        return self._custom["fn"](t, x, y, u)


def eval_g(p: Perturbation, t, x, y, u) -> np.ndarray:
    return p(t, np.asarray(x, dtype=float), np.asarray(y, dtype=float),
             np.asarray(u, dtype=float))


class ControlSet:
    """Compact control set: a coordinate box or a finite point list."""

    __slots__ = ("kind", "lower", "upper", "points")

    def __init__(self, kind, lower=None, upper=None, points=None):
        self.kind = kind
        if kind == "box":
            self.lower = np.atleast_1d(np.asarray(lower, dtype=float))
            self.upper = np.atleast_1d(np.asarray(upper, dtype=float))
            if np.any(self.upper < self.lower):
                raise ValueError("box bounds inverted")
            self.points = None
        elif kind == "finite":
            self.points = np.atleast_2d(np.asarray(points, dtype=float))
            if self.points.shape[0] < 1:
                raise ValueError("finite control set must be nonempty")
            self.lower = self.points.min(axis=0)
            self.upper = self.points.max(axis=0)
        else:
            raise ValueError(f"unknown control set kind {kind!r}")

    @classmethod
    def box(cls, lower, upper) -> "ControlSet":
        return cls("box", lower=lower, upper=upper)

    @classmethod
    def finite(cls, points) -> "ControlSet":
        return cls("finite", points=points)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def dist(self, u) -> float:
        u = np.asarray(u, dtype=float)
        if self.kind == "box":
            return float(np.linalg.norm(u - np.clip(u, self.lower, self.upper)))
        return float(np.min(np.linalg.norm(self.points - u, axis=1)))

    def contains(self, u, tol: float = _TOL) -> bool:
        return self.dist(u) <= tol

    def project(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if self.kind == "box":
            return np.clip(u, self.lower, self.upper)
        return self.points[int(np.argmin(np.linalg.norm(self.points - u, axis=1)))].copy()

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "box":
            return rng.uniform(self.lower, self.upper)
        return self.points[rng.integers(len(self.points))].copy()


class ControlSignal:
    """Right-continuous piecewise-constant BV control."""

    __slots__ = ("times", "values")

    def __init__(self, times, values, control_set: ControlSet | None = None):
        self.times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        self.values = values
        if len(self.times) != self.values.shape[0]:
            raise DimensionMismatch("control breakpoints/values mismatch")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("control breakpoints must increase")
        if control_set is not None:
            for v in self.values:
                if not control_set.contains(v):
                    raise ValueError("control value outside the control set")

    @classmethod
    def constant(cls, value, t_start: float = 0.0) -> "ControlSignal":
        return cls([t_start], np.atleast_2d(np.asarray(value, dtype=float)))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def eval(self, t: float) -> np.ndarray:
        if t < self.times[0] - 1e-9:
            raise TimeOutOfRange(f"t={t} before first control breakpoint")
        idx = np.clip(np.searchsorted(self.times, t + 0.0, side="right") - 1,
                      0, len(self.times) - 1)
        return self.values[idx].copy()

    def total_variation(self) -> float:
        if len(self.times) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.values, axis=0), axis=1)))

    def as_step_signal(self, horizon):
        from .analysis import StepSignal

        t0, T = horizon
        times = self.times[(self.times > t0 + 1e-15) & (self.times < T - 1e-15)]
        bps = np.concatenate([[t0], times, [T]])
        vals = np.array([self.eval(t) for t in bps[:-1]])
        return StepSignal(bps, vals)


def eval_control(u: ControlSignal, t: float) -> np.ndarray:
    return u.eval(t)


def eval_history(h: History, s: float) -> np.ndarray:
    return h.eval(s)


def lag(d: DelaySpec, t: float) -> float:
    return d.lag(t)


class SweepingProblem:
    """Full data of the delayed sweeping control problem."""

    __slots__ = ("moving_set", "g", "delay", "history", "controls", "horizon")

    def __init__(self, moving_set: MovingPolyhedron, g: Perturbation,
                 delay: DelaySpec, history: History, controls: ControlSet,
                 horizon):
        t0, T = float(horizon[0]), float(horizon[1])
        if not (T > t0 >= 0.0):
            raise ValueError("horizon must satisfy T > t0 >= 0")
        if moving_set.dim != history.dim or g.n != moving_set.dim:
            raise DimensionMismatch("state dimensions inconsistent")
        if g.d != controls.dim:
            raise DimensionMismatch("control dimensions inconsistent")
        if history.domain[0] > t0 - delay.max_delay + 1e-9:
            raise ValueError("history must cover [t0 - max_delay, t0]")
        if history.domain[1] < t0 - 1e-9:
            raise ValueError("history must reach t0")
        self.moving_set = moving_set
        self.g = g
        self.delay = delay.with_domain((t0, T))
        self.history = history
        self.controls = controls
        self.horizon = (t0, T)
        x0 = history.eval(t0)
        if distance(moving_set.snapshot(t0), x0) > 1e-9:
            raise ValueError("initial state phi(t0) is not in C(t0)")

    @property
    def n(self) -> int:
        return self.moving_set.dim

    @property
    def d(self) -> int:
        return self.controls.dim

    @property
    def x0(self) -> np.ndarray:
        return self.history.eval(self.horizon[0])


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    estimate: float | None = None
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    samples: int
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed_checks(self):
        return [c for c in self.checks if not c.passed]


def validate_assumptions(p: SweepingProblem, samples: int = 1000,
                         seed: int = 0) -> ValidationReport:
    """Sample the standing assumptions; can falsify, never certify."""
    rng = np.random.default_rng(seed)
    t0, T = p.horizon
    checks = []

    # probe box for state arguments
    radius = 2.0 * (1.0 + p.history.sup_norm + np.linalg.norm(p.x0))

    # growth: ||g|| <= beta (1 + ||x|| + ||y||)
    worst = 0.0
    for _ in range(samples):
        t = rng.uniform(t0, T)
        x = rng.uniform(-radius, radius, p.n)
        y = rng.uniform(-radius, radius, p.n)
        u = p.controls.sample(rng)
        lhs = np.linalg.norm(p.g(t, x, y, u))
        rhs = p.g.growth_beta * (1.0 + np.linalg.norm(x) + np.linalg.norm(y))
        worst = max(worst, lhs - rhs)
    checks.append(CheckResult(
        "growth(H3)", worst <= 1e-9, worst,
        f"max sampled ||g|| - beta(1+||x||+||y||) over {samples} samples"))

    # Lipschitz estimate in (t, x, y) uniformly on U
    lip = 0.0
    for _ in range(samples // 2):
        t = rng.uniform(t0, T)
        x = rng.uniform(-radius, radius, p.n)
        y = rng.uniform(-radius, radius, p.n)
        u = p.controls.sample(rng)
        h = 1e-5 * radius
        dx = rng.standard_normal(p.n)
        dx *= h / (np.linalg.norm(dx) + 1e-300)
        num = np.linalg.norm(p.g(t, x + dx, y, u) - p.g(t, x, y, u))
        num2 = np.linalg.norm(p.g(t, x, y + dx, u) - p.g(t, x, y, u))
        lip = max(lip, num / h, num2 / h)
    lip_ok = p.g.lip_est is None or lip <= max(1.05 * p.g.lip_est, p.g.lip_est + 1e-9)
    checks.append(CheckResult(
        "lipschitz(H2)", lip_ok, lip,
        "finite-difference Lipschitz estimate vs declared bound"))

    # delay: nonnegative, nonincreasing on breakpoints and samples
    ts = np.sort(np.concatenate([rng.uniform(t0, T, 64), [t0, T], np.clip(p.delay.times, t0, T)]))
    dvals = np.array([p.delay.delay_at(t) for t in ts])
    nonneg = bool(np.all(dvals >= -1e-12))
    noninc = bool(np.all(np.diff(dvals) <= 1e-9))
    checks.append(CheckResult("delay(H4)", nonneg and noninc,
                              float(np.max(np.diff(dvals), initial=0.0)),
                              "nonnegative and nonincreasing on samples"))

    # lag monotone (consequence of H4)
    lags = ts - dvals
    checks.append(CheckResult("lag-monotone", bool(np.all(np.diff(lags) >= -1e-12)),
                              float(np.min(np.diff(lags), initial=0.0)),
                              "t - delta(t) nondecreasing on samples"))

    # history Lipschitz constant (H5)
    checks.append(CheckResult("history(H5)", np.isfinite(p.history.lip),
                              p.history.lip, "piecewise-affine slope bound"))

    # set snapshots nonempty (C1) -- sampled; construction already verified breakpoints
    feasible = True
    for t in np.linspace(t0, T, 17):
        snap = p.moving_set.snapshot(t)
        if not _snapshot_nonempty(snap):
            feasible = False
            break
    checks.append(CheckResult("sets-nonempty(C1)", feasible, None,
                              "snapshot feasibility on a uniform sample"))

    # initial compatibility
    d0 = distance(p.moving_set.snapshot(t0), p.x0)
    checks.append(CheckResult("initial-compatibility", d0 <= 1e-9, d0,
                              "distance of phi(t0) to C(t0)"))

    return ValidationReport(samples=samples, checks=checks)


def _snapshot_nonempty(snap) -> bool:
    from .geometry import _feasible

    return _feasible(snap.normals, snap.offsets)
