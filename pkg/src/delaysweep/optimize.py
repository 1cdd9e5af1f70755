"""Discrete Mayer problems around a reference pair.

States are eliminated by a projected-step rollout, so the normal-cone
dynamics constraint holds by construction; the remaining box/proximity
constraints are enforced by exact penalty inside a multi-start projected
coordinate-descent solver, with a brute-force control-grid oracle for
verification.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .catchup import Trajectory
from .discretize import compute_residuals, sample_pair
from .errors import (
    DimensionMismatch,
    EnumerationTooLarge,
    NoFeasibleStart,
    UnknownCatalogEntry,
)
from .geometry import distance, dist_to_normal_cone, project
from .problem import ControlSignal, DelaySpec, SweepingProblem

HARD_TOL = 1e-9


class MayerCost:
    """Terminal cost catalog: quadratic-to-target or linear."""

    __slots__ = ("form", "target", "q")

    def __init__(self, form, target=None, q=None):
        self.form = form
        if form == "quadratic_target":
            self.target = np.atleast_1d(np.asarray(target, dtype=float))
            self.q = None
        elif form == "linear":
            self.q = np.atleast_1d(np.asarray(q, dtype=float))
            self.target = None
        else:
            raise UnknownCatalogEntry(f"unknown cost form {form!r}")

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if self.form == "quadratic_target":
            d = x - self.target
            return float(d @ d)
        return float(self.q @ x)


@dataclass
class Candidate:
    states: np.ndarray    # (N+1, n)
    controls: np.ndarray  # (N, d)
    delayed: np.ndarray   # (N+1, n)

    @property
    def omegas(self) -> np.ndarray:
        return np.diff(self.states, axis=0)


@dataclass
class SolveResult:
    candidate: Candidate | None
    objective: float
    feasibility: dict
    feasible: bool
    trace: list = field(default_factory=list)
    evaluations: int = 0


def delayed_derivative_signal(xbar: Trajectory, delay: DelaySpec,
                              horizon) -> analysis.StepSignal:
    """Piecewise-constant signal t -> d/ds xbar(s) at s = t - delta(t).

    The lag map is piecewise-affine with slope >= 1 (delta nonincreasing),
    so its breakpoint preimages are computed exactly segment by segment.
    """
    t0, T = horizon
    lag_knots = np.unique(np.concatenate((
        [t0, T], np.clip(delay.times, t0, T))))
    source_bps = np.unique(np.concatenate((xbar.history.times, xbar.times)))
    cuts = [t0, T]
    for a, b in zip(lag_knots[:-1], lag_knots[1:]):
        la, lb = a - delay.delay_at(a), b - delay.delay_at(b)
        if b - a < 1e-15:
            continue
        slope = (lb - la) / (b - a)
        inside = source_bps[(source_bps > la + 1e-14) & (source_bps < lb - 1e-14)]
        cuts.extend(a + (inside - la) / slope)
        cuts.append(a)
    grid = np.unique(np.asarray(cuts, dtype=float))
    grid = grid[(grid >= t0 - 1e-14) & (grid <= T + 1e-14)]
    mids = (grid[:-1] + grid[1:]) / 2.0
    values = np.array([xbar.slope_at(t - delay.delay_at(t)) for t in mids])
    return analysis.StepSignal(grid, values)


class DiscreteOCP:
    """Level-m discrete Mayer problem around a reference pair."""

    def __init__(self, problem: SweepingProblem, cost: MayerCost,
                 reference: Trajectory, ref_control: ControlSignal,
                 level: int, epsilon: float, lipschitz_cap: float | None = None,
                 residual_radii=None, residual_dirs=None):
        if not problem.moving_set.is_static:
            raise ValueError("discrete Mayer problems require a static polyhedron")
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.problem = problem
        self.cost = cost
        self.reference = reference
        self.ref_control = ref_control
        self.level = level
        self.epsilon = float(epsilon)
        self.C = problem.moving_set.snapshot(problem.horizon[0])
        t0, T = problem.horizon
        self.N = 2**level
        self.h = (T - t0) / self.N
        self.times = t0 + np.arange(self.N + 1) * (T - t0) / self.N
        self.lags = np.array([problem.delay.lag(t) for t in self.times])
        self.x0 = problem.x0

        dp = sample_pair(problem, reference, ref_control, level)
        if residual_radii is None or residual_dirs is None:
            dp = compute_residuals(dp, problem)
            residual_radii, residual_dirs = dp.radii, dp.directions
        self.radii = np.asarray(residual_radii, dtype=float)
        self.dirs = np.asarray(residual_dirs, dtype=float)
        self.sampled_reference = dp
        self.ref_states = dp.states                      # xbar(t_i)
        self.ref_delayed = np.array([reference.eval(s) for s in self.lags])

        if lipschitz_cap is None:
            lipschitz_cap = 1.5 * reference.lipschitz
        self.lipschitz_cap = float(lipschitz_cap)

        self._build_objective_tables()

    @property
    def d(self) -> int:
        return self.problem.d

    # -- objective ---------------------------------------------------------

    def _build_objective_tables(self):
        t0, T = self.problem.horizon
        ref_d = self.reference.derivative_signal()
        ref_dd = delayed_derivative_signal(self.reference, self.problem.delay,
                                           (t0, T))
        ref_u = self.ref_control.as_step_signal((t0, T))
        grid = np.unique(np.concatenate(
            [self.times, ref_d.times, ref_dd.times, ref_u.times]))
        grid = grid[(grid >= t0 - 1e-14) & (grid <= T + 1e-14)]
        self._grid = grid
        self._seg_len = np.diff(grid)
        self._seg_idx = np.clip(
            np.searchsorted(self.times, grid[:-1], side="right") - 1, 0, self.N - 1)
        mids = (grid[:-1] + grid[1:]) / 2.0
        n_seg = len(mids)
        self._ref_d = np.array([ref_d(t) for t in mids]).reshape(n_seg, -1)
        self._ref_dd = np.array([ref_dd(t) for t in mids]).reshape(n_seg, -1)
        self._ref_u = np.array([ref_u(t) for t in mids]).reshape(n_seg, -1)

    def proximity(self, cand: Candidate) -> float:
        """Exact value of the squared-proximity integral."""
        omegas = cand.omegas / self.h
        etas = np.diff(cand.delayed, axis=0) / self.h
        i = self._seg_idx
        a = omegas[i] - self._ref_d
        b = etas[i] - self._ref_dd
        c = cand.controls[i] - self._ref_u
        return float(np.sum(self._seg_len * (
            np.sum(a * a, axis=1) + np.sum(b * b, axis=1) + np.sum(c * c, axis=1))))

    def objective(self, cand: Candidate) -> float:
        if cand.states.shape != (self.N + 1, self.problem.n) or \
                cand.controls.shape != (self.N, self.d):
            raise DimensionMismatch("candidate does not match the level")
        return self.cost(cand.states[-1]) + self.proximity(cand)

    # -- dynamics ----------------------------------------------------------

    def delayed_states(self, states: np.ndarray) -> np.ndarray:
        traj = Trajectory(self.times, states, self.problem.history)
        return np.array([traj.eval(s) for s in self.lags])

    def rollout(self, controls: np.ndarray) -> Candidate:
        """Projected-step elimination of the dynamics constraint."""
        controls = np.atleast_2d(np.asarray(controls, dtype=float))
        if controls.shape != (self.N, self.d):
            raise DimensionMismatch("controls must be (2^m, d)")
        n = self.problem.n
        states = np.empty((self.N + 1, n))
        delayed = np.empty((self.N + 1, n))
        states[0] = self.x0
        t0 = self.times[0]
        hist = self.problem.history

        def partial_eval(s, upto):
            if s <= t0 + 1e-15:
                return hist.eval(min(s, t0))
            idx = min(int(np.searchsorted(self.times[: upto + 1], s, side="right")) - 1,
                      upto - 1)
            ta, tb = self.times[idx], self.times[idx + 1]
            w = (s - ta) / (tb - ta)
            return (1 - w) * states[idx] + w * states[idx + 1]

        g = self.problem.g
        for i in range(self.N):
            delayed[i] = partial_eval(self.lags[i], max(i, 1))
            gi = g(self.times[i], states[i], delayed[i], controls[i])
            z = states[i] + self.h * (-gi + self.radii[i] * self.dirs[i])
            states[i + 1] = project(self.C, z).point
        delayed[self.N] = partial_eval(self.lags[self.N], self.N)
        return Candidate(states=states, controls=controls, delayed=delayed)

    # -- feasibility -------------------------------------------------------

    def feasibility(self, cand: Candidate, tol: float = HARD_TOL) -> dict:
        """Max violation per constraint family (all entries >= 0)."""
        N, h = self.N, self.h
        omegas = cand.omegas / h
        viol = {}

        dyn = 0.0
        for i in range(N):
            gi = self.problem.g(self.times[i], cand.states[i], cand.delayed[i],
                                cand.controls[i])
            zeta = -omegas[i] - gi + self.radii[i] * self.dirs[i]
            membership = distance(self.C, cand.states[i])
            if membership > tol:
                xq = project(self.C, cand.states[i]).point
                dyn = max(dyn, membership + dist_to_normal_cone(self.C, xq, zeta))
            else:
                xq = cand.states[i] if self.C.contains(cand.states[i]) \
                    else project(self.C, cand.states[i]).point
                dyn = max(dyn, dist_to_normal_cone(self.C, xq, zeta))
        viol["dynamics"] = dyn
        viol["endpoint"] = float(max(0.0, np.max(
            self.C.normals @ cand.states[-1] - self.C.offsets)))
        viol["initial"] = float(np.linalg.norm(cand.states[0] - self.x0))
        viol["lipschitz"] = float(max(0.0, np.max(
            np.linalg.norm(omegas, axis=1)) - self.lipschitz_cap))
        viol["prox_state"] = float(max(0.0, np.max(np.linalg.norm(
            cand.states[:N] - self.ref_states[:N], axis=1)) - self.epsilon / 2))
        viol["prox_delayed"] = float(max(0.0, np.max(np.linalg.norm(
            cand.delayed[:N] - self.ref_delayed[:N], axis=1)) - self.epsilon / 2))
        viol["control"] = float(max(
            self.problem.controls.dist(u) for u in cand.controls))
        viol["energy"] = float(max(0.0, self.proximity(cand) - self.epsilon / 2))
        return viol

    def is_feasible(self, cand: Candidate, tol: float = HARD_TOL) -> bool:
        return all(v <= tol for v in self.feasibility(cand, tol).values())

    def _soft_violation(self, cand: Candidate) -> float:
        """Penalty terms for the constraints not satisfied by construction."""
        N, h = self.N, self.h
        omegas = cand.omegas / h
        v = max(0.0, float(np.max(self.C.normals @ cand.states[-1] - self.C.offsets)))
        v += max(0.0, float(np.max(np.linalg.norm(omegas, axis=1))) - self.lipschitz_cap)
        v += max(0.0, float(np.max(np.linalg.norm(
            cand.states[:N] - self.ref_states[:N], axis=1))) - self.epsilon / 2)
        v += max(0.0, float(np.max(np.linalg.norm(
            cand.delayed[:N] - self.ref_delayed[:N], axis=1))) - self.epsilon / 2)
        v += max(0.0, self.proximity(cand) - self.epsilon / 2)
        return v

    def reference_candidate(self) -> Candidate:
        """The Theorem-style sampled pair as a candidate (not a rollout)."""
        dp = self.sampled_reference
        return Candidate(states=dp.states.copy(), controls=dp.controls.copy(),
                         delayed=dp.delayed.copy())


# -- solvers ---------------------------------------------------------------


def _golden_section(f, lo, hi, iters: int = 24):
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc < fd else (d, fd)


def solve_local(ocp: DiscreteOCP, starts: int = 8, seed: int = 0,
                max_passes: int = 12, penalty_ramp=(1e2, 1e4, 1e6),
                scan_points: int = 7, golden_iters: int = 20) -> SolveResult:
    """Multi-start projected coordinate descent over rollout controls."""
    ref = ocp.reference_candidate()
    ref_viol = ocp.feasibility(ref, tol=1e-6)
    if any(v > 1e-6 for v in ref_viol.values()):
        raise NoFeasibleStart(
            f"sampled reference violates constraints: {ref_viol}")

    rng = np.random.default_rng(seed)
    U = ocp.problem.controls
    n_ctrl, d = ocp.N, ocp.d
    evaluations = 0

    def penalized(controls, w):
        nonlocal evaluations
        evaluations += 1
        cand = ocp.rollout(controls)
        return ocp.objective(cand) + w * ocp._soft_violation(cand), cand

    start_controls = [ocp.sampled_reference.controls.copy()]
    for _ in range(max(starts - 1, 0)):
        start_controls.append(
            np.array([U.sample(rng) for _ in range(n_ctrl)]).reshape(n_ctrl, d))

    best = None
    all_traces = []
    for u0 in start_controls:
        u = u0.copy()
        trace = []
        for w in penalty_ramp:
            f_cur, _ = penalized(u, w)
            trace.append(f_cur)
            for _ in range(max_passes):
                improved = False
                for i in range(n_ctrl):
                    if U.kind == "finite":
                        for pnt in U.points:
                            if np.allclose(pnt, u[i]):
                                continue
                            u_try = u.copy()
                            u_try[i] = pnt
                            f_try, _ = penalized(u_try, w)
                            if f_try < f_cur - 1e-14:
                                u, f_cur = u_try, f_try
                                trace.append(f_cur)
                                improved = True
                    else:
                        for c in range(d):
                            lo, hi = U.lower[c], U.upper[c]
                            if hi - lo < 1e-15:
                                continue

                            def f1(val, i=i, c=c):
                                u_try = u.copy()
                                u_try[i, c] = val
                                return penalized(u_try, w)[0]

                            scan = np.linspace(lo, hi, scan_points)
                            fs = [f1(v) for v in scan]
                            jbest = int(np.argmin(fs))
                            a = scan[max(jbest - 1, 0)]
                            b = scan[min(jbest + 1, scan_points - 1)]
                            v_star, f_star = _golden_section(f1, a, b, golden_iters)
                            if fs[jbest] < f_star:
                                v_star, f_star = scan[jbest], fs[jbest]
                            if f_star < f_cur - 1e-14:
                                u[i, c] = v_star
                                f_cur = f_star
                                trace.append(f_cur)
                                improved = True
                if not improved:
                    break
        cand = ocp.rollout(u)
        J = ocp.objective(cand)
        feas = ocp.feasibility(cand)
        ok = all(v <= HARD_TOL for v in feas.values())
        key = (not ok, J, tuple(np.round(u.ravel(), 12)))
        if best is None or key < best[0]:
            best = (key, cand, J, feas, ok)
        all_traces.append(trace)

    _, cand, J, feas, ok = best
    return SolveResult(candidate=cand, objective=J, feasibility=feas,
                       feasible=ok, trace=all_traces, evaluations=evaluations)


def solve_oracle(ocp: DiscreteOCP, grid_per_control: int,
                 guard: int = 10_000_000) -> SolveResult:
    """Exhaustive control-grid rollout search (verification oracle)."""
    U = ocp.problem.controls
    if U.kind == "finite":
        values = U.points
    else:
        axes = [np.linspace(U.lower[c], U.upper[c], grid_per_control)
                for c in range(ocp.d)]
        values = np.array(list(itertools.product(*axes)))
    total = len(values) ** ocp.N
    if total > guard:
        raise EnumerationTooLarge(
            f"{len(values)}^{ocp.N} = {total} rollouts exceed the guard")

    best = None
    count = 0
    for combo in itertools.product(range(len(values)), repeat=ocp.N):
        controls = values[list(combo)]
        cand = ocp.rollout(controls)
        J = ocp.objective(cand)
        key = (J, tuple(controls.ravel()))
        if best is not None and key >= best[0]:
            continue
        feas = ocp.feasibility(cand)
        if any(v > HARD_TOL for v in feas.values()):
            continue
        count += 1
        best = (key, cand, J, feas)
    if best is None:
        return SolveResult(candidate=None, objective=float("inf"),
                           feasibility={}, feasible=False,
                           evaluations=len(values) ** ocp.N)
    _, cand, J, feas = best
    return SolveResult(candidate=cand, objective=J, feasibility=feas,
                       feasible=True, evaluations=len(values) ** ocp.N)


@dataclass(frozen=True)
class StudyRow:
    level: int
    objective: float
    err_x_w12: float
    err_u_l2: float
    limsup_slack: float
    feasible: bool


def convergence_study_thm42(problem: SweepingProblem, cost: MayerCost,
                            reference: Trajectory, ref_control: ControlSignal,
                            epsilon: float, m_range, starts: int = 4,
                            seed: int = 0, lipschitz_cap: float | None = None,
                            solver_options: dict | None = None) -> list:
    """Solve the discrete problems across levels and tabulate convergence."""
    t0, T = problem.horizon
    j_ref = cost(reference.eval(T))
    u_ref = ref_control.as_step_signal((t0, T))
    rows = []
    for m in m_range:
        ocp = DiscreteOCP(problem, cost, reference, ref_control, m, epsilon,
                          lipschitz_cap=lipschitz_cap)
        res = solve_local(ocp, starts=starts, seed=seed,
                          **(solver_options or {}))
        cand = res.candidate
        traj = Trajectory(ocp.times, cand.states, problem.history)
        u_sig = analysis.StepSignal(ocp.times, cand.controls)
        rows.append(StudyRow(
            level=m,
            objective=res.objective,
            err_x_w12=analysis.dist_W12(traj, reference),
            err_u_l2=analysis.dist_L2(u_sig, u_ref),
            limsup_slack=res.objective - j_ref,
            feasible=res.feasible,
        ))
    return rows
