"""Discrete approximation of a feasible pair with explicit residuals.

From a continuous pair (x, u) the constructor samples node states on the
dyadic mesh, reads controls at right endpoints, and computes for every
interval the minimal residual radius r and direction rho that place the
difference quotient inside the dynamics' normal-cone inclusion
omega in -N_C(x_i) - g(t_i, x_i, y_i, u_i) + r * rho.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analysis
from .catchup import Trajectory
from .errors import LevelTooLarge
from .geometry import dist_to_normal_cone
from .problem import ControlSignal, SweepingProblem

LEVEL_GUARD = 20  # 2^m intervals beyond this exhausts the memory guard


@dataclass
class DiscretePair:
    """Sampled pair (x_m, y_m, u_m) with residual schedule (r_m, rho_m)."""

    level: int
    times: np.ndarray
    states: np.ndarray          # (N+1, n) node states
    delayed: np.ndarray         # (N+1, n) y_i = x_m(t_i - delta(t_i))
    controls: np.ndarray        # (N, d) right-endpoint samples
    radii: np.ndarray | None = None        # (N,)
    directions: np.ndarray | None = None   # (N, n), norm <= 1
    cone_points: np.ndarray | None = None  # (N, n) certified zeta_i in N_C(x_i)
    history: object = field(default=None, repr=False)

    @property
    def h(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def omegas(self) -> np.ndarray:
        return np.diff(self.states, axis=0) / self.h

    def trajectory(self) -> Trajectory:
        return Trajectory(self.times, self.states, self.history)

    def control_signal(self) -> analysis.StepSignal:
        return analysis.StepSignal(self.times, self.controls)

    def radius_signal(self) -> analysis.StepSignal:
        if self.radii is None:
            raise ValueError("residuals not computed yet")
        return analysis.StepSignal(self.times, self.radii[:, None])


def sample_pair(p: SweepingProblem, xbar: Trajectory, ubar: ControlSignal,
                m: int) -> DiscretePair:
    """Theorem-style sampling: exact node states, right-endpoint controls."""
    if m > LEVEL_GUARD:
        raise LevelTooLarge(f"level {m} exceeds 2^{LEVEL_GUARD} interval guard")
    t0, T = p.horizon
    N = 2**m
    times = t0 + np.arange(N + 1) * (T - t0) / N
    states = np.array([xbar.eval(t) for t in times])
    interp = Trajectory(times, states, p.history)
    delayed = np.array([interp.eval(p.delay.lag(t)) for t in times])
    controls = np.array([ubar.eval(times[i + 1]) for i in range(N)])
    return DiscretePair(level=m, times=times, states=states, delayed=delayed,
                        controls=controls, history=p.history)


def compute_residuals(dp: DiscretePair, p: SweepingProblem) -> DiscretePair:
    """Minimal residual radii certifying the discrete inclusion.

    r_i is the exact distance from -g_i - omega_i to the active-normal cone
    at x_i; the minimizing cone point zeta_i yields
    omega_i = -zeta_i - g_i + r_i * rho_i with ||rho_i|| <= 1.
    """
    C = p.moving_set.snapshot(p.horizon[0])
    N = len(dp.times) - 1
    n = dp.states.shape[1]
    omegas = dp.omegas
    radii = np.empty(N)
    dirs = np.zeros((N, n))
    zetas = np.zeros((N, n))
    for i in range(N):
        g_i = p.g(dp.times[i], dp.states[i], dp.delayed[i], dp.controls[i])
        w = -g_i - omegas[i]
        r, zeta = dist_to_normal_cone(C, dp.states[i], w, return_cone_point=True)
        radii[i] = r
        zetas[i] = zeta
        if r > 1e-14:
            dirs[i] = (omegas[i] + g_i + zeta) / r
    dp.radii = radii
    dp.directions = dirs
    dp.cone_points = zetas
    return dp


@dataclass(frozen=True)
class ConvergenceRow:
    level: int
    err_u_l2: float
    err_x_w12: float
    r_l2: float
    sup_err: float


@dataclass(frozen=True)
class ConvergenceTable:
    rows: list

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def convergence_study(p: SweepingProblem, xbar: Trajectory, ubar: ControlSignal,
                      m_range) -> ConvergenceTable:
    """Per-level approximation errors of the sampled pairs against (x, u)."""
    m_range = list(m_range)
    if any(b < a for a, b in zip(m_range, m_range[1:])):
        raise ValueError("m_range must be ascending")
    t0, T = p.horizon
    u_ref = ubar.as_step_signal((t0, T))
    rows = []
    for m in m_range:
        dp = compute_residuals(sample_pair(p, xbar, ubar, m), p)
        traj_m = dp.trajectory()
        rows.append(ConvergenceRow(
            level=m,
            err_u_l2=analysis.dist_L2(dp.control_signal(), u_ref),
            err_x_w12=analysis.dist_W12(traj_m, xbar),
            r_l2=analysis.dist_L2(
                dp.radius_signal(),
                analysis.StepSignal([t0, T], np.zeros((1, 1))),
            ),
            sup_err=analysis.sup_dist(traj_m.value_signal(), xbar.value_signal()),
        ))
    return ConvergenceTable(rows)
