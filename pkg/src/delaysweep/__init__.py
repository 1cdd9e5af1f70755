"""Solvers and discrete Mayer studies for delayed sweeping processes.

The dynamics move a state inside a time-dependent polyhedron: away from the
boundary the state follows a delayed perturbation, and on the boundary the
normal cone of the set absorbs the outward component.  The package provides
a catching-up time stepper, a priori norm bounds, sampled-pair residual
studies, discrete Mayer problems around a reference pair, exact
piecewise-polynomial signal distances, and a scenario-file CLI.
"""

from .analysis import (
    AffineSignal,
    StepSignal,
    dist_L2,
    dist_W12,
    gronwall_envelope,
    merged_grid,
    sup_dist,
)
from .catchup import (
    CauchyReport,
    ForcingRecord,
    Mesh,
    SolveReport,
    Trajectory,
    beta_normalized,
    bound_M,
    bound_l,
    bound_l_statement,
    check_lemma1_estimate,
    refine_until_cauchy,
    solve_delayed,
    solve_undelayed,
)
from .discretize import (
    ConvergenceRow,
    ConvergenceTable,
    DiscretePair,
    compute_residuals,
    convergence_study,
    sample_pair,
)
from .errors import (
    DimensionMismatch,
    DomainMismatch,
    EnumerationTooLarge,
    InfeasiblePolyhedron,
    InfeasibleStart,
    LevelTooLarge,
    MissingForcingRecord,
    NoFeasibleStart,
    NumericalFailure,
    PointNotInSet,
    ScenarioError,
    SweepError,
    TimeOutOfRange,
    UnknownCatalogEntry,
    ValidationFailure,
)
from .geometry import (
    ActiveSetResult,
    MovingPolyhedron,
    Polyhedron,
    dist_to_normal_cone,
    distance,
    modulus_rate,
    normal_cone_contains,
    project,
)
from .optimize import (
    Candidate,
    DiscreteOCP,
    MayerCost,
    SolveResult,
    StudyRow,
    convergence_study_thm42,
    delayed_derivative_signal,
    solve_local,
    solve_oracle,
)
from .problem import (
    CheckResult,
    ControlSet,
    ControlSignal,
    DelaySpec,
    History,
    Perturbation,
    SweepingProblem,
    ValidationReport,
    eval_control,
    eval_g,
    eval_history,
    lag,
    register_perturbation,
    validate_assumptions,
)
from .scenario import Scenario, dump_scenario, load_scenario, parse_scenario

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
