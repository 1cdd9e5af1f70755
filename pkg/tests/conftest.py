import pathlib

import pytest

import delaysweep as ds

SCENARIO_DIR = pathlib.Path(__file__).resolve().parent.parent / "scenarios"

SCENARIO_NAMES = [
    "moving_interval",
    "delayed_feedback",
    "steering_1d",
    "tracking_optimal",
    "static_decay",
]


def scenario_path(name: str) -> str:
    return str(SCENARIO_DIR / f"{name}.yaml")


@pytest.fixture(scope="session")
def scenarios():
    return {name: ds.load_scenario(scenario_path(name))
            for name in SCENARIO_NAMES}


@pytest.fixture(scope="session")
def suite_runs(scenarios):
    """One catching-up solve per scenario at k = 2^10 (shared across tests)."""
    runs = {}
    for name, sc in scenarios.items():
        traj, report = ds.solve_delayed(sc.problem, sc.control_signal, 2**10,
                                        substeps=4)
        runs[name] = (traj, report)
    return runs


@pytest.fixture(scope="session")
def delayed_feedback_reference(scenarios):
    """High-resolution reference pair for the delay-feedback scenario."""
    sc = scenarios["delayed_feedback"]
    traj, report = ds.solve_delayed(sc.problem, sc.control_signal, 2**14,
                                    substeps=4)
    return sc, traj, report
