import json

import numpy as np
import pytest
import yaml

import delaysweep as ds
from delaysweep.cli import main
from delaysweep.errors import ScenarioError
from delaysweep.scenario import dump_scenario, parse_scenario

from conftest import scenario_path


def test_round_trip_identity(tmp_path, scenarios):
    for name, sc in scenarios.items():
        out = tmp_path / f"{name}.yaml"
        dump_scenario(sc, out)
        sc2 = ds.load_scenario(out)
        assert sc2.raw == sc.raw
        p1, p2 = sc.problem, sc2.problem
        assert np.array_equal(p1.moving_set.normals, p2.moving_set.normals)
        assert p1.horizon == p2.horizon
        assert np.array_equal(p1.x0, p2.x0)
        for t in np.linspace(*p1.horizon, 7):
            assert np.array_equal(p1.moving_set.offsets_at(t),
                                  p2.moving_set.offsets_at(t))


def test_unknown_top_level_key_rejected():
    with pytest.raises(ScenarioError, match="unknown keys"):
        parse_scenario({"name": "x", "horizon": [0, 1], "geometry": {},
                        "perturbation": {}, "delay": {}, "history": {},
                        "controls": {}, "bogus": 1})


def test_unknown_section_key_rejected(scenarios):
    raw = dict(scenarios["moving_interval"].raw)
    raw = json.loads(json.dumps(raw))  # deep copy
    raw["delay"] = {"constant": 0.25, "typo": 1}
    with pytest.raises(ScenarioError, match="delay"):
        parse_scenario(raw)


def test_missing_geometry_is_parse_error(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text("name: bad\nhorizon: [0.0, 1.0]\n")
    assert main(["validate", str(path)]) == 2


def test_validate_ok_exit_zero():
    assert main(["validate", scenario_path("delayed_feedback")]) == 0


def test_validate_increasing_delay_rejected(tmp_path):
    raw = yaml.safe_load(open(scenario_path("delayed_feedback")))
    raw["delay"] = {"times": [0.0, 1.0], "values": [0.1, 0.5]}
    path = tmp_path / "incdelay.yaml"
    path.write_text(yaml.safe_dump(raw))
    # increasing delay violates the delay model: rejected at parse/build time
    assert main(["validate", str(path)]) == 2


def test_simulate_outputs_and_determinism(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    for out in (out1, out2):
        assert main(["simulate", scenario_path("moving_interval"),
                     "--level", "32", "--out", str(out)]) == 0
    csv1 = (out1 / "trajectory.csv").read_text()
    assert csv1 == (out2 / "trajectory.csv").read_text()
    js1 = json.loads((out1 / "report.json").read_text())
    js2 = json.loads((out2 / "report.json").read_text())
    js1.pop("wall_time"), js2.pop("wall_time")
    assert js1 == js2
    assert (out1 / "trajectory.png").exists()
    header = csv1.splitlines()[0]
    assert header == "t,x_1,u_1,dist_to_C,active_constraints"


def test_simulate_static_scenario_constant_segments(tmp_path):
    out = tmp_path / "sim"
    assert main(["simulate", scenario_path("static_decay"),
                 "--level", "16", "--out", str(out)]) == 0
    rows = (out / "trajectory.csv").read_text().splitlines()[1:]
    xs = [float(r.split(",")[1]) for r in rows]
    assert xs[0] == pytest.approx(1.0)
    assert all(b <= a for a, b in zip(xs, xs[1:]))  # decaying feedback


def test_simulate_bad_out_dir_io_exit(tmp_path):
    target = tmp_path / "blocked"
    target.write_text("file, not a directory")
    code = main(["simulate", scenario_path("moving_interval"),
                 "--level", "8", "--out", str(target)])
    assert code == 5


def test_refine_cli(tmp_path):
    out = tmp_path / "ref"
    assert main(["refine", scenario_path("delayed_feedback"),
                 "--tol", "1e-3", "--kmax", "512", "--out", str(out)]) == 0
    lines = (out / "cauchy.csv").read_text().splitlines()
    assert lines[0] == "k_coarse,k_fine,sup_gap"
    gaps = [float(l.split(",")[2]) for l in lines[1:]]
    assert gaps == sorted(gaps, reverse=True)


def test_feasible_cli(tmp_path):
    out = tmp_path / "feas"
    assert main(["feasible", scenario_path("delayed_feedback"),
                 "--levels", "4:6", "--reference-level", "10",
                 "--out", str(out)]) == 0
    lines = (out / "feasible.csv").read_text().splitlines()
    assert lines[0] == "level,k,err_u_l2,err_x_w12,r_l2,sup_err"
    assert len(lines) == 4


def test_optimize_cli_with_oracle(tmp_path):
    out = tmp_path / "opt"
    assert main(["optimize", scenario_path("steering_1d"),
                 "--level", "2", "--starts", "2", "--seed", "0",
                 "--oracle-grid", "5", "--out", str(out)]) == 0
    payload = json.loads((out / "optimize.json").read_text())
    assert payload["J_local"] <= payload["J_oracle"] + 1e-3
    assert payload["feasible_local"] and payload["feasible_oracle"]


def test_optimize_cli_singleton_controls(tmp_path):
    out = tmp_path / "opt0"
    assert main(["optimize", scenario_path("static_decay"),
                 "--level", "3", "--starts", "1", "--out", str(out)]) == 0
    payload = json.loads((out / "optimize.json").read_text())
    assert np.allclose(payload["controls_local"], 0.0)  # u-hat == u-bar == 0


def test_optimize_cli_enumeration_guard(tmp_path):
    code = main(["optimize", scenario_path("steering_1d"),
                 "--level", "20", "--starts", "1", "--oracle-grid", "9",
                 "--out", str(tmp_path / "g")])
    assert code == 4  # numerical-failure exit for guard trips


def test_optimize_cli_requires_cost(tmp_path):
    code = main(["optimize", scenario_path("moving_interval"),
                 "--level", "2", "--out", str(tmp_path / "n")])
    assert code == 3
