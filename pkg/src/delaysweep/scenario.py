"""YAML scenario files: schema validation, loading, and round-trip dumps.

A scenario bundles a full problem instance (geometry, perturbation, delay,
history, control set, horizon) together with an optional reference control
signal, an optional terminal cost, and optional study parameters.  Unknown
keys are rejected so typos fail loudly instead of being ignored.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from .errors import ScenarioError
from .geometry import MovingPolyhedron, Polyhedron
from .optimize import MayerCost
from .problem import (
    ControlSet,
    ControlSignal,
    DelaySpec,
    History,
    Perturbation,
    SweepingProblem,
)

_TOP_KEYS = {"name", "geometry", "perturbation", "delay", "history",
             "controls", "horizon", "cost", "study"}
_GEOMETRY_KEYS = {"normals", "tracks"}
_TRACK_KEYS = {"constant", "times", "values"}
_PERTURBATION_KEYS = {"A", "B", "D", "e", "beta"}
_DELAY_KEYS = {"constant", "times", "values"}
_HISTORY_KEYS = {"constant", "times", "values"}
_CONTROL_KEYS = {"box", "finite", "signal"}
_BOX_KEYS = {"lower", "upper"}
_FINITE_KEYS = {"points"}
_SIGNAL_KEYS = {"constant", "times", "values"}
_COST_KEYS = {"form", "target", "q", "epsilon"}
_STUDY_KEYS = {"level_range", "reference_level", "starts", "seed", "substeps"}


def _require_keys(section: dict, allowed: set, where: str):
    if not isinstance(section, dict):
        raise ScenarioError(f"{where}: expected a mapping")
    extra = set(section) - allowed
    if extra:
        raise ScenarioError(f"{where}: unknown keys {sorted(extra)}")


def _need(section: dict, key: str, where: str):
    if key not in section:
        raise ScenarioError(f"{where}: missing required key {key!r}")
    return section[key]


def _track_or_constant(raw, where: str, horizon):
    """Normalize {constant: c} / {times, values} to (times, values)."""
    _require_keys(raw, _TRACK_KEYS, where)
    if "constant" in raw:
        if "times" in raw or "values" in raw:
            raise ScenarioError(f"{where}: give either constant or times/values")
        c = raw["constant"]
        return list(horizon), [c, c]
    times = _need(raw, "times", where)
    values = _need(raw, "values", where)
    if len(times) != len(values):
        raise ScenarioError(f"{where}: times and values lengths differ")
    return times, values


@dataclass
class Scenario:
    name: str
    problem: SweepingProblem
    control_signal: ControlSignal
    cost: MayerCost | None = None
    epsilon: float | None = None
    study: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return self.raw


def parse_scenario(data: dict) -> Scenario:
    _require_keys(data, _TOP_KEYS, "scenario")
    name = str(_need(data, "name", "scenario"))
    horizon = _need(data, "horizon", "scenario")
    if not (isinstance(horizon, (list, tuple)) and len(horizon) == 2):
        raise ScenarioError("horizon: expected [t0, T]")
    t0, T = float(horizon[0]), float(horizon[1])

    geo = _need(data, "geometry", "scenario")
    _require_keys(geo, _GEOMETRY_KEYS, "geometry")
    normals = np.asarray(_need(geo, "normals", "geometry"), dtype=float)
    raw_tracks = _need(geo, "tracks", "geometry")
    if len(raw_tracks) != len(normals):
        raise ScenarioError("geometry: one track per constraint row required")
    tracks = [_track_or_constant(tr, f"geometry.tracks[{j}]", (t0, T))
              for j, tr in enumerate(raw_tracks)]
    try:
        moving = MovingPolyhedron(normals, tracks, (t0, T))
    except Exception as exc:
        raise ScenarioError(f"geometry: {exc}") from exc

    pert = _need(data, "perturbation", "scenario")
    _require_keys(pert, _PERTURBATION_KEYS, "perturbation")
    n = normals.shape[1]
    e_raw = pert.get("e")
    e_kwargs = {}
    if e_raw is not None:
        _require_keys(e_raw, _SIGNAL_KEYS, "perturbation.e")
        if "constant" in e_raw:
            e_kwargs["e"] = np.asarray(e_raw["constant"], dtype=float)
        else:
            e_kwargs["e"] = (np.asarray(_need(e_raw, "times", "perturbation.e"),
                                        dtype=float),
                             np.asarray(_need(e_raw, "values", "perturbation.e"),
                                        dtype=float))
    ctrl = _need(data, "controls", "scenario")
    _require_keys(ctrl, _CONTROL_KEYS, "controls")
    if "box" in ctrl and "finite" in ctrl:
        raise ScenarioError("controls: give either box or finite, not both")
    if "box" in ctrl:
        box = ctrl["box"]
        _require_keys(box, _BOX_KEYS, "controls.box")
        cset = ControlSet.box(_need(box, "lower", "controls.box"),
                              _need(box, "upper", "controls.box"))
    elif "finite" in ctrl:
        fin = ctrl["finite"]
        _require_keys(fin, _FINITE_KEYS, "controls.finite")
        cset = ControlSet.finite(_need(fin, "points", "controls.finite"))
    else:
        raise ScenarioError("controls: box or finite section required")

    try:
        g = Perturbation.affine(
            A=pert.get("A"), B=pert.get("B"), D=pert.get("D"),
            n=n, d=cset.dim, beta=pert.get("beta"), **e_kwargs)
    except Exception as exc:
        raise ScenarioError(f"perturbation: {exc}") from exc

    dly = _need(data, "delay", "scenario")
    _require_keys(dly, _DELAY_KEYS, "delay")
    try:
        if "constant" in dly:
            delay = DelaySpec.constant(float(dly["constant"]))
        else:
            delay = DelaySpec.track(_need(dly, "times", "delay"),
                                    _need(dly, "values", "delay"))
    except Exception as exc:
        raise ScenarioError(f"delay: {exc}") from exc

    hist_raw = _need(data, "history", "scenario")
    _require_keys(hist_raw, _HISTORY_KEYS, "history")
    try:
        if "constant" in hist_raw:
            lo = t0 - delay.max_delay
            history = History.constant(hist_raw["constant"], (min(lo, t0), t0))
        else:
            history = History(_need(hist_raw, "times", "history"),
                              _need(hist_raw, "values", "history"))
    except Exception as exc:
        raise ScenarioError(f"history: {exc}") from exc

    sig_raw = ctrl.get("signal")
    if sig_raw is None:
        u_sig = ControlSignal.constant(np.zeros(cset.dim), t_start=t0)
    else:
        _require_keys(sig_raw, _SIGNAL_KEYS, "controls.signal")
        if "constant" in sig_raw:
            u_sig = ControlSignal.constant(sig_raw["constant"], t_start=t0)
        else:
            u_sig = ControlSignal(_need(sig_raw, "times", "controls.signal"),
                                  _need(sig_raw, "values", "controls.signal"),
                                  control_set=cset)

    cost = None
    epsilon = None
    if "cost" in data:
        craw = data["cost"]
        _require_keys(craw, _COST_KEYS, "cost")
        form = _need(craw, "form", "cost")
        try:
            cost = MayerCost(form, target=craw.get("target"), q=craw.get("q"))
        except Exception as exc:
            raise ScenarioError(f"cost: {exc}") from exc
        if "epsilon" in craw:
            epsilon = float(craw["epsilon"])
            if epsilon <= 0:
                raise ScenarioError("cost.epsilon must be positive")

    study = data.get("study", {})
    _require_keys(study, _STUDY_KEYS, "study") if study else None

    try:
        problem = SweepingProblem(moving, g, delay, history, cset, (t0, T))
    except Exception as exc:
        raise ScenarioError(f"scenario {name!r}: {exc}") from exc

    return Scenario(name=name, problem=problem, control_signal=u_sig,
                    cost=cost, epsilon=epsilon, study=dict(study), raw=data)


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ScenarioError(f"invalid YAML in {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    return parse_scenario(data)


def dump_scenario(scenario: Scenario, path) -> None:
    """Write the scenario back out; load(dump(s)) parses identically."""
    tmp = f"{path}.tmp.{os.getpid()}"
    with open(tmp, "w", encoding="utf-8") as fh:
        yaml.safe_dump(scenario.raw, fh, sort_keys=False,
                       default_flow_style=None)
    os.replace(tmp, path)
