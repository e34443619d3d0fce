"""Scenario files: one JSON document describes a complete run.

Schema (field names are the contract; the syntax is plain JSON):

    {
      "name": "...", "description": "...",
      "plant": {
        "A": [[...]], "B": [[...]], "C": [[...]],        # row-major
        "map": {"kind": "quadratic", "y_star": 2.0, "z_star": [0, 0],
                "coupling": 0.5}                         # or "H": [[...]]
      },
      "controller": {
        "p": 1.0, "p0": 0.0, "y_sat": 2.5, "lambda": 4.0,
        "epsilon_sw": 0.02, "gamma": 0.1, "L_h": 0.1, "eta": 0.01,
        "T_s": 5.0, "n_dirs": 2, "scaling_mode": "scaled", "ts_scale": 1.0
      },
      "sim": {
        "dt": 0.001, "horizon": 1500.0, "x0": [-2, 4],
        "v0": [0.5, 1.0],            # or "quasi_steady", or omitted (zeros)
        "log_stride": 100,
        "plant_eta": null            # null: controller eta (scaled) / 1
      },
      "analysis": {"delta": null, "trailing_fraction": 0.1, "c_bound": 2.5}
    }

"y_sat": null means unbounded.  A quadratic map takes either an explicit
"H" or, for the two-input benchmark family, "coupling" (the bowl
h = y* - (z1^2 + z2^2 - 2*c*z1*z2)).  Custom maps are constructible via
the API only; scenario files describe quadratic objectives.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from typing import Any, Optional

import numpy as np

from .controller import ControllerParams
from .errors import ConfigurationError
from .plant import CascadePlant, LtiSubsystem, QuadraticMap
from .sim import SimConfig


class ScenarioError(ConfigurationError):
    """Parse or validation failure, carrying the offending field path."""


@dataclass
class AnalysisParams:
    delta: Optional[float] = None
    trailing_fraction: float = 0.1
    c_bound: float = 2.5

    def __post_init__(self) -> None:
        if self.delta is not None and not (self.delta > 0.0):
            raise ConfigurationError(f"delta must be > 0, got {self.delta}")
        if not (0.0 < self.trailing_fraction <= 1.0):
            raise ConfigurationError(
                f"trailing_fraction must be in (0, 1], got "
                f"{self.trailing_fraction}")
        if not (self.c_bound > 0.0):
            raise ConfigurationError(f"c_bound must be > 0, got {self.c_bound}")


@dataclass
class Scenario:
    """Validated, buildable description of one simulation setup."""

    name: str
    description: str
    A: list
    B: list
    C: list
    map_spec: dict
    controller: ControllerParams
    sim: SimConfig
    analysis: AnalysisParams
    allow_unstable: bool = False

    def build_plant(self) -> CascadePlant:
        lti = LtiSubsystem(self.A, self.B, self.C,
                           allow_unstable=self.allow_unstable)
        spec = dict(self.map_spec)
        kind = spec.pop("kind")
        if kind != "quadratic":
            raise ScenarioError(f"plant.map.kind: unsupported kind {kind!r}")
        if "coupling" in spec:
            objective = QuadraticMap.from_coupling(
                spec["coupling"], spec.get("y_star", 2.0),
                spec.get("z_star", (0.0, 0.0)))
        else:
            objective = QuadraticMap(spec["y_star"], spec["z_star"], spec["H"])
        return CascadePlant(lti, objective)

    def to_dict(self) -> dict:
        ctrl = {
            "p": self.controller.p, "p0": self.controller.p0,
            "y_sat": None if math.isinf(self.controller.y_sat)
                     else self.controller.y_sat,
            "lambda": self.controller.lam,
            "epsilon_sw": self.controller.epsilon_sw,
            "gamma": self.controller.gamma, "L_h": self.controller.L_h,
            "eta": self.controller.eta, "T_s": self.controller.T_s,
            "n_dirs": self.controller.n_dirs,
            "scaling_mode": self.controller.scaling_mode,
            "ts_scale": self.controller.ts_scale,
        }
        sim: dict[str, Any] = {
            "dt": self.sim.dt, "horizon": self.sim.horizon,
            "x0": list(self.sim.x0),
            "log_stride": self.sim.log_stride,
            "plant_eta": self.sim.plant_eta,
        }
        if self.sim.quasi_steady:
            sim["v0"] = "quasi_steady"
        elif self.sim.v0 is not None:
            sim["v0"] = list(self.sim.v0)
        return {
            "name": self.name, "description": self.description,
            "plant": {"A": self.A, "B": self.B, "C": self.C,
                      "map": dict(self.map_spec)},
            "controller": ctrl,
            "sim": sim,
            "analysis": {
                "delta": self.analysis.delta,
                "trailing_fraction": self.analysis.trailing_fraction,
                "c_bound": self.analysis.c_bound,
            },
        }


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ScenarioError(f"{path}.{key}: missing required field")
    return mapping[key]


def scenario_from_dict(data: dict, *, allow_unstable: bool = False) -> Scenario:
    """Build and fully validate a Scenario from a parsed document."""
    if not isinstance(data, dict):
        raise ScenarioError("top level: expected a JSON object")
    plant = _require(data, "plant", "scenario")
    ctrl = _require(data, "controller", "scenario")
    sim = _require(data, "sim", "scenario")
    analysis = data.get("analysis", {})

    A = _require(plant, "A", "plant")
    B = _require(plant, "B", "plant")
    C = plant.get("C")
    map_spec = _require(plant, "map", "plant")
    if "kind" not in map_spec:
        raise ScenarioError("plant.map.kind: missing required field")

    y_sat = ctrl.get("y_sat")
    try:
        params = ControllerParams(
            p=float(_require(ctrl, "p", "controller")),
            p0=float(_require(ctrl, "p0", "controller")),
            y_sat=math.inf if y_sat is None else float(y_sat),
            lam=float(_require(ctrl, "lambda", "controller")),
            epsilon_sw=float(_require(ctrl, "epsilon_sw", "controller")),
            gamma=float(_require(ctrl, "gamma", "controller")),
            L_h=float(_require(ctrl, "L_h", "controller")),
            eta=float(_require(ctrl, "eta", "controller")),
            T_s=float(_require(ctrl, "T_s", "controller")),
            n_dirs=int(_require(ctrl, "n_dirs", "controller")),
            scaling_mode=ctrl.get("scaling_mode", "scaled"),
            ts_scale=float(ctrl.get("ts_scale", 1.0)),
        )
    except ConfigurationError as exc:
        raise ScenarioError(f"controller: {exc}") from exc

    v0_raw = sim.get("v0")
    quasi_steady = isinstance(v0_raw, str) and v0_raw == "quasi_steady"
    if isinstance(v0_raw, str) and not quasi_steady:
        raise ScenarioError(
            f"sim.v0: expected an array or the string 'quasi_steady', "
            f"got {v0_raw!r}")
    try:
        sim_config = SimConfig(
            dt=float(_require(sim, "dt", "sim")),
            horizon=float(_require(sim, "horizon", "sim")),
            x0=np.asarray(_require(sim, "x0", "sim"), dtype=float),
            v0=None if (v0_raw is None or quasi_steady)
               else np.asarray(v0_raw, dtype=float),
            log_stride=int(sim.get("log_stride", 1)),
            plant_eta=(None if sim.get("plant_eta") is None
                       else float(sim["plant_eta"])),
            quasi_steady=quasi_steady,
        )
    except ConfigurationError as exc:
        raise ScenarioError(f"sim: {exc}") from exc

    try:
        analysis_params = AnalysisParams(
            delta=(None if analysis.get("delta") is None
                   else float(analysis["delta"])),
            trailing_fraction=float(analysis.get("trailing_fraction", 0.1)),
            c_bound=float(analysis.get("c_bound", 2.5)),
        )
    except ConfigurationError as exc:
        raise ScenarioError(f"analysis: {exc}") from exc

    scenario = Scenario(
        name=str(data.get("name", "unnamed")),
        description=str(data.get("description", "")),
        A=A, B=B, C=C if C is not None else np.eye(len(A)).tolist(),
        map_spec=dict(map_spec),
        controller=params,
        sim=sim_config,
        analysis=analysis_params,
        allow_unstable=allow_unstable,
    )
    # construct the plant once now so every invariant is re-checked on load
    try:
        plant = scenario.build_plant()
    except ConfigurationError as exc:
        raise ScenarioError(f"plant: {exc}") from exc
    if params.n_dirs != plant.lti.m:
        raise ScenarioError(
            f"controller.n_dirs: must equal the plant input dimension "
            f"({plant.lti.m}), got {params.n_dirs}")
    if sim_config.x0.shape != (plant.lti.n,):
        raise ScenarioError(
            f"sim.x0: must have dimension {plant.lti.n}, got "
            f"{sim_config.x0.shape}")
    if sim_config.v0 is not None and sim_config.v0.shape != (plant.lti.m,):
        raise ScenarioError(
            f"sim.v0: must have dimension {plant.lti.m}, got "
            f"{sim_config.v0.shape}")
    return scenario


def load_scenario(path, *, allow_unstable: bool = False) -> Scenario:
    """Parse and validate a scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: invalid JSON: {exc}") from exc
    return scenario_from_dict(data, allow_unstable=allow_unstable)


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario.to_dict(), fh, indent=2)
        fh.write("\n")


def apply_override(data: dict, dotted_key: str, raw_value: str) -> None:
    """Set a dot-path field in a raw scenario document, in place.

    The value is parsed as JSON when possible (numbers, lists, null,
    booleans) and kept as a string otherwise.
    """
    try:
        value = json.loads(raw_value)
    except json.JSONDecodeError:
        value = raw_value
    keys = dotted_key.split(".")
    node = data
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ScenarioError(f"override {dotted_key}: no such field")
        node = node[key]
    if not isinstance(node, dict):
        raise ScenarioError(f"override {dotted_key}: no such field")
    node[keys[-1]] = value


def get_field(data: dict, dotted_key: str):
    node = data
    for key in dotted_key.split("."):
        if not isinstance(node, dict) or key not in node:
            raise ScenarioError(f"{dotted_key}: no such field")
        node = node[key]
    return node


def builtin_scenario_names() -> list[str]:
    root = resources.files("slidingesc") / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_builtin(name: str, *, allow_unstable: bool = False) -> Scenario:
    """Load one of the scenarios shipped inside the package."""
    ref = resources.files("slidingesc") / "scenarios" / f"{name}.json"
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ScenarioError(
            f"no builtin scenario {name!r}; available: "
            f"{', '.join(builtin_scenario_names())}")
    return scenario_from_dict(json.loads(text), allow_unstable=allow_unstable)


def builtin_scenario_dict(name: str) -> dict:
    ref = resources.files("slidingesc") / "scenarios" / f"{name}.json"
    return json.loads(ref.read_text(encoding="utf-8"))
