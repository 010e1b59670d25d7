"""Simulation scenarios: timing, initial plant state and set-point bindings.

Example::

    dt: 0.01
    duration: 10
    initial: {al: 0.1}
    setpoints:
      l2.finger: [0.3]                        # constant
      l2.other_arm: {plan: point_attractor, goal: [0.6, 0.3, 0.5, 0, 0, 0], gain: 0.5}
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import yaml

from .compiler.network import ComponentNetwork
from .components.motion_plan import MotionPlan, PlanError, plan_from_mapping


class ScenarioError(Exception):
    pass


@dataclass
class Scenario:
    dt: float = 0.01
    duration: float = 1.0
    initial: dict[str, float] = field(default_factory=dict)
    setpoints: dict[str, object] = field(default_factory=dict)

    def plans(self, net: ComponentNetwork) -> dict[str, MotionPlan]:
        exports = net.setpoint_exports()
        out = {}
        for name in sorted(self.setpoints):
            if name not in exports:
                raise ScenarioError(f"scenario binds '{name}', which is not an exported set point")
            try:
                out[name] = plan_from_mapping(self.setpoints[name], net.port_type(exports[name]))
            except PlanError as exc:
                raise ScenarioError(f"set point '{name}': {exc}") from None
        return out


def parse_scenario(data: Mapping | None) -> Scenario:
    data = dict(data or {})
    unknown = sorted(set(data) - {"dt", "duration", "initial", "setpoints"})
    if unknown:
        raise ScenarioError(f"unknown scenario key '{unknown[0]}'")
    try:
        sc = Scenario(
            float(data.get("dt", 0.01)),
            float(data.get("duration", 1.0)),
            {str(k): float(v) for k, v in (data.get("initial") or {}).items()},
            {str(k): v for k, v in (data.get("setpoints") or {}).items()},
        )
    except (TypeError, ValueError, AttributeError) as exc:
        raise ScenarioError(f"malformed scenario: {exc}") from None
    return sc


def load_scenario(path: str | os.PathLike) -> Scenario:
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    if data is not None and not isinstance(data, Mapping):
        raise ScenarioError(f"{path}: expected a mapping at top level")
    return parse_scenario(data)
