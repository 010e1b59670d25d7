"""Sidecar component configuration keyed by (kind, config label).

The document maps section names to key/value tables::

    pid_controller:            # defaults for every pid_controller
      kp: 2.0
    trajectory.arm_with_hand:  # one config label; short kind aliases allowed
      max_vel: 0.5
    cartesian.gain: 2.0        # flat dotted keys are accepted as well

Lookups merge built-in defaults, the kind section and the label section, in
that order.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any, Mapping

import yaml

CONFIG_ENV = "CTRLNET_CONFIG"

ALIASES = {
    "pid": "pid_controller",
    "trajectory": "trajectory_generator",
    "cartesian": "cartesian_controller",
    "converter": "mode_converter",
    "device": "device_driver",
    "plan": "motion_plan",
}

DEFAULTS: dict[str, dict[str, Any]] = {
    "device_driver": {"tau": 0.05},
    "pid_controller": {"kp": 1.0, "ki": 0.0, "kd": 0.0, "output_limits": None},
    "cartesian_controller": {"gain": 1.0},
    "mode_converter": {"gain": 1.0},
    "trajectory_generator": {"max_vel": 1.0, "max_acc": 1.0},
}


class ConfigError(Exception):
    pass


def _canonical(section: str) -> tuple[str, str | None]:
    kind, _, label = section.partition(".")
    return ALIASES.get(kind, kind), (label or None)


class ComponentConfig:
    def __init__(self, data: Mapping[str, Any] | None = None, source: str | None = None):
        self.source = source
        self._sections: dict[tuple[str, str | None], dict[str, Any]] = {}
        for key, value in (data or {}).items():
            key = str(key)
            if isinstance(value, Mapping):
                self._sections.setdefault(_canonical(key), {}).update(value)
            else:
                section, dot, field = key.rpartition(".")
                if not dot:
                    raise ConfigError(f"top-level key '{key}' needs a section (e.g. 'pid.{key}')")
                self._sections.setdefault(_canonical(section), {})[field] = value

    def get(self, kind: str, label: str | None = None) -> dict[str, Any]:
        merged = dict(DEFAULTS.get(kind, {}))
        merged.update(self._sections.get((kind, None), {}))
        if label is not None:
            merged.update(self._sections.get((kind, label), {}))
        return merged

    def has(self, kind: str, label: str) -> bool:
        return (kind, label) in self._sections


def load_config(path: str | os.PathLike | None) -> ComponentConfig:
    if path is None:
        return ComponentConfig()
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: expected a mapping at top level")
    return ComponentConfig(data, str(path))


def config_for_document(doc_path: str | os.PathLike) -> ComponentConfig:
    """Config named by ``CTRLNET_CONFIG``, else ``<stem>.config.yaml`` beside the document, else defaults."""
    env = os.environ.get(CONFIG_ENV)
    if env:
        return load_config(env)
    p = Path(doc_path)
    side = p.with_name(p.stem + ".config.yaml")
    return load_config(side) if side.exists() else ComponentConfig()
