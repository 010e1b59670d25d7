"""Motion plans: parametric set-point sources x_hat = f(theta, t) or f(theta, x)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from ..kinematics import Transform, interpolate_pose


class MotionPlan(Protocol):
    def evaluate(self, t: float, x): ...


def _lerp(a, b, s: float):
    if isinstance(a, Transform):
        return interpolate_pose(a, b, s)
    return np.asarray(a, dtype=float) + s * (np.asarray(b, dtype=float) - np.asarray(a, dtype=float))


@dataclass(frozen=True)
class WaypointSchedule:
    """Linear interpolation between timed waypoints; clamps before the first and holds after the last."""

    times: tuple[float, ...]
    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "times", tuple(float(t) for t in self.times))
        object.__setattr__(self, "values", tuple(self.values))
        if not self.times or len(self.times) != len(self.values):
            raise ValueError("waypoint schedule needs one value per time and at least one waypoint")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("waypoint times must be strictly increasing")

    def evaluate(self, t: float, x=None):
        ts = self.times
        if t <= ts[0]:
            return self.values[0]
        if t >= ts[-1]:
            return self.values[-1]
        k = int(np.searchsorted(ts, t, side="right")) - 1
        if t == ts[k]:
            return self.values[k]
        return _lerp(self.values[k], self.values[k + 1], (t - ts[k]) / (ts[k + 1] - ts[k]))


@dataclass(frozen=True)
class PointAttractor:
    """Moves a fraction ``gain * dt_nominal`` (at most all) of the way from ``x`` to the goal."""

    goal: object
    gain: float
    dt_nominal: float = 1.0

    def __post_init__(self):
        if not self.gain > 0 or not self.dt_nominal > 0:
            raise ValueError("attractor gain and dt_nominal must be positive")

    @property
    def fraction(self) -> float:
        return min(self.gain * self.dt_nominal, 1.0)

    def evaluate(self, t: float, x):
        if x is None:
            return self.goal
        return _lerp(x, self.goal, self.fraction)


@dataclass(frozen=True)
class ConstantSetpoint:
    value: object

    def evaluate(self, t: float, x=None):
        return self.value


@dataclass(frozen=True)
class Hold:
    """Keep whatever the consumer currently sees; starts from the first observed state."""

    def evaluate(self, t: float, x):
        return x


def waypoints(times: Sequence[float], values: Sequence) -> WaypointSchedule:
    return WaypointSchedule(tuple(times), tuple(values))


class PlanError(ValueError):
    pass


def parse_value(raw, port_type):
    """Vector for joint ports; for Cartesian ports xyz+rpy (6) or xyz+quaternion wxyz (7)."""
    try:
        v = np.asarray(raw, dtype=float).reshape(-1)
    except (TypeError, ValueError):
        raise PlanError(f"expected a list of numbers, got {raw!r}") from None
    if port_type.is_joint:
        if v.shape[0] != len(port_type.joints):
            raise PlanError(f"{port_type} needs {len(port_type.joints)} values, got {v.shape[0]}")
        return v
    if port_type.mode == "velocity":
        if v.shape[0] != 6:
            raise PlanError(f"{port_type} needs 6 values, got {v.shape[0]}")
        return v
    if v.shape[0] == 6:
        return Transform.from_xyz_rpy(v[:3], v[3:])
    if v.shape[0] == 7:
        if not np.all(np.isfinite(v)) or not np.linalg.norm(v[3:]) > 0:
            raise PlanError("quaternion must be finite and non-zero")
        return Transform(v[3:], v[:3])
    raise PlanError(f"{port_type} needs xyz+rpy (6) or xyz+quaternion (7) values, got {v.shape[0]}")


def plan_from_mapping(spec, port_type) -> MotionPlan:
    """Build a plan from a scenario or config entry; a bare list means a constant set point."""
    if not isinstance(spec, dict):
        return ConstantSetpoint(parse_value(spec, port_type))
    kind = spec.get("plan", "constant")
    try:
        if kind == "point_attractor":
            return PointAttractor(
                parse_value(spec["goal"], port_type), float(spec.get("gain", 1.0)), float(spec.get("dt_nominal", 1.0))
            )
        if kind == "waypoints":
            times = [float(t) for t in spec["times"]]
            values = [parse_value(v, port_type) for v in spec["values"]]
            return WaypointSchedule(tuple(times), tuple(values))
        if kind == "constant":
            return ConstantSetpoint(parse_value(spec["value"], port_type))
        if kind == "hold":
            return Hold()
    except KeyError as exc:
        raise PlanError(f"plan '{kind}' is missing '{exc.args[0]}'") from None
    raise PlanError(f"unknown plan '{kind}'")
