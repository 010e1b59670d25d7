"""Joint dispatch: subset extraction from state streams and merging of partial commands."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

HOLD = float("nan")  # command sentinel: keep the joint where it is


class DispatchError(Exception):
    pass


def _ro(values) -> np.ndarray:
    a = np.array(values, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class JointStateSample:
    timestamp: float
    joints: tuple[str, ...]
    position: np.ndarray
    velocity: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "position", _ro(self.position))
        object.__setattr__(self, "velocity", _ro(self.velocity))
        if self.position.shape != (len(self.joints),) or self.velocity.shape != (len(self.joints),):
            raise ValueError("position and velocity must have one entry per joint")


@dataclass(frozen=True)
class JointCommandSample:
    joints: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        object.__setattr__(self, "values", _ro(self.values))

    def held(self) -> tuple[str, ...]:
        return tuple(j for j, v in zip(self.joints, self.values) if np.isnan(v))


def dispatch_extract(full: JointStateSample, subset: Sequence[str]) -> JointStateSample:
    index = {j: i for i, j in enumerate(full.joints)}
    missing = [j for j in subset if j not in index]
    if missing:
        raise DispatchError(f"unknown joint '{missing[0]}'")
    idx = [index[j] for j in subset]
    return JointStateSample(full.timestamp, tuple(subset), full.position[idx], full.velocity[idx])


def dispatch_merge(
    partials: Sequence[tuple[Sequence[str], Sequence[float]]],
    joints: Sequence[str] | None = None,
) -> JointCommandSample:
    """Union of partial commands over ``joints`` (default: joints in order of appearance).

    Uncovered joints carry :data:`HOLD`. Two partials giving the same joint
    different values is a conflict; a partial holding a joint does not count.
    """
    values: dict[str, float] = {}
    order: list[str] = []
    for names, vals in partials:
        if len(names) != len(vals):
            raise DispatchError("partial command has mismatched joint and value counts")
        for j, v in zip(names, vals):
            v = float(v)
            if j not in values:
                order.append(j)
                values[j] = v
            elif np.isnan(values[j]):
                values[j] = v
            elif not np.isnan(v) and v != values[j]:
                raise DispatchError(f"conflicting commands for joint '{j}': {values[j]!r} and {v!r}")
    if joints is None:
        joints = order
    else:
        extra = [j for j in order if j not in set(joints)]
        if extra:
            raise DispatchError(f"unknown joint '{extra[0]}'")
    return JointCommandSample(tuple(joints), [values.get(j, HOLD) for j in joints])
