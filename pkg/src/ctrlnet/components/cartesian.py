from __future__ import annotations

from typing import Mapping, Sequence

import numpy as np

from ..kinematics import KinematicTree, Transform, jacobian, pose_error
from .wbc import pinv


def cartesian_controller_step(current: Transform, setpoint: Transform, gain: float) -> np.ndarray:
    """Proportional twist (linear; angular) driving ``current`` toward ``setpoint``, in the root frame."""
    if not gain > 0:
        raise ValueError(f"gain must be positive, got {gain}")
    return gain * pose_error(setpoint, current)


def chain_jacobian(
    tree: KinematicTree, q: Mapping[str, float], root: str, tip: str, joints: Sequence[str]
) -> np.ndarray:
    """6 x len(joints) Jacobian; joints off the root->tip chain get zero columns."""
    chain = tree.chain(root, tip)
    J = jacobian(tree, q, root, tip)
    out = np.zeros((6, len(joints)))
    col = {j: i for i, j in enumerate(chain)}
    for k, j in enumerate(joints):
        if j in col:
            out[:, k] = J[:, col[j]]
    return out


def resolved_rate(
    tree: KinematicTree, q: Mapping[str, float], root: str, tip: str, joints: Sequence[str], twist
) -> np.ndarray:
    """Minimum-norm joint velocities realising ``twist`` as closely as possible."""
    return pinv(chain_jacobian(tree, q, root, tip, joints)) @ np.asarray(twist, dtype=float)
