"""Prioritized whole-body control by nested weighted null-space projection.

The joint weights enter through the substitution q_dot = W_q^(1/2) z: each
level is solved for z in the null space left by the higher levels, so the
projector and the weighting act on the same variable. Zero weight on a joint
pins its command to exactly zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import groupby
from typing import Sequence

import numpy as np

SV_CUTOFF = 1e-8


@dataclass(frozen=True)
class WbcTask:
    priority: int
    jacobian: np.ndarray
    desired: np.ndarray
    weights: np.ndarray | None = None

    def __post_init__(self):
        J = np.atleast_2d(np.asarray(self.jacobian, dtype=float))
        xd = np.asarray(self.desired, dtype=float).reshape(-1)
        w = np.ones(J.shape[0]) if self.weights is None else np.asarray(self.weights, dtype=float).reshape(-1)
        if self.priority < 1:
            raise ValueError("priority must be a positive integer")
        if xd.shape[0] != J.shape[0] or w.shape[0] != J.shape[0]:
            raise ValueError(f"task of dimension {J.shape[0]} has {xd.shape[0]} desired values and {w.shape[0]} weights")
        if np.any(w < 0):
            raise ValueError("task weights must be non-negative")
        object.__setattr__(self, "jacobian", J)
        object.__setattr__(self, "desired", xd)
        object.__setattr__(self, "weights", w)


def pinv(a: np.ndarray, cutoff: float = SV_CUTOFF) -> np.ndarray:
    """SVD pseudoinverse; singular values below ``cutoff * sigma_max`` count as zero."""
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros(a.T.shape)
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros(a.T.shape)
    keep = s > cutoff * s[0]
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return (vt.T * inv) @ u.T


def wbc_solve(tasks: Sequence[WbcTask], joint_weights) -> np.ndarray:
    w_q = np.asarray(joint_weights, dtype=float).reshape(-1)
    n = w_q.shape[0]
    if np.any(w_q < 0):
        raise ValueError("joint weights must be non-negative")
    for t in tasks:
        if t.jacobian.shape[1] != n:
            raise ValueError(f"task jacobian has {t.jacobian.shape[1]} columns, expected {n}")
    sqrt_wq = np.diag(np.sqrt(w_q))
    qd = np.zeros(n)
    proj = np.eye(n)
    for _, level in groupby(sorted(tasks, key=lambda t: t.priority), key=lambda t: t.priority):
        level = list(level)
        J = np.vstack([t.jacobian for t in level])
        xd = np.concatenate([t.desired for t in level])
        W = np.diag(np.concatenate([t.weights for t in level]))
        Jt = W @ J @ sqrt_wq @ proj
        Jt_pinv = pinv(Jt)
        qd = qd + sqrt_wq @ Jt_pinv @ W @ (xd - J @ qd)
        proj = proj @ (np.eye(n) - Jt_pinv @ Jt)
    return qd


def selection_jacobian(task_joints: Sequence[str], block_joints: Sequence[str]) -> np.ndarray:
    """Joint-space task Jacobian: picks ``task_joints`` out of the block's joint vector."""
    col = {j: i for i, j in enumerate(block_joints)}
    S = np.zeros((len(task_joints), len(block_joints)))
    for r, j in enumerate(task_joints):
        S[r, col[j]] = 1.0
    return S


def expand_cartesian_weights(weights) -> np.ndarray:
    """Six task weights from 6 values, or from 4 (x, y, z and one shared orientation weight)."""
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] == 6:
        return w
    if w.shape[0] == 4:
        return np.concatenate([w[:3], np.repeat(w[3], 3)])
    raise ValueError(f"cartesian task weights need 4 or 6 entries, got {w.shape[0]}")
