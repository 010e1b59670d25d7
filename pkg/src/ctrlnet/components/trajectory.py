"""Time-optimal trapezoidal profiles, replanned from the current state every step."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SNAP = 1e-12  # closer than this to rest at the target counts as arrived


@dataclass(frozen=True)
class TrajectoryConfig:
    max_vel: np.ndarray | float = 1.0
    max_acc: np.ndarray | float = 1.0

    def __post_init__(self):
        for name in ("max_vel", "max_acc"):
            v = np.asarray(getattr(self, name), dtype=float)
            if np.any(v <= 0):
                raise ValueError(f"{name} must be positive")
            object.__setattr__(self, name, v)


def profile_segments(p: float, v: float, target: float, vmax: float, amax: float) -> list[tuple[float, float]]:
    """(duration, acceleration) segments bringing (p, v) to rest at ``target``."""
    d = target - p
    stop = v * abs(v) / (2 * amax)
    gap = d - stop
    if gap == 0.0:
        return [] if v == 0.0 else [(abs(v) / amax, -math.copysign(amax, v))]
    s = math.copysign(1.0, gap)
    vv = s * v  # speed in the direction of travel, may be negative
    dist = s * d
    segs: list[tuple[float, float]] = []
    if vv > vmax:
        segs.append(((vv - vmax) / amax, -s * amax))
        dist -= (vv * vv - vmax * vmax) / (2 * amax)
        peak = vmax
    else:
        peak = min(vmax, math.sqrt(max((2 * amax * dist + vv * vv) / 2, 0.0)))
        segs.append(((peak - vv) / amax, s * amax))
        dist -= (peak * peak - vv * vv) / (2 * amax)
    dist -= peak * peak / (2 * amax)
    if peak > 0 and dist > 0:
        segs.append((dist / peak, 0.0))
    segs.append((peak / amax, -s * amax))
    return segs


def profile_duration(p: float, v: float, target: float, vmax: float, amax: float) -> float:
    return sum(t for t, _ in profile_segments(p, v, target, vmax, amax))


def _evaluate(p: float, v: float, target: float, segs, t: float) -> tuple[float, float]:
    for dur, acc in segs:
        if t <= dur:
            return p + v * t + 0.5 * acc * t * t, v + acc * t
        p, v = p + v * dur + 0.5 * acc * dur * dur, v + acc * dur
        t -= dur
    return target, 0.0


def trajectory_step(cfg: TrajectoryConfig, position, velocity, target, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Position and velocity set points one ``dt`` along the profile toward ``target``."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    p = np.asarray(position, dtype=float)
    v = np.asarray(velocity, dtype=float)
    x = np.asarray(target, dtype=float)
    vmax = np.broadcast_to(cfg.max_vel, p.shape)
    amax = np.broadcast_to(cfg.max_acc, p.shape)
    out_p = np.empty_like(p)
    out_v = np.empty_like(p)
    for i in range(p.shape[0]):
        if abs(x[i] - p[i]) <= SNAP * max(1.0, abs(x[i])) and abs(v[i]) <= SNAP:
            out_p[i], out_v[i] = x[i], 0.0
            continue
        segs = profile_segments(p[i], v[i], x[i], vmax[i], amax[i])
        pi, vi = _evaluate(p[i], v[i], x[i], segs, dt)
        if abs(x[i] - pi) <= SNAP * max(1.0, abs(x[i])) and abs(vi) <= SNAP:
            pi, vi = x[i], 0.0
        out_p[i], out_v[i] = pi, vi
    return out_p, out_v
