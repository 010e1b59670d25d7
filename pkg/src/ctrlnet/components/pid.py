from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PidConfig:
    """Per-joint gains (scalars broadcast) and optional (lower, upper) output limits."""

    kp: np.ndarray | float = 1.0
    ki: np.ndarray | float = 0.0
    kd: np.ndarray | float = 0.0
    output_limits: tuple[float, float] | None = None

    def __post_init__(self):
        for name in ("kp", "ki", "kd"):
            g = np.asarray(getattr(self, name), dtype=float)
            if np.any(g < 0):
                raise ValueError(f"{name} must be non-negative")
            object.__setattr__(self, name, g)
        if self.output_limits is not None:
            lo, hi = self.output_limits
            if not lo < hi:
                raise ValueError("output limits need lower < upper")
            object.__setattr__(self, "output_limits", (float(lo), float(hi)))


@dataclass(frozen=True)
class PidState:
    integral: np.ndarray | None = None
    prev_error: np.ndarray | None = None


def pid_step(cfg: PidConfig, state: PidState, setpoint, feedback, dt: float) -> tuple[np.ndarray, PidState]:
    """One controller update; returns (command, new state).

    The integral is clamped so its contribution stays within the output
    limits (anti-windup), and the output is clamped as well. With ki = kd = 0
    the state passes through untouched.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    e = np.asarray(setpoint, dtype=float) - np.asarray(feedback, dtype=float)
    kp = np.broadcast_to(cfg.kp, e.shape)
    ki = np.broadcast_to(cfg.ki, e.shape)
    kd = np.broadcast_to(cfg.kd, e.shape)
    u = kp * e
    integral, prev = state.integral, state.prev_error
    if np.any(ki != 0):
        integral = (np.zeros_like(e) if integral is None else integral) + e * dt
        if cfg.output_limits is not None:
            lo, hi = cfg.output_limits
            with np.errstate(divide="ignore", invalid="ignore"):
                bound_lo = np.where(ki > 0, lo / np.where(ki > 0, ki, 1), -np.inf)
                bound_hi = np.where(ki > 0, hi / np.where(ki > 0, ki, 1), np.inf)
            integral = np.clip(integral, bound_lo, bound_hi)
        u = u + ki * integral
    if np.any(kd != 0):
        if prev is not None:
            u = u + kd * (e - prev) / dt
        prev = e
    if cfg.output_limits is not None:
        u = np.clip(u, *cfg.output_limits)
    return u, PidState(integral, prev)
