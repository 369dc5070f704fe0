"""Spray-valve control laws: one-sided sliding mode with fault compensation,
and the conventional PID baseline.

Sign convention: ``s = x1 - x1_ref > 0`` means over-temperature, and a
positive input opens the spray valve (cooling). Neither law can heat.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Mapping

from .errors import ConfigError
from .profiles import Constant, Profile, Step, Table, profile_from_dict, profile_to_dict

logger = logging.getLogger(__name__)

PHI_HAT_CEILING = 0.95


@dataclass(frozen=True)
class SmcConfig:
    k: float = 1.0
    delta: float = 1.0
    epsilon: float = 0.01
    u_max: float = 1.0

    def __post_init__(self):
        for name in ("k", "delta", "epsilon", "u_max"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"smc {name} must be positive, got {v}")


@dataclass(frozen=True)
class PidConfig:
    kp: float = 1.5
    ki: float = 96.0
    kd: float = 0.0
    u_max: float = 1.0
    clamp_low: float = -math.inf
    clamp_high: float = math.inf

    def __post_init__(self):
        if not self.clamp_low <= 0.0 <= self.clamp_high:
            raise ConfigError("PID integral clamp must satisfy low <= 0 <= high")
        if not self.u_max > 0:
            raise ConfigError("PID u_max must be positive")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float | None = None


class Reference:
    """Outlet temperature setpoint trajectory (constant, step or table)."""

    KINDS = ("constant", "step", "table")

    def __init__(self, profile: Profile):
        if not isinstance(profile, (Constant, Step, Table)):
            raise ConfigError(f"reference kind must be one of {self.KINDS}")
        self.profile = profile
        self._logged: set[float] = set()

    @classmethod
    def constant(cls, value: float) -> "Reference":
        return cls(Constant(value))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any] | float) -> "Reference":
        try:
            return cls(profile_from_dict(data, cls.KINDS))
        except ValueError as exc:
            raise ConfigError(f"reference: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        return profile_to_dict(self.profile)

    @property
    def events(self) -> list[float]:
        return self.profile.events

    def bound(self) -> float:
        lo, hi = self.profile.values_range()
        return max(abs(lo), abs(hi))

    def rate_bound(self) -> float:
        if isinstance(self.profile, Table):
            return max((abs(s) for s in self.profile._slopes), default=0.0)
        return 0.0


def reference_eval(ref: Reference, t: float) -> tuple[float, float]:
    """Setpoint value and its analytic time derivative at t."""
    prof = ref.profile
    if isinstance(prof, Step) and t >= prof.t0 and prof.t0 not in ref._logged:
        ref._logged.add(prof.t0)
        logger.info("reference discontinuity at t=%g (%g -> %g)", prof.t0, prof.before, prof.after)
    return prof.value(t), prof.derivative(t)


def smc_compute(x1: float, t: float, ref: Reference, phi_hat: float, cfg: SmcConfig) -> float:
    """One-sided sliding-mode input, compensated for the estimated fault."""
    s = x1 - reference_eval(ref, t)[0]
    if not s > 0.0:
        return 0.0
    v = cfg.k * min(1.0, s / cfg.delta)
    ph = min(PHI_HAT_CEILING, max(0.0, phi_hat))
    return min(v / (1.0 - ph + cfg.epsilon), cfg.u_max)


def pid_compute(x1: float, t: float, ref: Reference, state: PidState, cfg: PidConfig,
                dt: float) -> tuple[float, PidState]:
    """PID with output clamp to [0, u_max] and conditional integration.

    Integration is frozen while the output computed from the current
    integral is saturated and the error pushes further into that limit.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    e = x1 - reference_eval(ref, t)[0]
    de = 0.0 if state.prev_error is None else (e - state.prev_error) / dt
    raw = cfg.kp * e + cfg.ki * state.integral + cfg.kd * de
    if (raw >= cfg.u_max and e > 0) or (raw <= 0.0 and e < 0):
        integral = state.integral
    else:
        integral = min(cfg.clamp_high, max(cfg.clamp_low, state.integral + e * dt))
        raw = cfg.kp * e + cfg.ki * integral + cfg.kd * de
    u = min(cfg.u_max, max(0.0, raw))
    return u, PidState(integral, e)
