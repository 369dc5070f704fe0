"""Actuator fault profiles and ground-truth extraction from valve logs."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Any, Mapping, NamedTuple

from .errors import ConfigError
from .profiles import Constant, Profile, Ramp, Step, Table, profile_from_dict, profile_to_dict

logger = logging.getLogger(__name__)

FAULT_KINDS = ("constant", "step", "ramp", "table")

DEFAULT_CMD_FLOOR = 0.05
DEFAULT_OVERDELIVERY_SLACK = 0.02


@dataclass(frozen=True)
class FaultProfile:
    """Time-varying loss of effectiveness phi(t) in [0, 1]."""

    profile: Profile

    def __post_init__(self):
        if not isinstance(self.profile, (Constant, Step, Ramp, Table)):
            raise ConfigError(f"fault profile kind must be one of {FAULT_KINDS}")
        lo, hi = self.profile.values_range()
        if lo < 0.0 or hi > 1.0:
            raise ConfigError(f"fault levels must lie in [0, 1], got range [{lo}, {hi}]")

    def __call__(self, t: float) -> float:
        return evaluate_fault(self, t)

    @property
    def events(self) -> list[float]:
        return self.profile.events

    @classmethod
    def constant(cls, level: float) -> "FaultProfile":
        return cls(Constant(level))

    @classmethod
    def step(cls, t0: float, before: float, after: float) -> "FaultProfile":
        return cls(Step(t0, before, after))

    @classmethod
    def ramp(cls, t0: float, t1: float, start: float, end: float) -> "FaultProfile":
        return cls(Ramp(t0, t1, start, end))

    @classmethod
    def table(cls, times, values) -> "FaultProfile":
        return cls(Table(tuple(times), tuple(values)))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "FaultProfile":
        try:
            return cls(profile_from_dict(data, FAULT_KINDS))
        except ValueError as exc:
            raise ConfigError(f"fault: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        return profile_to_dict(self.profile)


def evaluate_fault(profile: FaultProfile, t: float) -> float:
    phi = profile.profile.value(t)
    # levels are validated at construction; clip guards interpolation round-off
    return min(1.0, max(0.0, phi))


@dataclass(frozen=True)
class ValveLogRecord:
    """One maintenance-log sample: commanded and measured valve fraction."""

    t: float
    u_cmd: float
    u_actual: float
    out_of_range: bool = False

    @classmethod
    def from_raw(cls, t: float, u_cmd: float, u_actual: float) -> "ValveLogRecord":
        """Clamp raw fractions into [0, 1], remembering whether that was needed."""
        cmd = min(1.0, max(0.0, u_cmd))
        act = min(1.0, max(0.0, u_actual))
        return cls(float(t), cmd, act, out_of_range=(cmd != u_cmd or act != u_actual))


class LogFault(NamedTuple):
    """Result of ``true_fault_from_log``.

    ``phi`` is None when the record is skipped; ``anomaly`` names the
    condition that was flagged, if any.
    """

    phi: float | None
    anomaly: str | None = None

    @property
    def skipped(self) -> bool:
        return self.phi is None


def true_fault_from_log(rec: ValveLogRecord, cmd_floor: float = DEFAULT_CMD_FLOOR,
                        slack: float = DEFAULT_OVERDELIVERY_SLACK) -> LogFault:
    """Ground-truth fault level ``1 - u_actual / u_cmd``.

    Commands below ``cmd_floor`` are skipped since the ratio is undefined near
    zero. A valve delivering more than ``u_cmd + slack`` is flagged as an
    overdelivery anomaly (phi clamps to 0 for usable commands).
    """
    if not cmd_floor > 0:
        raise ConfigError(f"cmd_floor must be positive, got {cmd_floor}")
    over = rec.u_actual > rec.u_cmd + slack
    if rec.u_cmd < cmd_floor:
        anomaly = "overdelivery" if over else "below_cmd_floor"
        if over:
            logger.debug("t=%g: valve open at %.3f while commanded %.3f (below floor)",
                         rec.t, rec.u_actual, rec.u_cmd)
        return LogFault(None, anomaly)
    phi = min(1.0, max(0.0, 1.0 - rec.u_actual / rec.u_cmd))
    if over:
        logger.debug("t=%g: overdelivery, actual %.3f > command %.3f",
                     rec.t, rec.u_actual, rec.u_cmd)
        return LogFault(0.0, "overdelivery")
    return LogFault(phi)
