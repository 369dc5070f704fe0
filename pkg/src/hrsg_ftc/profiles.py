"""Scalar time profiles shared by disturbances, faults and references.

Each profile exposes ``value(t)``, an analytic ``derivative(t)`` and the
list of ``events`` (times where the signal jumps or stops changing).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence, Union


@dataclass(frozen=True)
class Constant:
    value_: float

    def value(self, t: float) -> float:
        return self.value_

    def derivative(self, t: float) -> float:
        return 0.0

    @property
    def events(self) -> list[float]:
        return []

    def values_range(self) -> tuple[float, float]:
        return self.value_, self.value_


@dataclass(frozen=True)
class Step:
    """Right-continuous step: ``before`` for t < t0, ``after`` from t0 on."""

    t0: float
    before: float
    after: float

    def value(self, t: float) -> float:
        return self.after if t >= self.t0 else self.before

    def derivative(self, t: float) -> float:
        return 0.0

    @property
    def events(self) -> list[float]:
        return [self.t0]

    def values_range(self) -> tuple[float, float]:
        return min(self.before, self.after), max(self.before, self.after)


@dataclass(frozen=True)
class Ramp:
    """Linear transition from ``start`` at t0 to ``end`` at t1, held outside."""

    t0: float
    t1: float
    start: float
    end: float

    def __post_init__(self):
        if not self.t1 > self.t0:
            raise ValueError("ramp needs t1 > t0")

    def value(self, t: float) -> float:
        if t <= self.t0:
            return self.start
        if t >= self.t1:
            return self.end
        return self.start + (self.end - self.start) * (t - self.t0) / (self.t1 - self.t0)

    def derivative(self, t: float) -> float:
        if self.t0 <= t < self.t1:
            return (self.end - self.start) / (self.t1 - self.t0)
        return 0.0

    @property
    def events(self) -> list[float]:
        return [self.t1]

    def values_range(self) -> tuple[float, float]:
        return min(self.start, self.end), max(self.start, self.end)


@dataclass(frozen=True)
class Sine:
    mean: float
    amplitude: float
    period: float

    def __post_init__(self):
        if not self.period > 0:
            raise ValueError("sine period must be positive")

    def value(self, t: float) -> float:
        return self.mean + self.amplitude * math.sin(2.0 * math.pi * t / self.period)

    def derivative(self, t: float) -> float:
        w = 2.0 * math.pi / self.period
        return self.amplitude * w * math.cos(w * t)

    @property
    def events(self) -> list[float]:
        return []

    def values_range(self) -> tuple[float, float]:
        a = abs(self.amplitude)
        return self.mean - a, self.mean + a


@dataclass(frozen=True)
class Table:
    """Piecewise-linear interpolation through ``(times, values)``.

    Held constant before the first and after the last breakpoint. The
    derivative is the slope of the segment containing t (right-continuous).
    """

    times: tuple[float, ...]
    values: tuple[float, ...]
    _slopes: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        values = tuple(float(v) for v in self.values)
        if len(times) != len(values) or not times:
            raise ValueError("table needs equal-length, non-empty times and values")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("table breakpoints must be strictly increasing in time")
        slopes = tuple((v1 - v0) / (t1 - t0)
                       for t0, t1, v0, v1 in zip(times, times[1:], values, values[1:]))
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_slopes", slopes)

    def value(self, t: float) -> float:
        ts, vs = self.times, self.values
        if t <= ts[0]:
            return vs[0]
        if t >= ts[-1]:
            return vs[-1]
        i = bisect.bisect_right(ts, t) - 1
        if t == ts[i]:
            return vs[i]
        return vs[i] + self._slopes[i] * (t - ts[i])

    def derivative(self, t: float) -> float:
        ts = self.times
        if t < ts[0] or t >= ts[-1]:
            return 0.0
        return self._slopes[bisect.bisect_right(ts, t) - 1]

    @property
    def events(self) -> list[float]:
        return []

    def values_range(self) -> tuple[float, float]:
        return min(self.values), max(self.values)


Profile = Union[Constant, Step, Ramp, Sine, Table]

_KINDS = {"constant", "step", "ramp", "sine", "table"}


def profile_from_dict(spec: Mapping[str, Any] | float | int,
                      allowed: Sequence[str] | None = None) -> Profile:
    """Build a profile from its JSON form.

    A bare number is shorthand for ``{"kind": "constant", "value": x}``.
    """
    if isinstance(spec, (int, float)):
        spec = {"kind": "constant", "value": spec}
    kind = spec.get("kind")
    if kind not in _KINDS or (allowed is not None and kind not in allowed):
        ok = sorted(allowed) if allowed is not None else sorted(_KINDS)
        raise ValueError(f"unknown profile kind {kind!r}; expected one of {ok}")
    try:
        if kind == "constant":
            return Constant(float(spec["value"]))
        if kind == "step":
            return Step(float(spec["t0"]), float(spec["before"]), float(spec["after"]))
        if kind == "ramp":
            return Ramp(float(spec["t0"]), float(spec["t1"]),
                        float(spec["start"]), float(spec["end"]))
        if kind == "sine":
            return Sine(float(spec["mean"]), float(spec["amplitude"]), float(spec["period"]))
        if "breakpoints" in spec:
            pts = spec["breakpoints"]
            return Table(tuple(p[0] for p in pts), tuple(p[1] for p in pts))
        return Table(tuple(spec["times"]), tuple(spec["values"]))
    except KeyError as exc:
        raise ValueError(f"{kind} profile is missing field {exc.args[0]!r}") from None


def profile_to_dict(p: Profile) -> dict[str, Any]:
    if isinstance(p, Constant):
        return {"kind": "constant", "value": p.value_}
    if isinstance(p, Step):
        return {"kind": "step", "t0": p.t0, "before": p.before, "after": p.after}
    if isinstance(p, Ramp):
        return {"kind": "ramp", "t0": p.t0, "t1": p.t1, "start": p.start, "end": p.end}
    if isinstance(p, Sine):
        return {"kind": "sine", "mean": p.mean, "amplitude": p.amplitude, "period": p.period}
    return {"kind": "table", "times": list(p.times), "values": list(p.values)}
