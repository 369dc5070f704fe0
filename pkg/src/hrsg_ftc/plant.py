"""Superheater/desuperheater temperature dynamics.

States are the outlet steam temperature ``x1`` (measured) and the
attemperator steam temperature ``x2`` (unmeasured)::

    x1' = K2 (K1 d1 + d7 (x2 - x1) - d3)
    x2' = K3 [(d2 + ue)(d4 - x2) - ue (d4 - d5) + m_in d6]

with ``ue = u_scale * (1 - phi) * u`` the effective spray flow (kg/s).
Units are degC, kg/s and s throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Callable, Mapping, NamedTuple, Sequence, Union

from .errors import ConfigError, NumericBlowup
from .profiles import Profile, profile_from_dict, profile_to_dict

CHANNELS = ("d1", "d2", "d3", "d4", "d5", "d6", "d7")


@dataclass(frozen=True)
class PlantParams:
    """Physical constituents of the model gains.

    ``K1``, ``K2`` and ``K3`` are derived on access so they can never drift
    from their constituents. ``u_scale`` converts the controller's valve
    fraction into spray mass flow (kg/s per unit opening).
    """

    H: float = 2.0
    Cp: float = 1.0
    rho_s: float = 20.0
    V_s: float = 1.0
    m_bar_out_dsh: float = 10.0
    m_bar_in: float = 10.0
    u_scale: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"plant parameter {f.name} must be positive, got {v}")

    @property
    def K1(self) -> float:
        return self.H / self.Cp

    @property
    def K2(self) -> float:
        return 1.0 / (self.rho_s * self.V_s)

    @property
    def K3(self) -> float:
        return 1.0 / self.m_bar_out_dsh

    @classmethod
    def from_gains(cls, K1: float, K2: float, K3: float, m_bar_in: float,
                   u_scale: float = 1.0) -> "PlantParams":
        """Parameters realising the given gains with unit Cp and V_s."""
        return cls(H=K1, Cp=1.0, rho_s=1.0 / K2, V_s=1.0, m_bar_out_dsh=1.0 / K3,
                   m_bar_in=m_bar_in, u_scale=u_scale)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PlantParams":
        data = dict(data)
        if "K1" in data:
            return cls.from_gains(data.pop("K1"), data.pop("K2"), data.pop("K3"),
                                  data.pop("m_bar_in", 10.0), data.pop("u_scale", 1.0))
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown plant fields: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class PlantState(NamedTuple):
    x1: float
    x2: float


@dataclass(frozen=True)
class DisturbanceVector:
    """Exogenous signals d1..d7 (see module docstring for units)."""

    d1: float
    d2: float
    d3: float
    d4: float
    d5: float
    d6: float
    d7: float

    def __post_init__(self):
        if not all(math.isfinite(getattr(self, c)) for c in CHANNELS):
            raise ConfigError("disturbances must be finite")
        if not self.d7 > 0:
            raise ConfigError(f"d7 must be positive, got {self.d7}")
        if not self.d4 > self.d5:
            raise ConfigError(f"spray water must be colder than inlet steam (d4={self.d4}, d5={self.d5})")

    def check_stable_coupling(self, p: PlantParams) -> None:
        if not p.K2 * self.d7 ** 2 < 1.0:
            raise ConfigError(f"K2*d7^2 = {p.K2 * self.d7 ** 2:g} violates K2*d7^2 < 1")


DESK_DISTURBANCE = DisturbanceVector(1.0, 10.0, 0.01, 450.0, 40.0, 0.0, 2.0)


@dataclass(frozen=True)
class DerivativeOf:
    """Channel defined as the time derivative of another channel's profile."""

    channel: str


class DisturbanceGenerator:
    """Evaluates one profile per channel into a validated DisturbanceVector.

    A channel may be linked to another as its derivative, e.g.
    ``d6 = DerivativeOf("d4")`` so the inlet-temperature rate stays
    consistent with the inlet temperature itself.
    """

    def __init__(self, profiles: Mapping[str, Union[Profile, DerivativeOf, float]],
                 params: PlantParams | None = None):
        missing = [c for c in CHANNELS if c not in profiles]
        if missing:
            raise ConfigError(f"disturbance channels missing: {missing}")
        self.profiles: dict[str, Union[Profile, DerivativeOf]] = {}
        for c in CHANNELS:
            prof = profiles[c]
            if isinstance(prof, (int, float)):
                prof = profile_from_dict(prof)
            self.profiles[c] = prof
        for c, prof in self.profiles.items():
            if isinstance(prof, DerivativeOf):
                src = self.profiles.get(prof.channel)
                if src is None or isinstance(src, DerivativeOf):
                    raise ConfigError(f"{c} links to invalid channel {prof.channel!r}")
        self.params = params
        if params is not None:
            self(0.0)

    def __call__(self, t: float) -> DisturbanceVector:
        vals = []
        for c in CHANNELS:
            prof = self.profiles[c]
            if isinstance(prof, DerivativeOf):
                vals.append(self.profiles[prof.channel].derivative(t))
            else:
                vals.append(prof.value(t))
        d = DisturbanceVector(*vals)
        if self.params is not None:
            d.check_stable_coupling(self.params)
        return d

    def channel_range(self, c: str) -> tuple[float, float]:
        prof = self.profiles[c]
        if isinstance(prof, DerivativeOf):
            raise ConfigError(f"range of linked channel {c} is not tabulated")
        return prof.values_range()

    @classmethod
    def constant(cls, d: DisturbanceVector, params: PlantParams | None = None):
        return cls({c: getattr(d, c) for c in CHANNELS}, params)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any], params: PlantParams | None = None):
        profiles: dict[str, Any] = {}
        for c in CHANNELS:
            if c not in data:
                raise ConfigError(f"disturbance channel {c} missing")
            spec = data[c]
            if isinstance(spec, Mapping) and spec.get("kind") == "derivative_of":
                profiles[c] = DerivativeOf(spec["channel"])
            else:
                try:
                    profiles[c] = profile_from_dict(spec, ("constant", "step", "sine", "table"))
                except ValueError as exc:
                    raise ConfigError(f"{c}: {exc}") from None
        return cls(profiles, params)

    def to_dict(self) -> dict[str, Any]:
        out = {}
        for c, prof in self.profiles.items():
            if isinstance(prof, DerivativeOf):
                out[c] = {"kind": "derivative_of", "channel": prof.channel}
            else:
                out[c] = profile_to_dict(prof)
        return out


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise NumericBlowup()


def faulty_rhs(state: Sequence[float], u: float, phi: float, d: DisturbanceVector,
               p: PlantParams) -> tuple[float, float]:
    """State derivative with the spray actuator delivering ``(1 - phi) u``."""
    if not 0.0 <= phi <= 1.0:
        raise ValueError(f"invalid fault level {phi}")
    x1, x2 = state
    _check_finite(x1, x2, u)
    ue = p.u_scale * ((1.0 - phi) * u)
    dx1 = p.K2 * (p.K1 * d.d1 + d.d7 * (x2 - x1) - d.d3)
    dx2 = p.K3 * ((d.d2 + ue) * (d.d4 - x2) - ue * (d.d4 - d.d5) + p.m_bar_in * d.d6)
    _check_finite(dx1, dx2)
    return dx1, dx2


def nominal_rhs(state: Sequence[float], u: float, d: DisturbanceVector,
                p: PlantParams) -> tuple[float, float]:
    """Healthy-actuator dynamics; identical arithmetic to ``faulty_rhs`` at phi=0."""
    if u < 0:
        raise ValueError(f"control input must be non-negative, got {u}")
    return faulty_rhs(state, u, 0.0, d, p)


Rhs = Callable[[float, Sequence[float]], Sequence[float]]


def integrate_step(state, rhs: Rhs, dt: float, t: float = 0.0):
    """One classical fourth-order Runge-Kutta step of ``y' = rhs(t, y)``.

    ``state`` may be a float or a sequence of floats; the result has the same
    shape (a ``PlantState`` stays a ``PlantState``).
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if isinstance(state, (int, float)):
        f = lambda tt, y: (rhs(tt, y[0]),)  # noqa: E731
        return integrate_step((float(state),), f, dt, t)[0]
    y = tuple(state)
    h2 = 0.5 * dt
    k1 = rhs(t, y)
    k2 = rhs(t + h2, tuple(a + h2 * b for a, b in zip(y, k1)))
    k3 = rhs(t + h2, tuple(a + h2 * b for a, b in zip(y, k2)))
    k4 = rhs(t + dt, tuple(a + dt * b for a, b in zip(y, k3)))
    out = tuple(a + dt / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
                for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4))
    if not all(math.isfinite(v) for v in out):
        raise NumericBlowup(t=t + dt)
    if isinstance(state, tuple) and hasattr(state, "_make"):
        return state._make(out)
    return out


def plant_step(state: PlantState, u: float, fault: Callable[[float], float],
               disturbances: Callable[[float], DisturbanceVector], p: PlantParams,
               t: float, dt: float) -> PlantState:
    """Advance the faulty plant over [t, t+dt] with u held.

    Fault level and disturbances are evaluated at every RK4 stage time.
    """
    try:
        return integrate_step(
            state, lambda tt, y: faulty_rhs(y, u, fault(tt), disturbances(tt), p), dt, t)
    except NumericBlowup as exc:
        raise NumericBlowup(t=exc.t if exc.t is not None else t) from None
