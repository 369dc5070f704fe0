"""Sliding-mode observer for the attemperator temperature.

Both channels are corrected from the measurable output error
``e1 = y - xhat1`` through saturated injections ``lambda1*sat(e1/delta1)``
and ``lambda2*sat(e1/delta2)``; the unmeasured ``e2`` is never used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Union

from .errors import ConfigError, NumericBlowup
from .plant import DisturbanceVector, PlantParams, faulty_rhs, integrate_step


@dataclass(frozen=True)
class ObserverGains:
    lambda1: float = 2.0
    lambda2: float = 65.0
    delta1: float = 0.5
    delta2: float = 1.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2", "delta1", "delta2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ConfigError(f"observer gain {name} must be positive, got {v}")


class ObserverState(NamedTuple):
    xhat1: float
    xhat2: float


def sat(z: float) -> float:
    return -1.0 if z < -1.0 else (1.0 if z > 1.0 else z)


def observer_rhs(obs, y: float, u: float, phi_hat: float, d: DisturbanceVector,
                 p: PlantParams, g) -> tuple[float, float]:
    """Model copy driven by ``phi_hat`` plus output-error injection.

    ``g`` only needs ``lambda1, lambda2, delta1, delta2`` attributes, so
    zero-gain variants (open-loop observer) can be passed as plain tuples.
    """
    xh1, xh2 = obs
    try:
        m1, m2 = faulty_rhs((xh1, xh2), u, phi_hat, d, p)
    except NumericBlowup:
        raise NumericBlowup() from None
    e1 = y - xh1
    c1 = g.lambda1 * sat(e1 / g.delta1)
    c2 = g.lambda2 * sat(e1 / g.delta2)
    out = m1 + c1, m2 + c2
    if not (math.isfinite(out[0]) and math.isfinite(out[1])):
        raise NumericBlowup()
    return out


def observer_step(obs: ObserverState, y: float, u: float, phi_hat: float,
                  disturbances: Union[DisturbanceVector, Callable[[float], DisturbanceVector]],
                  p: PlantParams, g, dt: float, t: float = 0.0) -> ObserverState:
    """RK4 step with ``y``, ``u`` and ``phi_hat`` held over the step.

    Disturbances are known exogenous signals: a callable is evaluated at
    each stage time exactly like the plant does, a vector is held.
    """
    if isinstance(disturbances, DisturbanceVector):
        dist = lambda tt: disturbances  # noqa: E731
    else:
        dist = disturbances
    try:
        return integrate_step(
            ObserverState(*obs),
            lambda tt, x: observer_rhs(x, y, u, phi_hat, dist(tt), p, g), dt, t)
    except NumericBlowup:
        raise NumericBlowup(t=t + dt) from None


@dataclass(frozen=True)
class _Gains:
    lambda1: float
    lambda2: float
    delta1: float
    delta2: float


def open_loop_gains() -> _Gains:
    """Zero injection: the observer becomes a pure model copy."""
    return _Gains(0.0, 0.0, 1.0, 1.0)
