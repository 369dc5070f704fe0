"""Checkable stability certificates.

* Lipschitz constants of the x2 nonlinearity over an operating envelope.
* Observer gain conditions and the ultimate-boundedness radius
  ``sqrt(Theta / kappa)`` with its full term breakdown.
* Gradient-descent contraction factor and the weight-deviation bound,
  plus a convex quadratic surrogate on which both can be asserted.
* A monitor that turns (e1, e2, s) traces into ``V = (e1^2+e2^2+s^2)/2``.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field, asdict
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ConfigError
from .plant import PlantParams

KAPPA3_NOTE = ("s^2 coefficient K2*d7 + c/2 + K2^2*d7^2/2 enters the collected bound with "
               "positive sign; kappa3 keeps it and is not sign-corrected")


def _interval(data: Mapping[str, Any], key: str, default=None) -> tuple[float, float]:
    val = data.get(key, default)
    if val is None:
        raise ConfigError(f"envelope is missing {key}")
    if isinstance(val, (int, float)):
        val = (val, val)
    lo, hi = float(val[0]), float(val[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo > hi:
        raise ConfigError(f"degenerate envelope interval for {key}: [{lo}, {hi}]")
    return lo, hi


@dataclass(frozen=True)
class Envelope:
    """Operating ranges. ``u`` is spray flow in plant units (kg/s)."""

    x2: tuple[float, float]
    u: tuple[float, float]
    phi: tuple[float, float] = (0.0, 1.0)
    d1: tuple[float, float] = (0.0, 0.0)
    d2: tuple[float, float] = (0.0, 0.0)
    d3: tuple[float, float] = (0.0, 0.0)
    d5: tuple[float, float] = (0.0, 0.0)
    d7: tuple[float, float] = (1.0, 1.0)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Envelope":
        kw = {"x2": _interval(data, "x2"), "u": _interval(data, "u")}
        for k in ("phi", "d1", "d2", "d3", "d5", "d7"):
            if k in data:
                kw[k] = _interval(data, k)
        env = cls(**kw)
        env.validate()
        return env

    def validate(self) -> None:
        for name in ("x2", "u", "phi", "d1", "d2", "d3", "d5", "d7"):
            _interval({name: getattr(self, name)}, name)
        if self.u[0] < 0 or self.phi[0] < 0 or self.phi[1] > 1:
            raise ConfigError("envelope needs u >= 0 and phi within [0, 1]")


@dataclass(frozen=True)
class LipschitzBounds:
    L_x: float
    L_phi: float
    u_max: float
    Delta_phi: float = 0.0
    M_b: float = 0.0
    M_x2: float = 0.0

    def __post_init__(self):
        for k, v in asdict(self).items():
            if not (v >= 0 and math.isfinite(v)):
                raise ConfigError(f"Lipschitz bound {k} must be finite and non-negative")


def x2_nonlinearity(x2, u, phi, d2, d4, d5):
    """``f = (d2 + (1-phi)u)(d4 - x2) - (1-phi)u(d4 - d5)`` (u in kg/s)."""
    ue = (1.0 - phi) * u
    return (d2 + ue) * (d4 - x2) - ue * (d4 - d5)


def derive_lipschitz(envelope: Envelope, p: PlantParams | None = None,
                     delta_phi: float = 0.0) -> LipschitzBounds:
    """Lipschitz constants of f over the envelope.

    ``|df/dx2| = |d2 + (1-phi)u|`` and ``|df/dphi| / |u| = |x2 - d5|``; both
    are multilinear in the box coordinates so their maxima sit on corners.
    ``M_b`` needs ``K1`` and is 0 when no plant parameters are given.
    """
    envelope.validate()
    L_x = max(abs(d2 + (1.0 - ph) * u)
              for d2, ph, u in itertools.product(envelope.d2, envelope.phi, envelope.u))
    L_phi = max(abs(x2 - d5) for x2, d5 in itertools.product(envelope.x2, envelope.d5))
    M_b = 0.0
    if p is not None:
        M_b = max(abs(p.K1 * d1 - d3) for d1, d3 in itertools.product(envelope.d1, envelope.d3))
    M_x2 = max(abs(envelope.x2[0]), abs(envelope.x2[1]))
    return LipschitzBounds(L_x, L_phi, envelope.u[1], delta_phi, M_b, M_x2)


@dataclass(frozen=True)
class GainCertificate:
    threshold1: float
    threshold2: float
    margin1: float
    margin2: float

    @property
    def pass1(self) -> bool:
        return self.margin1 > 0

    @property
    def pass2(self) -> bool:
        return self.margin2 > 0

    @property
    def passed(self) -> bool:
        return self.pass1 and self.pass2


def check_gain_conditions(g, b: LipschitzBounds, p: PlantParams, d7: float) -> GainCertificate:
    """Strict conditions ``lambda1 > K2 d7 + K3 L_x`` and ``lambda2 > K3 L_phi u_max``."""
    th1 = p.K2 * d7 + p.K3 * b.L_x
    th2 = p.K3 * b.L_phi * b.u_max
    return GainCertificate(th1, th2, g.lambda1 - th1, g.lambda2 - th2)


@dataclass(frozen=True)
class UubBoundParams:
    """Young-inequality constants. ``eta_small`` absorbs ``-lambda1|e1|``."""

    alpha: float
    mu: float
    beta: float
    c: float
    eta_small: float | None = None

    @classmethod
    def auto(cls, b: LipschitzBounds, p: PlantParams, d7: float) -> "UubBoundParams":
        a = p.K2 * d7
        alpha, mu, c = a, 1.0, 1.0
        beta = 2.0 * (p.K3 * b.L_x + mu / 2.0 + a * a / (2.0 * alpha)) + 1.0
        return cls(alpha, mu, beta, c, None)


@dataclass(frozen=True)
class UubResult:
    radius: float
    theta: float
    kappa: float
    kappa1: float
    kappa2: float
    kappa3: float
    eta_small: float
    binding: str
    terms: dict[str, float] = field(default_factory=dict)


def uub_radius(g, b: LipschitzBounds, p: PlantParams, d7: float, ref_bound: float,
               params: UubBoundParams | None = None) -> UubResult:
    """Ultimate bound ``sqrt(Theta / kappa)`` on ``||(e1, e2, s)||``."""
    prm = params or UubBoundParams.auto(b, p, d7)
    a = p.K2 * d7
    if not (0 < prm.alpha < 2 * a) or prm.mu <= 0 or prm.beta <= 0 or prm.c <= 0:
        raise ConfigError("no certificate at this configuration: Young constants out of range")
    kappa1 = 0.5 * (a - prm.alpha / 2.0)
    kappa2 = 0.5 * (prm.beta / 2.0 - p.K3 * b.L_x - prm.mu / 2.0 - a * a / (2.0 * prm.alpha))
    kappa3 = 0.5 * (a + prm.c / 2.0 + 0.5 * a * a)
    eta_s = kappa1 / 2.0 if prm.eta_small is None else prm.eta_small
    if not 0 < eta_s < kappa1:
        raise ConfigError("no certificate at this configuration: eta_small outside (0, kappa1)")
    parts = {"kappa1-eta": kappa1 - eta_s, "kappa2": kappa2, "kappa3": kappa3}
    if min(parts.values()) <= 0:
        raise ConfigError("no certificate at this configuration: "
                          + ", ".join(f"{k}={v:.4g}" for k, v in parts.items()))
    binding = min(parts, key=parts.get)
    kappa = parts[binding]
    beta1 = prm.beta
    terms = {
        "lambda1*delta1": g.lambda1 * g.delta1,
        "fault_mismatch": (p.K3 * b.L_phi * b.u_max * b.Delta_phi) ** 2 / (2.0 * prm.mu),
        "lambda2*delta2": g.lambda2 * g.delta2,
        "s_disturbance": (p.K2 * (b.M_b + d7 * b.M_x2)) ** 2 / (2.0 * prm.c),
        "reference": 0.5 * ref_bound ** 2,
        "lambda1_absorb": g.lambda1 ** 2 / (4.0 * eta_s),
        "lambda2_absorb": g.lambda2 ** 2 / (2.0 * beta1),
    }
    theta = sum(terms.values())
    return UubResult(math.sqrt(theta / kappa), theta, kappa, kappa1, kappa2, kappa3,
                     eta_s, binding, terms)


@dataclass(frozen=True)
class ContractionParams:
    eta: float
    mu_g: float
    L_g: float
    zeta: float = 0.0
    M: float = 0.0

    @property
    def eta_limit(self) -> float:
        return 2.0 * self.mu_g / self.L_g ** 2


def contraction_rho(cp: ContractionParams) -> float:
    """``sqrt(1 - 2 eta mu_g + eta^2 L_g^2)``."""
    arg = 1.0 - 2.0 * cp.eta * cp.mu_g + cp.eta ** 2 * cp.L_g ** 2
    if arg < 0:
        raise ValueError(f"contraction factor undefined: 1 - 2*eta*mu + eta^2*L^2 = {arg}")
    rho = math.sqrt(arg)
    if rho >= 1.0:
        warnings.warn(f"no contraction (rho = {rho:.6g} >= 1)", RuntimeWarning, stacklevel=2)
    return rho


@dataclass(frozen=True)
class WeightBound:
    deviation: float
    absolute: float


def weight_bound(cp: ContractionParams, w0_dev: float, k: int | np.ndarray) -> WeightBound:
    """Deviation bound ``rho^k |W0~| + eta zeta / (1 - rho)`` and the absolute bound ``M + ...``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        rho = contraction_rho(cp)
    if rho >= 1.0:
        raise ValueError(f"no weight bound: rho = {rho} >= 1")
    dev = rho ** np.asarray(k, dtype=float) * w0_dev + cp.eta * cp.zeta / (1.0 - rho)
    if np.ndim(dev) == 0:
        dev = float(dev)
    return WeightBound(dev, cp.M + dev)


class QuadraticSurrogate:
    """``L(W) = 1/2 (W-W*)' A (W-W*) + g'(W-W*)`` with eigenvalues of A in [mu_g, L_g].

    ``W*`` plays the reference point of the bound and ``g`` its gradient
    mismatch, ``||g|| = zeta``.
    """

    def __init__(self, dim: int, mu_g: float, L_g: float, zeta: float,
                 rng: np.random.Generator, w_star_norm: float = 1.0):
        q, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
        eig = np.linspace(mu_g, L_g, dim)
        self.A = (q * eig) @ q.T
        self.w_star = rng.normal(size=dim)
        self.w_star *= w_star_norm / np.linalg.norm(self.w_star)
        g = rng.normal(size=dim)
        self.g = zeta * g / np.linalg.norm(g)

    def grad(self, w: np.ndarray) -> np.ndarray:
        return self.A @ (w - self.w_star) + self.g

    def run(self, w0: np.ndarray, eta: float, steps: int):
        """Gradient descent; returns deviation norms and per-step contraction ratios of the gradient map."""
        w = np.array(w0, dtype=float)
        devs = np.empty(steps + 1)
        ratios = np.empty(steps)
        g_star = self.grad(self.w_star)
        for k in range(steps):
            dev = w - self.w_star
            devs[k] = np.linalg.norm(dev)
            gw = self.grad(w)
            mapped = dev - eta * (gw - g_star)
            ratios[k] = np.linalg.norm(mapped) / devs[k] if devs[k] > 0 else 0.0
            w = w - eta * gw
        devs[steps] = np.linalg.norm(w - self.w_star)
        return devs, ratios


@dataclass
class MonitorResult:
    t: np.ndarray
    V: np.ndarray
    norm: np.ndarray
    sup_post: float
    radius: float | None

    @property
    def within_radius(self) -> bool | None:
        return None if self.radius is None else bool(self.sup_post <= self.radius)


@dataclass(frozen=True)
class LyapunovSample:
    t: float
    e1: float
    e2: float
    s: float

    @property
    def V(self) -> float:
        return 0.5 * (self.e1 ** 2 + self.e2 ** 2 + self.s ** 2)


def lyapunov_monitor(t: Sequence[float], e1: Sequence[float], e2: Sequence[float],
                     s: Sequence[float], radius: float | None = None,
                     post_fraction: float = 0.5) -> MonitorResult:
    """V series and the sup of ``||e||`` over the final ``post_fraction`` of the run."""
    t = np.asarray(t, dtype=float)
    e = np.stack([np.asarray(e1, float), np.asarray(e2, float), np.asarray(s, float)])
    V = 0.5 * np.sum(e * e, axis=0)
    norm = np.sqrt(2.0 * V)
    if t.size == 0:
        return MonitorResult(t, V, norm, 0.0, radius)
    t_post = t[0] + (1.0 - post_fraction) * (t[-1] - t[0])
    post = t >= t_post
    return MonitorResult(t, V, norm, float(norm[post].max()), radius)


def format_report(entries: Mapping[str, Any]) -> str:
    """Flat ``key = value`` lines."""
    lines = []
    for k, v in entries.items():
        if isinstance(v, float):
            v = repr(v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            k, v = line.split("=", 1)
            out[k.strip()] = v.strip()
    return out
