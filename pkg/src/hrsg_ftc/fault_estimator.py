"""Online physics-informed fault estimator.

A 3-h-1 network (tanh hidden layer, sigmoid output) maps the normalised
triple (x1, xhat2, u) to a fault estimate in (0, 1). It is trained by plain
gradient descent on the mean squared residual between the observer's
finite-difference ``dxhat2/dt`` and the x2 model evaluated with the network's
own estimate, plus ``lambda_reg * ||W||^2``.
"""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError, EstimatorDiverged, InsufficientData
from .plant import DisturbanceVector, PlantParams


@dataclass(frozen=True)
class InputScaling:
    """Affine map ``(x - center) / scale`` applied to (x1, xhat2, u)."""

    center: tuple[float, float, float] = (540.0, 540.0, 0.5)
    scale: tuple[float, float, float] = (20.0, 20.0, 0.5)

    def __post_init__(self):
        if len(self.center) != 3 or len(self.scale) != 3 or min(self.scale) <= 0:
            raise ConfigError("input scaling needs 3 centers and 3 positive scales")

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - np.asarray(self.center)) / np.asarray(self.scale)


@dataclass(frozen=True)
class NetworkWeights:
    W1: np.ndarray  # (3, h)
    b1: np.ndarray  # (h,)
    w2: np.ndarray  # (h,)
    b2: float
    scaling: InputScaling = field(default_factory=InputScaling)

    @property
    def hidden(self) -> int:
        return self.W1.shape[1]

    def flat(self) -> np.ndarray:
        """Trainable entries, layer-ordered and row-major: W1, b1, w2, b2."""
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    def with_flat(self, theta: np.ndarray) -> "NetworkWeights":
        h = self.hidden
        theta = np.asarray(theta, dtype=float)
        if theta.size != 5 * h + 1:
            raise ValueError("flat weight vector has the wrong length")
        return replace(self, W1=theta[:3 * h].reshape(3, h).copy(),
                       b1=theta[3 * h:4 * h].copy(), w2=theta[4 * h:5 * h].copy(),
                       b2=float(theta[5 * h]))

    def norm(self) -> float:
        return float(np.linalg.norm(self.flat()))

    @classmethod
    def zeros(cls, h: int, scaling: InputScaling | None = None) -> "NetworkWeights":
        return cls(np.zeros((3, h)), np.zeros(h), np.zeros(h), 0.0,
                   scaling or InputScaling())

    @classmethod
    def init(cls, h: int, rng: np.random.Generator, init_scale: float = 0.1,
             output_bias: float = -4.0, scaling: InputScaling | None = None):
        return cls(rng.normal(0.0, init_scale / math.sqrt(3.0), (3, h)),
                   np.zeros(h),
                   rng.normal(0.0, init_scale / math.sqrt(h), h),
                   float(output_bias), scaling or InputScaling())


@dataclass(frozen=True)
class PinnConfig:
    eta: float = 2e-4
    lambda_reg: float = 1e-6
    h: int = 16
    window: int = 32
    updates_per_step: int = 1
    weight_cap: float = 1e3
    init_scale: float = 0.1
    output_bias_init: float = -4.0
    scaling: InputScaling = field(default_factory=InputScaling)

    def __post_init__(self):
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if not self.lambda_reg >= 0:
            raise ConfigError("lambda_reg must be non-negative")
        if self.h < 1 or self.window < 2 or self.updates_per_step < 1:
            raise ConfigError("need h >= 1, window >= 2, updates_per_step >= 1")

    @classmethod
    def from_dict(cls, data) -> "PinnConfig":
        data = dict(data)
        sc = data.pop("scaling", None)
        if sc is not None:
            data["scaling"] = InputScaling(tuple(sc["center"]), tuple(sc["scale"]))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"pinn: {exc}") from None


class Sample(NamedTuple):
    t: float
    x1: float
    xhat2: float
    u: float
    d: DisturbanceVector


class TrainingWindow:
    """Bounded FIFO of recent samples with strictly increasing timestamps."""

    def __init__(self, capacity: int):
        if capacity < 2:
            raise ConfigError("window capacity must be at least 2")
        self.capacity = capacity
        self._buf: deque[Sample] = deque(maxlen=capacity)

    def push(self, sample: Sample) -> None:
        if self._buf and not sample.t > self._buf[-1].t:
            raise ValueError(f"window timestamps must increase ({sample.t} after {self._buf[-1].t})")
        self._buf.append(sample)

    def __len__(self) -> int:
        return len(self._buf)

    def __iter__(self):
        return iter(self._buf)

    @property
    def full(self) -> bool:
        return len(self._buf) == self.capacity

    def arrays(self):
        """Column arrays: t, inputs (n, 3), xhat2, u, d2, d4, d5, d6."""
        s = self._buf
        t = np.array([a.t for a in s])
        x = np.array([(a.x1, a.xhat2, a.u) for a in s])
        d = np.array([(a.d.d2, a.d.d4, a.d.d5, a.d.d6) for a in s])
        return t, x, d

    @classmethod
    def from_samples(cls, samples, capacity: int | None = None) -> "TrainingWindow":
        samples = list(samples)
        win = cls(capacity or max(2, len(samples)))
        for smp in samples:
            win.push(smp)
        return win


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _hidden(w: NetworkWeights, x: np.ndarray):
    xn = w.scaling.apply(x)
    a = np.tanh(xn @ w.W1 + w.b1)
    z = a @ w.w2 + w.b2
    return xn, a, z


def forward_batch(w: NetworkWeights, x: np.ndarray) -> np.ndarray:
    """Vectorised ``forward`` over rows of (x1, xhat2, u)."""
    _, _, z = _hidden(w, np.atleast_2d(np.asarray(x, dtype=float)))
    if not np.isfinite(z).all():
        raise EstimatorDiverged("estimator diverged: non-finite output")
    # tanh form of the sigmoid keeps the result off 0 and 1 exactly for |z| < ~36
    return np.clip(_sigmoid(z), np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))


def forward(w: NetworkWeights, x1: float, xhat2: float, u: float) -> float:
    """Fault estimate strictly inside (0, 1)."""
    return float(forward_batch(w, np.array([[x1, xhat2, u]]))[0])


def _residual_terms(w: NetworkWeights, win: TrainingWindow, p: PlantParams):
    if len(win) < 2:
        raise InsufficientData("insufficient data: window needs at least 2 samples")
    t, x, d = win.arrays()
    deriv = np.diff(x[:, 1]) / np.diff(t)
    x = x[1:]
    d2, d4, d5, d6 = d[1:].T
    xn, a, z = _hidden(w, x)
    phi = _sigmoid(z)
    xh2, u = x[:, 1], x[:, 2]
    ue = p.u_scale * (1.0 - phi) * u
    model = p.K3 * (d2 * (d4 - xh2) + p.m_bar_in * d6 - ue * (xh2 - d5))
    r = deriv - model
    # d r / d phi
    dr_dphi = -p.K3 * p.u_scale * u * (xh2 - d5)
    return r, dr_dphi, phi, xn, a


def physics_residual(w: NetworkWeights, win: TrainingWindow, p: PlantParams) -> float:
    r, *_ = _residual_terms(w, win, p)
    return float(np.mean(r * r))


def total_loss(w: NetworkWeights, win: TrainingWindow, cfg: PinnConfig, p: PlantParams) -> float:
    theta = w.flat()
    return physics_residual(w, win, p) + cfg.lambda_reg * float(theta @ theta)


def gradient(w: NetworkWeights, win: TrainingWindow, cfg: PinnConfig,
             p: PlantParams) -> np.ndarray:
    """Exact gradient of ``total_loss`` as a flat vector (``w.flat()`` layout)."""
    r, dr_dphi, phi, xn, a = _residual_terms(w, win, p)
    n = r.size
    g_z = (2.0 / n) * r * dr_dphi * phi * (1.0 - phi)
    g_b2 = g_z.sum()
    g_w2 = a.T @ g_z
    g_pre = np.outer(g_z, w.w2) * (1.0 - a * a)
    g_W1 = xn.T @ g_pre
    g_b1 = g_pre.sum(axis=0)
    grad = np.concatenate([g_W1.ravel(), g_b1, g_w2, [g_b2]])
    grad += 2.0 * cfg.lambda_reg * w.flat()
    if not np.isfinite(grad).all():
        raise EstimatorDiverged("estimator diverged: non-finite gradient")
    return grad


def update(w: NetworkWeights, cfg: PinnConfig, win: TrainingWindow,
           p: PlantParams) -> tuple[NetworkWeights, float]:
    """``updates_per_step`` gradient-descent steps; returns weights and post-step loss."""
    for _ in range(cfg.updates_per_step):
        theta = w.flat() - cfg.eta * gradient(w, win, cfg, p)
        if not np.isfinite(theta).all():
            raise EstimatorDiverged("estimator diverged: non-finite weights")
        nrm = float(np.linalg.norm(theta))
        if nrm > cfg.weight_cap:
            raise EstimatorDiverged(
                f"estimator diverged: weight norm {nrm:.4g} above cap {cfg.weight_cap:g}")
        w = w.with_flat(theta)
    return w, total_loss(w, win, cfg, p)


def armijo_step(w: NetworkWeights, win: TrainingWindow, cfg: PinnConfig, p: PlantParams,
                eta0: float = 1.0, shrink: float = 0.5, c: float = 1e-4,
                max_halvings: int = 60) -> float:
    """Largest ``eta0 * shrink**k`` meeting the Armijo decrease condition on a frozen window."""
    g = gradient(w, win, cfg, p)
    base = total_loss(w, win, cfg, p)
    gg = float(g @ g)
    eta = eta0
    for _ in range(max_halvings):
        trial = w.with_flat(w.flat() - eta * g)
        if total_loss(trial, win, cfg, p) <= base - c * eta * gg:
            return eta
        eta *= shrink
    return 0.0


class PinnEstimator:
    """Stateful wrapper used by the closed loop.

    ``estimate`` always uses the weights produced by the previous ``observe``
    call. Until the window first fills up the estimate is the healthy prior 0.
    """

    def __init__(self, cfg: PinnConfig, params: PlantParams, seed: int = 0):
        self.cfg = cfg
        self.params = params
        rng = np.random.default_rng(seed)
        self.weights = NetworkWeights.init(cfg.h, rng, cfg.init_scale,
                                           cfg.output_bias_init, cfg.scaling)
        self.window = TrainingWindow(cfg.window)
        self.trained = False
        self.loss = math.nan

    def estimate(self, x1: float, xhat2: float, u: float) -> float:
        if not self.trained:
            return 0.0
        return forward(self.weights, x1, xhat2, u)

    def observe(self, sample: Sample) -> None:
        self.window.push(sample)
        if self.window.full:
            self.weights, self.loss = update(self.weights, self.cfg, self.window, self.params)
            self.trained = True


def dump_weights(w: NetworkWeights, path) -> None:
    """Write weights as CSV rows ``block,row,col,value`` in flat-vector order."""
    rows = []
    for i in range(3):
        for j in range(w.hidden):
            rows.append(("W1", i, j, w.W1[i, j]))
    rows += [("b1", 0, j, v) for j, v in enumerate(w.b1)]
    rows += [("w2", j, 0, v) for j, v in enumerate(w.w2)]
    rows.append(("b2", 0, 0, w.b2))
    with Path(path).open("w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["block", "row", "col", "value"])
        for blk, i, j, v in rows:
            wr.writerow([blk, i, j, repr(float(v))])


def load_weights(path, scaling: InputScaling | None = None) -> NetworkWeights:
    with Path(path).open(newline="") as fh:
        values = [float(r["value"]) for r in csv.DictReader(fh)]
    h = (len(values) - 1) // 5
    if 5 * h + 1 != len(values):
        raise ValueError(f"{path}: weight count {len(values)} is not 5h+1")
    return NetworkWeights.zeros(h, scaling).with_flat(np.array(values))
