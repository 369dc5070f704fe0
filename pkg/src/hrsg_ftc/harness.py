"""Scenario configuration, closed-loop simulation, metrics and valve-log replay."""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
import os
from collections import Counter
from dataclasses import dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterator, Mapping

import numpy as np

from .controller import (PidConfig, PidState, Reference, SmcConfig, pid_compute,
                         reference_eval, smc_compute)
from .errors import ConfigError, EstimatorDiverged, NumericBlowup
from .fault_estimator import PinnConfig, PinnEstimator, Sample
from .faults import (DEFAULT_CMD_FLOOR, DEFAULT_OVERDELIVERY_SLACK, FaultProfile,
                     ValveLogRecord, true_fault_from_log)
from .observer import ObserverGains, ObserverState, observer_step
from .plant import DisturbanceGenerator, PlantParams, PlantState, plant_step
from .stability import (KAPPA3_NOTE, ContractionParams, Envelope, check_gain_conditions,
                        contraction_rho, derive_lipschitz, format_report, lyapunov_monitor,
                        uub_radius, weight_bound)

logger = logging.getLogger(__name__)

TRACE_COLUMNS = ("t", "x1", "x2", "xhat1", "xhat2", "phi_true", "phi_hat",
                 "u_cmd", "u_eff", "s", "V", "loss", "wnorm")
LOG_COLUMNS = ("t_s", "u_cmd", "u_actual")
POST_TRANSIENT_FRACTION = 0.5
BAND = 1.0


# ---------------------------------------------------------------- configuration

@dataclass
class ScenarioConfig:
    duration: float
    dt: float
    plant: PlantParams
    disturbances: DisturbanceGenerator
    fault: FaultProfile
    reference: Reference
    initial_state: tuple[float, float]
    controller: str = "smc"
    smc: SmcConfig = field(default_factory=SmcConfig)
    pid: PidConfig = field(default_factory=PidConfig)
    observer: ObserverGains = field(default_factory=ObserverGains)
    pinn: PinnConfig = field(default_factory=PinnConfig)
    observer_init: tuple[float, float] | None = None
    noise_std: float = 0.0
    seed: int = 0
    output_dir: str = "out"
    name: str = "scenario"
    envelope: dict[str, Any] = field(default_factory=dict)
    delta_phi: float = 0.1
    contraction: dict[str, float] = field(default_factory=dict)
    raw: dict[str, Any] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ConfigError("dt must be positive")
        if not self.duration > 0:
            raise ConfigError("duration must be positive")
        n = round(self.duration / self.dt)
        if abs(n * self.dt - self.duration) > 1e-9 * max(1.0, self.duration):
            raise ConfigError(f"duration {self.duration} is not an integer multiple of dt {self.dt}")
        if self.controller not in ("smc", "pid", "both"):
            raise ConfigError(f"controller must be smc, pid or both, got {self.controller!r}")
        if self.noise_std < 0:
            raise ConfigError("noise std must be non-negative")

    @property
    def n_steps(self) -> int:
        return round(self.duration / self.dt)

    @property
    def u_max_flow(self) -> float:
        u_max = self.smc.u_max if self.controller != "pid" else self.pid.u_max
        return max(self.smc.u_max, self.pid.u_max, u_max) * self.plant.u_scale

    def events(self) -> list[float]:
        return sorted(set(self.fault.events) | set(self.reference.events))

    def with_controller(self, name: str) -> "ScenarioConfig":
        out = copy.copy(self)
        out.controller = name
        return out


def _section(data: Mapping[str, Any], key: str, cls):
    sub = data.get(key)
    if sub is None:
        return cls()
    try:
        return cls(**sub)
    except TypeError as exc:
        raise ConfigError(f"{key}: {exc}") from None


def scenario_from_dict(data: Mapping[str, Any], base_dir: Path | None = None) -> ScenarioConfig:
    """Build a ScenarioConfig from its JSON form (see docs/scenario_schema.md)."""
    data = copy.deepcopy(dict(data))
    for key in ("duration", "dt", "plant", "disturbances", "reference", "initial_state"):
        if key not in data:
            raise ConfigError(f"scenario is missing {key!r}")
    plant = PlantParams.from_dict(data["plant"])
    dist = DisturbanceGenerator.from_dict(data["disturbances"], plant)
    fault_spec = data.get("fault", {"kind": "constant", "value": 0.0})
    if isinstance(fault_spec, Mapping) and fault_spec.get("kind") == "log":
        path = Path(fault_spec["path"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        log = ingest_valve_log(path, cmd_floor=fault_spec.get("cmd_floor", DEFAULT_CMD_FLOOR),
                               slack=fault_spec.get("slack", DEFAULT_OVERDELIVERY_SLACK))
        fault = replay_fault(log.records, fault_spec.get("cmd_floor", DEFAULT_CMD_FLOOR),
                             fault_spec.get("slack", DEFAULT_OVERDELIVERY_SLACK))
    else:
        fault = FaultProfile.from_dict(fault_spec)
    pinn = PinnConfig.from_dict(data.get("pinn", {}))
    try:
        return ScenarioConfig(
            duration=float(data["duration"]),
            dt=float(data["dt"]),
            plant=plant,
            disturbances=dist,
            fault=fault,
            reference=Reference.from_dict(data["reference"]),
            initial_state=tuple(float(v) for v in data["initial_state"]),
            controller=data.get("controller", "smc"),
            smc=_section(data, "smc", SmcConfig),
            pid=_section(data, "pid", PidConfig),
            observer=_section(data, "observer", ObserverGains),
            pinn=pinn,
            observer_init=(tuple(float(v) for v in data["observer_init"])
                           if data.get("observer_init") is not None else None),
            noise_std=float(data.get("noise_std", 0.0)),
            seed=int(data.get("seed", 0)),
            output_dir=str(data.get("output_dir", "out")),
            name=str(data.get("name", "scenario")),
            envelope=dict(data.get("envelope", {})),
            delta_phi=float(data.get("delta_phi", 0.1)),
            contraction=dict(data.get("contraction", {})),
            raw=data,
        )
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None


def load_scenario(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return scenario_from_dict(data, base_dir=path.parent)


def standard_scenario_dict() -> dict[str, Any]:
    text = resources.files("hrsg_ftc").joinpath("data/standard_scenario.json").read_text()
    return json.loads(text)


def standard_scenario(**overrides) -> ScenarioConfig:
    data = standard_scenario_dict()
    data.update(overrides)
    return scenario_from_dict(data)


# ---------------------------------------------------------------- certificate

def scenario_envelope(cfg: ScenarioConfig) -> Envelope:
    """Operating envelope: explicit ``envelope`` entries override ranges read
    off the disturbance generator; ``u`` spans the actuator range in kg/s."""
    env: dict[str, Any] = {"u": (0.0, cfg.u_max_flow), "phi": (0.0, 1.0)}
    for c in ("d1", "d2", "d3", "d5", "d7"):
        try:
            env[c] = cfg.disturbances.channel_range(c)
        except ConfigError:
            pass
    env.update(cfg.envelope)
    if "x2" not in env:
        raise ConfigError("envelope needs an x2 range")
    return Envelope.from_dict(env)


def certificate(cfg: ScenarioConfig) -> dict[str, Any]:
    """Gain conditions, ultimate bound and weight-bound surrogate as flat entries."""
    env = scenario_envelope(cfg)
    b = derive_lipschitz(env, cfg.plant, cfg.delta_phi)
    d7 = env.d7[1]
    gc = check_gain_conditions(cfg.observer, b, cfg.plant, d7)
    rep: dict[str, Any] = {
        "scenario": cfg.name,
        "K1": cfg.plant.K1, "K2": cfg.plant.K2, "K3": cfg.plant.K3,
        "d7_max": d7,
        "coupling_K2_d7_sq": cfg.plant.K2 * d7 ** 2,
        "L_x": b.L_x, "L_phi": b.L_phi, "u_max_flow": b.u_max,
        "Delta_phi": b.Delta_phi, "M_b": b.M_b, "M_x2": b.M_x2,
        "lambda1": cfg.observer.lambda1, "lambda1_threshold": gc.threshold1,
        "lambda1_margin": gc.margin1, "lambda1_pass": gc.pass1,
        "lambda2": cfg.observer.lambda2, "lambda2_threshold": gc.threshold2,
        "lambda2_margin": gc.margin2, "lambda2_pass": gc.pass2,
        "gains_pass": gc.passed,
        "observer_injection": "lambda2*sat(e1/delta2) (output-error driven)",
    }
    try:
        res = uub_radius(cfg.observer, b, cfg.plant, d7, cfg.reference.bound())
    except ConfigError as exc:
        rep["uub_radius"] = "none"
        rep["uub_error"] = str(exc)
    else:
        rep.update({"uub_radius": res.radius, "uub_theta": res.theta, "uub_kappa": res.kappa,
                    "kappa1": res.kappa1, "kappa2": res.kappa2, "kappa3": res.kappa3,
                    "eta_small": res.eta_small, "kappa_binding": res.binding})
        for k, v in res.terms.items():
            rep[f"theta_term[{k}]"] = v
        rep["kappa3_note"] = KAPPA3_NOTE
    c = cfg.contraction
    if c:
        cp = ContractionParams(cfg.pinn.eta if "eta" not in c else c["eta"],
                               c["mu_g"], c["L_g"], c.get("zeta", 0.0), c.get("M", 0.0))
        rep["surrogate_eta"] = cp.eta
        rep["surrogate_mu_g"] = cp.mu_g
        rep["surrogate_L_g"] = cp.L_g
        try:
            rho = contraction_rho(cp)
            rep["surrogate_rho"] = rho
            if rho < 1:
                rep["surrogate_weight_bound_limit"] = weight_bound(cp, 0.0, 0).absolute
        except ValueError as exc:
            rep["surrogate_rho"] = f"undefined ({exc})"
        rep["weight_bound_status"] = "reported only (convexity not established for the network)"
    return rep


# ---------------------------------------------------------------- simulation

class SimTrace(dict):
    """Column store keyed by TRACE_COLUMNS, one row per control period."""

    @property
    def n_rows(self) -> int:
        return len(self["t"])

    def write_csv(self, path) -> None:
        cols = [np.asarray(self[c]) for c in TRACE_COLUMNS]
        with Path(path).open("w", newline="") as fh:
            fh.write(",".join(TRACE_COLUMNS) + "\n")
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def read_csv(cls, path) -> "SimTrace":
        with Path(path).open(newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd)
            rows = [[float(v) for v in r] for r in rd]
        arr = np.array(rows).reshape(-1, len(header))
        return cls({h: arr[:, i] for i, h in enumerate(header)})


@dataclass
class Metrics:
    overshoot: float
    settling_time: float
    band_occupancy: float
    mean_phi_error: float
    mean_x2_error: float
    max_x2_error: float
    spray_usage: float
    settling_reference_time: float
    post_transient_start: float

    def to_dict(self) -> dict[str, float]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class ScenarioResult:
    trace: SimTrace
    metrics: Metrics
    certificate: dict[str, Any]

    def __iter__(self) -> Iterator:
        return iter((self.trace, self.metrics, self.certificate))


def run_scenario(cfg: ScenarioConfig, controller: str | None = None,
                 measurement_hook: Callable[[int, float], float] | None = None) -> ScenarioResult:
    """Simulate the closed loop and return trace, metrics and certificate.

    Per control period k: measure y, estimate the fault with the weights from
    period k-1, compute u, integrate plant (true fault) and observer
    (estimated fault) over [t_k, t_k+dt], then push the sample and update the
    estimator.
    """
    ctrl = controller or cfg.controller
    if ctrl == "both":
        raise ConfigError("run_scenario needs a single controller; use run_both")
    cert = certificate(cfg)
    if not cert["gains_pass"]:
        logger.warning("observer gains fail the certificate (margins %.4g, %.4g); running anyway",
                       cert["lambda1_margin"], cert["lambda2_margin"])

    p, dt, n = cfg.plant, cfg.dt, cfg.n_steps
    dist, fault, ref = cfg.disturbances, cfg.fault, cfg.reference
    rng = np.random.default_rng(cfg.seed)
    est = PinnEstimator(cfg.pinn, p, seed=cfg.seed)
    pid_state = PidState()

    x = PlantState(*cfg.initial_state)
    y0 = x.x1
    xh = ObserverState(*(cfg.observer_init or (y0, dist(0.0).d4)))
    u_prev = 0.0
    cols = {c: np.empty(n + 1) for c in TRACE_COLUMNS}
    last: dict[str, float] | None = None

    for k in range(n + 1):
        t = k * dt
        try:
            y = x.x1
            if cfg.noise_std > 0:
                y += cfg.noise_std * rng.standard_normal()
            if measurement_hook is not None:
                y = measurement_hook(k, y)
            d = dist(t)
            loss, wnorm = est.loss, est.weights.norm()
            phi_hat = est.estimate(y, xh.xhat2, u_prev)
            if ctrl == "smc":
                u = smc_compute(y, t, ref, phi_hat, cfg.smc)
            else:
                u, pid_state = pid_compute(y, t, ref, pid_state, cfg.pid, dt)
            phi = fault(t)
            r = reference_eval(ref, t)[0]
            # s is the sliding variable the controller acted on (measured output)
            e1, e2, s = x.x1 - xh.xhat1, x.x2 - xh.xhat2, y - r
            row = (t, x.x1, x.x2, xh.xhat1, xh.xhat2, phi, phi_hat, u, (1.0 - phi) * u, s,
                   0.5 * (e1 * e1 + e2 * e2 + s * s), loss, wnorm)
            for c, v in zip(TRACE_COLUMNS, row):
                cols[c][k] = v
            last = dict(zip(TRACE_COLUMNS, row))
            est.observe(Sample(t, y, xh.xhat2, u_prev, d))
            if k == n:
                break
            x_next = plant_step(x, u, fault, dist, p, t, dt)
            xh = observer_step(xh, y, u, phi_hat, dist, p, cfg.observer, dt, t)
            x, u_prev = x_next, u
        except NumericBlowup as exc:
            raise NumericBlowup(t=exc.t if exc.t is not None else t, step=k,
                                last_record=last) from None
        except EstimatorDiverged as exc:
            err = EstimatorDiverged(f"{exc} (step {k}, t={t:g})")
            err.step, err.last_record = k, last
            raise err from None

    trace = SimTrace(cols)
    metrics = compute_metrics(trace, cfg)
    mon = lyapunov_monitor(trace["t"], trace["x1"] - trace["xhat1"], trace["x2"] - trace["xhat2"],
                           trace["s"],
                           cert["uub_radius"] if isinstance(cert.get("uub_radius"), float) else None,
                           POST_TRANSIENT_FRACTION)
    cert = dict(cert)
    cert["controller"] = ctrl
    cert["post_transient_sup_error_norm"] = mon.sup_post
    if mon.within_radius is not None:
        cert["post_transient_within_uub"] = mon.within_radius
    cert["max_weight_norm"] = float(np.max(trace["wnorm"]))
    return ScenarioResult(trace, metrics, cert)


def run_both(cfg: ScenarioConfig) -> dict[str, ScenarioResult]:
    return {c: run_scenario(cfg, controller=c) for c in ("smc", "pid")}


# ---------------------------------------------------------------- metrics

def _settling(t: np.ndarray, err: np.ndarray, t_ref: float, band: float) -> float:
    """Time after ``t_ref`` from which ``|err| <= band`` holds to the end.

    The entry crossing is located by linear interpolation between samples.
    """
    sel = t >= t_ref
    tt, ee = t[sel], np.abs(err[sel])
    if tt.size == 0 or ee[-1] > band:
        return math.inf
    outside = np.nonzero(ee > band)[0]
    if outside.size == 0:
        return 0.0
    i = outside[-1]
    frac = (ee[i] - band) / (ee[i] - ee[i + 1])
    return float(tt[i] + frac * (tt[i + 1] - tt[i]) - t_ref)


def compute_metrics(trace: Mapping[str, np.ndarray], cfg: ScenarioConfig | None = None,
                    events: list[float] | None = None, band: float = BAND) -> Metrics:
    """Performance numbers derived from a trace.

    Overshoot is taken over the whole trace; settling is measured from the
    last fault/reference event; occupancy and estimation errors use the final
    half of the run.
    """
    t = np.asarray(trace["t"], dtype=float)
    s = np.asarray(trace["s"], dtype=float)
    if events is None:
        events = cfg.events() if cfg is not None else []
    events = [e for e in events if t[0] <= e <= t[-1]]
    t_ref = max(events) if events else float(t[0])
    t_post = t[0] + (1.0 - POST_TRANSIENT_FRACTION) * (t[-1] - t[0])
    post = t >= t_post
    x2_err = np.abs(np.asarray(trace["x2"]) - np.asarray(trace["xhat2"]))[post]
    phi_err = np.abs(np.asarray(trace["phi_true"]) - np.asarray(trace["phi_hat"]))[post]
    u = np.asarray(trace["u_cmd"], dtype=float)
    return Metrics(
        overshoot=float(max(0.0, s.max())),
        settling_time=_settling(t, s, t_ref, band),
        band_occupancy=float(np.mean(np.abs(s[post]) <= band)),
        mean_phi_error=float(phi_err.mean()),
        mean_x2_error=float(x2_err.mean()),
        max_x2_error=float(x2_err.max()),
        spray_usage=float(np.sum(u[:-1] * np.diff(t))),
        settling_reference_time=float(t_ref),
        post_transient_start=float(t_post),
    )


# ---------------------------------------------------------------- valve logs

@dataclass
class ValveLog:
    records: list[ValveLogRecord]
    anomalies: Counter = field(default_factory=Counter)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]


def ingest_valve_log(path, cmd_floor: float = DEFAULT_CMD_FLOOR,
                     slack: float = DEFAULT_OVERDELIVERY_SLACK) -> ValveLog:
    """Parse a ``t_s,u_cmd,u_actual`` CSV into validated records.

    Anomalies counted: ``overdelivery``, ``below_cmd_floor`` and
    ``out_of_range`` (raw fraction outside [0, 1], clamped).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rd = csv.DictReader(fh)
        header = [h.strip() for h in (rd.fieldnames or [])]
        for col in LOG_COLUMNS:
            if col not in header:
                raise ConfigError(f"{path}: missing column {col}")
        rd.fieldnames = header
        records: list[ValveLogRecord] = []
        anomalies: Counter = Counter()
        prev_t = -math.inf
        for lineno, row in enumerate(rd, start=2):
            try:
                t, cmd, act = (float(row[c]) for c in LOG_COLUMNS)
            except (TypeError, ValueError):
                raise ConfigError(f"{path}: row {lineno}: unparsable values {row}") from None
            if t < prev_t:
                raise ConfigError(f"{path}: row {lineno}: time {t} decreases (previous {prev_t})")
            prev_t = t
            rec = ValveLogRecord.from_raw(t, cmd, act)
            if rec.out_of_range:
                anomalies["out_of_range"] += 1
            res = true_fault_from_log(rec, cmd_floor, slack)
            if res.anomaly:
                anomalies[res.anomaly] += 1
            records.append(rec)
    if anomalies:
        logger.warning("%s: %d records, anomalies %s", path, len(records), dict(anomalies))
    return ValveLog(records, anomalies)


def write_valve_log(path, records) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(LOG_COLUMNS) + "\n")
        for r in records:
            fh.write(f"{float(r.t)!r},{float(r.u_cmd)!r},{float(r.u_actual)!r}\n")


def replay_fault(records, cmd_floor: float = DEFAULT_CMD_FLOOR,
                 slack: float = DEFAULT_OVERDELIVERY_SLACK) -> FaultProfile:
    """Table fault profile through every usable record's phi.

    Skipped records are bridged by the table's linear interpolation and
    held at the nearest valid value at either end. With repeated
    timestamps the last usable record wins.
    """
    pts: dict[float, float] = {}
    for rec in records:
        res = true_fault_from_log(rec, cmd_floor, slack)
        if not res.skipped:
            pts[rec.t] = res.phi
    if not pts:
        raise ConfigError("log carries no usable command activity")
    if len(pts) == 1:
        return FaultProfile.constant(next(iter(pts.values())))
    times = sorted(pts)
    return FaultProfile.table(times, [pts[t] for t in times])


# ---------------------------------------------------------------- output

def output_root(default: str | Path) -> Path:
    env = os.environ.get("FTC_OUTPUT_DIR")
    return Path(env) if env else Path(default)


def write_outputs(result: ScenarioResult, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.trace.write_csv(out / "trace.csv")
    (out / "metrics.txt").write_text(format_report(result.metrics.to_dict()))
    (out / "certificate.txt").write_text(format_report(result.certificate))
    return out
