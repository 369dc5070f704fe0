"""Command-line entry point: ``hrsg-ftc {run,replay,verify-gains,sweep}``.

Exit status is 0 on success, 1 on configuration errors (including bad
command-line usage) and 2 when a simulation aborts numerically.
"""

from __future__ import annotations

import argparse
import copy
import itertools
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from . import __version__
from .errors import ConfigError, EstimatorDiverged, NumericBlowup
from .harness import (ScenarioConfig, certificate, ingest_valve_log, load_scenario,
                      output_root, replay_fault, run_scenario, scenario_from_dict,
                      standard_scenario_dict, write_outputs)
from .stability import format_report

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2

logger = logging.getLogger("hrsg_ftc")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _run_one(cfg: ScenarioConfig, controller: str, out: Path) -> list[Path]:
    names = ("smc", "pid") if controller == "both" else (controller,)
    written = []
    for name in names:
        res = run_scenario(cfg, controller=name)
        target = out / name if controller == "both" else out
        written.append(write_outputs(res, target))
        m = res.metrics
        print(f"{name}: overshoot={m.overshoot:.4g} settling={m.settling_time:.4g} "
              f"occupancy={m.band_occupancy:.4g} -> {target}")
    return written


def _load(arg: str) -> ScenarioConfig:
    # "standard" names the bundled fixture unless a file of that name exists
    if arg == "standard" and not Path(arg).exists():
        return scenario_from_dict(standard_scenario_dict())
    return load_scenario(arg)


def _out_dir(cli_value: str | None, cfg: ScenarioConfig) -> Path:
    return output_root(cli_value or cfg.output_dir)


def cmd_run(args) -> int:
    cfg = _load(args.scenario)
    _run_one(cfg, args.controller or cfg.controller, _out_dir(args.out, cfg))
    return EXIT_OK


def cmd_replay(args) -> int:
    cfg = _load(args.scenario)
    log = ingest_valve_log(args.log)
    cfg.fault = replay_fault(log.records)
    print(f"replay: {len(log)} records, anomalies {dict(log.anomalies) or 'none'}")
    _run_one(cfg, args.controller or cfg.controller, _out_dir(args.out, cfg))
    return EXIT_OK


def cmd_verify_gains(args) -> int:
    cfg = _load(args.scenario)
    print(format_report(certificate(cfg)), end="")
    return EXIT_OK


def set_dotted(data: dict[str, Any], key: str, value: Any) -> None:
    """Assign ``data["a"]["b"] = value`` for ``key == "a.b"``."""
    parts = key.split(".")
    node = data
    for p in parts[:-1]:
        nxt = node.get(p)
        if not isinstance(nxt, dict):
            raise ConfigError(f"sweep field {key!r}: {p!r} is not a section")
        node = nxt
    node[parts[-1]] = value


def sweep_points(spec: dict[str, Any]) -> list[dict[str, Any]]:
    grid = spec.get("grid")
    if not isinstance(grid, dict) or not grid:
        raise ConfigError("sweep needs a non-empty 'grid' mapping of field -> values")
    keys = list(grid)
    for k in keys:
        if not isinstance(grid[k], list) or not grid[k]:
            raise ConfigError(f"sweep field {k!r} needs a non-empty list of values")
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def _sweep_worker(job: tuple[dict, str | None, dict, str, str]) -> tuple[str, int, str]:
    base, base_dir, point, controller, out = job
    data = copy.deepcopy(base)
    try:
        for k, v in point.items():
            set_dotted(data, k, v)
        cfg = scenario_from_dict(data, Path(base_dir) if base_dir else None)
        _run_one(cfg, controller or cfg.controller, Path(out))
    except ConfigError as exc:
        return out, EXIT_CONFIG, str(exc)
    except (NumericBlowup, EstimatorDiverged) as exc:
        return out, EXIT_NUMERIC, str(exc)
    return out, EXIT_OK, ""


def cmd_sweep(args) -> int:
    path = Path(args.sweep)
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    base = spec.get("scenario")
    base_dir = path.parent
    if isinstance(base, str):
        scen_path = (path.parent / base) if not Path(base).is_absolute() else Path(base)
        base = json.loads(scen_path.read_text())
        base_dir = scen_path.parent
    if not isinstance(base, dict):
        raise ConfigError("sweep needs 'scenario' as a path or an inline scenario object")
    points = sweep_points(spec)
    root = output_root(args.out or spec.get("output_dir", "sweep_out"))
    jobs = []
    for i, point in enumerate(points):
        out = root / f"point_{i:03d}"
        out.mkdir(parents=True, exist_ok=True)
        (out / "point.json").write_text(json.dumps(point, indent=2) + "\n")
        jobs.append((base, str(base_dir), point, args.controller, str(out)))
    workers = args.workers or min(len(jobs), 8)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_worker, jobs))
    else:
        results = [_sweep_worker(j) for j in jobs]
    status = EXIT_OK
    for out, code, msg in results:
        if code:
            print(f"{out}: failed ({msg})", file=sys.stderr)
            status = max(status, code)
    print(f"sweep: {len(results)} points under {root}")
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="hrsg-ftc", description="Fault-tolerant attemperator control simulator.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log at INFO level")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ctrl = dict(choices=("smc", "pid", "both"), default=None,
                help="override the scenario's controller choice")
    out = dict(default=None, help="output directory (FTC_OUTPUT_DIR takes precedence)")

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("scenario")
    p.add_argument("--controller", **ctrl)
    p.add_argument("--out", **out)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="simulate with the fault replayed from a valve log")
    p.add_argument("--log", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--controller", **ctrl)
    p.add_argument("--out", **out)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("verify-gains", help="print the stability certificate")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_verify_gains)

    p = sub.add_parser("sweep", help="grid of scenario variants, one directory per point")
    p.add_argument("sweep")
    p.add_argument("--controller", **ctrl)
    p.add_argument("--out", **out)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericBlowup, EstimatorDiverged) as exc:
        print(f"numeric abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
