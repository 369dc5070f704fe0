"""
Checking observer gains and replaying a plant valve log
=======================================================

First the stability certificate for the standard scenario and a small gain
sweep, then a synthetic historian log turned into a fault profile.
"""

import tempfile
from pathlib import Path

import numpy as np

from hrsg_ftc import harness
from hrsg_ftc.faults import ValveLogRecord
from hrsg_ftc.stability import format_report

cfg = harness.standard_scenario()
cert = harness.certificate(cfg)
keys = ("gains_pass", "lambda1_threshold", "lambda1_margin", "lambda2_threshold",
        "lambda2_margin", "uub_radius")
print(format_report({k: cert[k] for k in keys}))

# lambda2 below its threshold breaks the certificate
for lam2 in (100.0, 150.0, 160.0, 400.0):
    c = harness.scenario_from_dict({**harness.standard_scenario_dict(),
                                    "observer": {"lambda1": 2.0, "lambda2": lam2,
                                                 "delta1": 0.5, "delta2": 1.0}})
    print(f"lambda2={lam2:5.0f}  pass={harness.certificate(c)['gains_pass']}")

# a log where the valve delivers 70 % of what is asked, with a shutdown blip
rows = [ValveLogRecord(float(t), 0.6, 0.42) for t in range(0, 60, 5)]
rows[4] = ValveLogRecord(20.0, 0.0, 0.15)
with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "valve.csv"
    harness.write_valve_log(path, rows)
    log = harness.ingest_valve_log(path)
    fault = harness.replay_fault(log.records)
print("anomalies:", dict(log.anomalies))
print("replayed phi at 0, 20, 55 s:", np.round([fault(0.0), fault(20.0), fault(55.0)], 4))
