"""Fault-tolerant steam temperature control for an HRSG attemperator.

Plant model with multiplicative spray-valve fault, sliding-mode observer,
online physics-informed fault estimator, one-sided sliding-mode and PID
controllers, stability certificates and a scenario harness.
"""

__version__ = "0.1.0"
