"""Exception types raised across the toolkit."""


class ConfigError(ValueError):
    """Invalid parameters or scenario configuration."""


class NumericBlowup(ArithmeticError):
    """A state or derivative became non-finite."""

    def __init__(self, message: str = "numeric blowup", t: float | None = None,
                 step: int | None = None, last_record: dict | None = None):
        if t is not None:
            message = f"{message} at t={t:g}"
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
        self.t = t
        self.step = step
        self.last_record = last_record


class EstimatorDiverged(ArithmeticError):
    """Fault estimator weights or gradients became non-finite or exceeded the cap."""


class InsufficientData(ValueError):
    """Training window holds too few samples."""
