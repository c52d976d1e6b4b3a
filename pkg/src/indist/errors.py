class IndistError(Exception):
    """Base class for errors raised by this package."""


class DataError(IndistError, ValueError):
    """Input data is missing, malformed, or out of range."""


class ConfigError(IndistError, ValueError):
    """A run configuration or scoring table is invalid."""


class NumericalError(IndistError, RuntimeError):
    """A numerical stage failed (no defined bootstrap replicates, non-convergence under strict mode)."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
