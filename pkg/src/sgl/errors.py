"""Exception types shared across the pipeline."""


class DataError(ValueError):
    """Malformed, missing or inconsistent input data."""


class NumericalError(ArithmeticError):
    """A numerical routine failed (singular system, non-finite result)."""


class StageError(RuntimeError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
