"""Exception hierarchy shared by every module."""


class FwdimError(Exception):
    """Base class for all package errors."""


class ValidationError(FwdimError, ValueError):
    """An argument or configuration violates a documented precondition."""


class ConfigError(ValidationError):
    """A run configuration failed to parse or validate.

    ``field`` names the offending dotted config key when known.
    """

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class NumericalError(FwdimError, ArithmeticError):
    """A computation produced an unusable result (NaN, empty support, ...)."""


class BandwidthStarvation(NumericalError):
    """Every kernel weight underflowed to zero at a query point."""

    def __init__(self, query: float, bandwidth: float):
        self.query = query
        self.bandwidth = bandwidth
        super().__init__(
            f"bandwidth starvation at query x={query!r}: all kernel weights are zero "
            f"for h={bandwidth!r}"
        )


class TrainingDiverged(NumericalError):
    """Network training hit a non-finite loss."""

    def __init__(self, epoch: int, last_finite_epoch: int | None, last_finite_mse: float | None):
        self.epoch = epoch
        self.last_finite_epoch = last_finite_epoch
        self.last_finite_mse = last_finite_mse
        super().__init__(
            f"training diverged at epoch {epoch}; last finite epoch "
            f"{last_finite_epoch} (mse={last_finite_mse})"
        )
