"""Error hierarchy; each error carries the CLI exit code it maps to"""


class EcgBenchError(Exception):
    """Base class for every error raised by the package"""
    exit_code = 3


class UsageError(EcgBenchError):
    """Invalid command-line usage or run configuration"""
    exit_code = 1


class DataError(EcgBenchError, ValueError):
    """Malformed or unusable input data (CSV rows, labels, class sizes)"""
    exit_code = 2


class ShapeError(EcgBenchError, ValueError):
    """Tensor or layer dimensions that do not line up"""
    exit_code = 3


class EnumerationLimitError(EcgBenchError, ValueError):
    """Exhaustive enumeration requested on an instance that is too large"""
    exit_code = 3


class NumericError(EcgBenchError, ArithmeticError):
    """Non-finite values produced during computation"""
    exit_code = 3


class TrainingDivergedError(NumericError):
    """Training produced a non-finite loss"""

    def __init__(self, epoch: int, batch: int, loss: float):
        self.epoch = epoch
        self.batch = batch
        self.loss = loss
        super().__init__(
            f"Training diverged at epoch {epoch}, batch {batch}: loss={loss}"
        )
