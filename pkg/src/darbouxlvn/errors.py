"""Exception hierarchy shared by all modules."""


class DarbouxError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(DarbouxError, ValueError):
    pass


class NotHermitianError(DarbouxError, ValueError):
    pass


class ConvergenceError(DarbouxError, RuntimeError):
    pass


class DefectiveMatrixError(DarbouxError, ValueError):
    """The matrix has no complete set of eigenvectors."""


class TrivialTransformationError(DarbouxError, ValueError):
    """mu is real on the Hermitian branch, so the transformation does nothing."""


class DegenerateSeedError(DarbouxError, ValueError):
    """The seed vector or the p-restricted block is numerically singular."""


class PoleError(DarbouxError, ValueError):
    """The spectral parameter hits the pole of the dressing factor."""


class SeedError(DarbouxError, ValueError):
    """No usable eigenspace for the requested selection rule."""


class ScenarioValidationError(DarbouxError, ValueError):
    """One or more named validation rules failed.

    ``failures`` holds one human readable message per violated rule.
    """

    def __init__(self, failures):
        self.failures = list(failures)
        super().__init__("; ".join(self.failures))


class ScenarioParseError(DarbouxError, ValueError):
    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{where}")


class StepSizeError(DarbouxError, RuntimeError):
    """The integrator could not meet its local error budget."""
