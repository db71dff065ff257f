"""
exception hierarchy shared by the library and the cli
"""

from src.config.settings import (
    EXIT_DATA_ERROR, EXIT_SOLVER_ERROR, EXIT_USAGE,
)


class DpOpfError(Exception):
    """root of every error raised by this package"""

    exit_code = EXIT_SOLVER_ERROR


class ConfigError(DpOpfError, ValueError):
    """invalid parameters or flags"""

    exit_code = EXIT_USAGE


class DataError(DpOpfError):
    """bad input data; carries the location of the offending item"""

    exit_code = EXIT_DATA_ERROR

    def __init__(self, message, location=None):
        self.location = location
        if location:
            message = f"{location}: {message}"
        super().__init__(message)


class CaseSchemaError(DataError):
    """case json has a missing field or a field of the wrong type"""


class CaseValidationError(DataError):
    """case is well formed but violates a network invariant"""


class MatpowerFormatError(DataError):
    """malformed matpower text"""


class UnsupportedCostModelError(DataError):
    """gencost row uses a model other than polynomial"""


class PartitionError(DataError):
    """zone partition does not fit the case"""


class SolverError(DpOpfError):
    """an optimization step could not produce a usable optimum"""

    exit_code = EXIT_SOLVER_ERROR


class InfeasibleProblemError(SolverError):
    """no dispatch satisfies the network constraints"""


class SubproblemAssemblyError(SolverError):
    """a zone sub-problem cannot be assembled (ungrounded angles)"""


class SubproblemInfeasibleError(SolverError):
    """a zone sub-problem has no feasible point"""


class LocalSensitivityError(SolverError):
    """local sensitivity needs a feasible base sub-problem"""
