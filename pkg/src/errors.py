"""
Error hierarchy shared by the library and the command line
"""
from typing import Iterable, Optional

import numpy as np


class Measure2ShapeError(Exception):
    """Base error; every subclass has a stable code and a process exit code"""

    code = "E_GENERIC"
    exit_code = 1


class InputFormatError(Measure2ShapeError, ValueError):
    """Malformed files, invalid indices or mismatched dimensions"""

    code = "E_INPUT"
    exit_code = 2


class TopologyMismatchError(InputFormatError):
    """Meshes that should share one vertex/triangle topology do not"""

    code = "E_TOPOLOGY"

    def __init__(self, message: str, offenders: Optional[Iterable[str]] = None):
        self.offenders = list(offenders or [])
        if self.offenders:
            message = f"{message}: {', '.join(self.offenders)}"
        super().__init__(message)


class DegenerateGeometryError(Measure2ShapeError):
    code = "E_DEGENERATE"
    exit_code = 3


class UnreachableError(Measure2ShapeError):
    code = "E_UNREACHABLE"
    exit_code = 3


class SolverFailure(Measure2ShapeError):
    """Raised when the objective turns non-finite; keeps the last good iterate"""

    code = "E_SOLVER"
    exit_code = 3

    def __init__(self, message: str, last_iterate: Optional[np.ndarray] = None,
                 last_energy: Optional[float] = None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.last_energy = last_energy


class MeasurementUndefinedError(Measure2ShapeError):
    """A measurement cannot be evaluated on the current mesh"""

    code = "E_MEASUREMENT_UNDEFINED"
    exit_code = 4

    def __init__(self, spec_name: str, reason: str):
        self.spec_name = spec_name
        self.reason = reason
        super().__init__(f"measurement '{spec_name}' is undefined: {reason}")
