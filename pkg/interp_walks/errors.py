"""
Error hierarchy with stable machine-readable codes.

Every error raised by the package derives from WalkError and carries a
``code`` string plus the process ``exit_code`` the experiment runner uses.
"""

from typing import Any, Dict


class WalkError(Exception):
    """Base class for all simulator errors."""

    code = "WalkError"
    exit_code = 1

    def __init__(self, message: str = "", **details: Any):
        super().__init__(message or self.code)
        self.message = message or self.code
        self.details = details

    def to_record(self) -> Dict[str, Any]:
        """Machine-readable error record."""
        record: Dict[str, Any] = {
            "error": self.code,
            "message": self.message,
            "exit_code": self.exit_code,
        }
        record.update(self.details)
        return record


# Invalid input (exit 2)

class SpecError(WalkError):
    code = "InvalidSpec"
    exit_code = 2


class BadSpec(SpecError):
    code = "BadSpec"


class NonStochastic(SpecError):
    code = "NonStochastic"


class NotErgodic(SpecError):
    code = "NotErgodic"


class NotReversible(SpecError):
    code = "NotReversible"


class EmptyMarkedSet(SpecError):
    code = "EmptyMarkedSet"


class AllMarked(SpecError):
    code = "AllMarked"


class SOutOfRange(SpecError):
    code = "SOutOfRange"


class QOutOfRange(SpecError):
    code = "QOutOfRange"


class NonStochasticQ(SpecError):
    code = "NonStochasticQ"


class DimensionMismatch(SpecError):
    code = "DimensionMismatch"


class StepIndexOutOfRange(SpecError):
    code = "StepIndexOutOfRange"


# Infeasible schedule (exit 3)

class ScheduleError(WalkError):
    code = "ScheduleError"
    exit_code = 3


class ROutOfRange(ScheduleError):
    code = "ROutOfRange"


class ScheduleInfeasible(ScheduleError):
    code = "ScheduleInfeasible"


# Memory cap (exit 4)

class MemoryCapError(WalkError):
    code = "MemoryCap"
    exit_code = 4


class AncillaTooLarge(MemoryCapError):
    code = "AncillaTooLarge"


class DimensionCap(MemoryCapError):
    code = "DimensionCap"


# Numerical failure (exit 5)

class NumericalError(WalkError):
    code = "NumericalFailure"
    exit_code = 5


class DegenerateUnmarkedBlock(NumericalError):
    code = "DegenerateUnmarkedBlock"


class DegenerateEigenvalue(NumericalError):
    code = "DegenerateEigenvalue"


class NumericalBreakdown(NumericalError):
    code = "NumericalBreakdown"


class SingularSystem(NumericalError):
    code = "SingularSystem"
