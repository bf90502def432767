"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class HysteresisError(Exception):
    """Base class for all package errors."""


class DegenerateLoop(HysteresisError, ValueError):
    """Parameters describe a loop whose flat dead-zone segments have negative width."""


class InvalidParams(HysteresisError, ValueError):
    """A parameter violates a basic bound (non-finite, omega <= 0, negative backlash)."""


class UnsetReference(HysteresisError):
    """A backlash branch was evaluated before its reversal anchor was set."""


class NonFiniteInput(HysteresisError, ValueError):
    pass


class OutOfWorkspace(HysteresisError, ValueError):
    pass


class InconsistentSeed(HysteresisError, ValueError):
    """The initial (input, output) pair is not close to any model branch."""


class Unreachable(HysteresisError, ValueError):
    """The desired output needs a command beyond the workspace bound."""


class OutOfDomain(HysteresisError, ValueError):
    pass


class NyquistViolation(HysteresisError, ValueError):
    pass


class NoPlateau(HysteresisError):
    pass


class NoReversal(HysteresisError):
    pass


class NoPeak(HysteresisError):
    pass


class InsufficientEngagedData(HysteresisError):
    pass


class MissingReference(HysteresisError):
    pass


class IncompleteGrid(HysteresisError, ValueError):
    pass


class TraceFormatError(HysteresisError, ValueError):
    pass


class CalibrationError(HysteresisError):
    """Wraps a sub-operation failure with the grid point it happened at."""

    def __init__(self, dof: int, other_angle: float, cause: Exception):
        self.dof = dof
        self.other_angle = other_angle
        self.cause = cause
        super().__init__(f"dof {dof + 1} at other-DOF angle {other_angle:g} deg: "
                         f"{type(cause).__name__}: {cause}")


class ConfigError(HysteresisError, ValueError):
    pass
