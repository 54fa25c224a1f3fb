"""Exception hierarchy.

Every exception carries an ``exit_code`` so the command line front end can
map failures onto its exit-status taxonomy without inspecting messages:
2 for configuration mistakes, 3 for numerical failures and 4 when the loop
does not produce a usable orientation calibration.
"""

from __future__ import annotations


class NHCollapseError(Exception):
    exit_code = 1


# -- configuration ---------------------------------------------------------


class ConfigError(NHCollapseError):
    exit_code = 2


class MissingConfigError(ConfigError):
    pass


class MalformedConfigError(ConfigError):
    pass


class UnknownKeyError(ConfigError):
    def __init__(self, key: str, suggestion: str | None = None):
        self.key = key
        self.suggestion = suggestion
        msg = f"unknown key {key!r}"
        if suggestion:
            msg += f" (did you mean {suggestion!r}?)"
        super().__init__(msg)


class RangeError(ConfigError, ValueError):
    """A field violates its invariant; ``field`` is the dotted config path."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


# -- numerics --------------------------------------------------------------


class NumericalError(NHCollapseError):
    exit_code = 3


class DomainError(NumericalError, ValueError):
    pass


class SolverFailure(NumericalError):
    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class RootFindFailure(NumericalError):
    def __init__(self, message: str, last_iterate: complex):
        self.last_iterate = last_iterate
        super().__init__(f"{message} (last iterate {last_iterate})")


class RefinementNeeded(NumericalError):
    def __init__(self, segment: int, message: str = "ambiguous sheet matching"):
        self.segment = segment
        super().__init__(f"{message} on segment {segment} -> {segment + 1}; refine the path")


class IntegrationOverflow(NumericalError, OverflowError):
    def __init__(self, time: float):
        self.time = time
        super().__init__(
            f"non-finite amplitudes at t={time:.6g}; enable renormalization or reduce dt"
        )


class StepRefinementFailure(NumericalError):
    pass


class DegenerateStateError(NumericalError, ValueError):
    pass


class IllConditionedBasis(NumericalError):
    def __init__(self, overlap: float):
        self.overlap = overlap
        super().__init__(f"eigenbasis is nearly defective (overlap {overlap:.12f})")


class ContractViolation(NHCollapseError, ValueError):
    exit_code = 3


# -- physics ---------------------------------------------------------------


class CalibrationFailure(NHCollapseError):
    """The loop does not convert both starts to one state per orientation.

    ``dominances`` maps ``(orientation, start_index)`` to ``(outcome, dominance)``
    for every run that completed.
    """

    exit_code = 4

    def __init__(self, message: str, dominances: dict | None = None):
        self.dominances = dict(dominances or {})
        super().__init__(message)
