"""Error hierarchy with CLI exit-code classes.

Every error raised by the library derives from :class:`YamabeError` and carries
an ``exit_code`` attribute used by the command-line driver, plus a short
machine-readable ``kind`` tag.
"""

from __future__ import annotations


class YamabeError(Exception):
    """Base class for all library errors."""

    exit_code = 4
    kind = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.details = details

    def to_dict(self) -> dict:
        out = {"error": self.kind, "message": str(self), "exit_code": self.exit_code}
        if self.details:
            out["details"] = {k: _plain(v) for k, v in self.details.items()}
        return out


def _plain(value):
    try:
        import numpy as np

        if isinstance(value, np.generic):
            return value.item()
    except ImportError:  # pragma: no cover
        pass
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


# validation (exit 2)
class ValidationError(YamabeError, ValueError):
    exit_code = 2
    kind = "validation"


class InvalidDimensionError(ValidationError):
    kind = "invalid-dimension"


class InvalidParameterError(ValidationError):
    kind = "invalid"


class NotPeriodicOrbitError(ValidationError):
    kind = "not-a-periodic-orbit"


class UnsupportedDimensionError(ValidationError):
    kind = "unsupported-dimension-for-fields"


# admissibility (exit 3)
class AdmissibilityError(YamabeError):
    exit_code = 3
    kind = "admissibility"


class IndexConflictError(AdmissibilityError):
    kind = "index-conflict"


class OutOfRangeError(AdmissibilityError):
    kind = "out-of-range"


# solver failures (exit 4)
class SolverError(YamabeError, ArithmeticError):
    exit_code = 4
    kind = "solver"


class IntegrationError(SolverError):
    kind = "integration-failure"


class DegreeOverflowError(SolverError):
    kind = "degree-overflow"


class OscillatoryModeError(SolverError):
    kind = "oscillatory-mode"


class EllipticModeError(SolverError):
    kind = "unexpected-elliptic-mode"


class WrongBranchError(SolverError):
    kind = "wrong-branch"


class TailTruncationError(SolverError):
    kind = "tail-truncation-error"


class DiscretizationError(SolverError):
    kind = "discretization-failure"


class ExtendTruncationError(SolverError):
    kind = "extend-truncation"


class InductionViolationError(SolverError):
    kind = "induction-violation"


class SeedTooLargeError(SolverError):
    kind = "seed-too-large"


class PositivityViolationError(SolverError):
    kind = "positivity-violation"


class BallEscapeError(SolverError):
    kind = "ball-escape"


class NoContractionError(SolverError):
    kind = "no-contraction"


# I/O (exit 5)
class OutputError(YamabeError, OSError):
    exit_code = 5
    kind = "io"
