"""Exception hierarchy shared by all dioph modules."""


class DiophError(Exception):
    """Base class for every error raised by this package."""


class ExprSyntaxError(DiophError, ValueError):
    """Text does not match the real-number input grammar."""


class DomainError(DiophError, ValueError):
    """Well-formed input outside the mathematical domain (e.g. zero denominator)."""


class PrecisionBudgetExceeded(DiophError):
    """Precision refinement hit its retry cap before a decision could be certified."""


class DegeneratePair(DiophError):
    """Some scanned integer point has an exactly vanishing approximation error."""


class FormatError(DiophError, ValueError):
    """A persisted file violates its schema or invariants."""


class InsufficientData(DiophError):
    """Not enough points / change points to form the requested tail statistic."""


class RegimeMismatch(DiophError):
    """An estimator was applied outside the regime where its identity holds."""


class OutOfDomain(DiophError, ValueError):
    """Evaluation abscissa outside the represented domain."""


class AlphaTooLarge(InsufficientData):
    """Filter level alpha is at or above the finite-horizon upper exponent."""


class RegionError(DiophError, ValueError):
    """Target lies outside the region handled by the requested construction."""


class SpectrumError(DiophError, ValueError):
    """Target pair violates the joint spectrum inequalities."""


class RangeError(DiophError, ValueError):
    """Query lies beyond the range certified by the available data."""


class QTooLarge(DiophError, ValueError):
    """Parameter q beyond the desk-scale enumeration cap."""
