"""
Error types for frameguard.
Hypothesis failures and soundness verdicts are certificate content, not errors.
"""


class FrameGuardError(Exception):
    """Base class for every frameguard error."""


class DimensionMismatch(FrameGuardError, ValueError):
    """A vector or matrix does not fit the space it is applied to."""


class InvalidGrade(FrameGuardError, ValueError):
    """Grade index outside [0, S_max]."""


class InvalidWeights(FrameGuardError, ValueError):
    """Weight ladder is malformed or has entries below the floor."""


class GradingViolation(FrameGuardError, ValueError):
    """Weight ladder is not monotone in the grade.

    ``grade`` is the grade whose weight drops below the previous grade and
    ``index`` the 1-based coordinate where it happens.
    """

    def __init__(self, grade: int, index: int):
        self.grade = grade
        self.index = index
        super().__init__(
            f"GradingViolation({grade}, {index}): weight at grade {grade}, "
            f"coordinate {index} is smaller than at grade {grade - 1}"
        )


class FrameDeficient(FrameGuardError):
    """Analysis matrix has rank below the signal dimension."""


class ExpansionFailure(FrameGuardError):
    """A dual family does not reproduce f = sum g_i(f) f_i."""


class ZeroSample(FrameGuardError, ValueError):
    """Norming functionals need nonzero sample vectors."""


class NotLeftInverse(FrameGuardError, ValueError):
    """Supplied reconstruction operator is not a left inverse of G."""


class InvalidEnvelope(FrameGuardError, ValueError):
    """Weight envelope alpha/beta is not positive and bounded."""


class ZeroDenominator(FrameGuardError, ValueError):
    """Grid ratio denominator vanished on a sphere point."""


class InvalidSpec(FrameGuardError, ValueError):
    """Generator spec cannot produce the requested object."""


class ConfigError(FrameGuardError):
    """Scenario configuration could not be read or parsed."""


class RankDeficient(FrameDeficient):
    """Hilbert frame synthesis matrix has rank below n."""
