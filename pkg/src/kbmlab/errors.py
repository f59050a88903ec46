"""Exception types raised by kbmlab."""


class KbmError(Exception):
    """Base class for all kbmlab errors."""


class NonFiniteError(KbmError, ValueError):
    """A matrix handed to the linear-algebra layer contains inf or nan."""


class TruncationError(KbmError):
    """Vertical truncation did not converge below the configured ceiling.

    ``report`` holds the partial :class:`~kbmlab.linalg.TruncationReport`
    and ``mode`` (when known) the horizontal mode that failed.
    """

    def __init__(self, msg, report=None, mode=None):
        super().__init__(msg)
        self.report = report
        self.mode = mode


class SingularBlockError(KbmError):
    """A block that must be inverted is numerically singular."""


class WindingError(KbmError):
    """Argument-principle count failed (zero on the contour or no convergence)."""


class ConvergenceError(KbmError):
    """An iterative root finder or quadrature did not converge."""


class TailError(KbmError):
    """A supremum over horizontal modes is not controlled by the swept ball.

    Raised when the largest shells still carry a sizeable fraction of the
    supremum; the caller should enlarge ``K_max``.
    """


class AccretivityError(KbmError):
    """An eigenvalue was found strictly left of the imaginary axis."""


class SpectrumError(KbmError):
    """Eigenvalue bookkeeping is inconsistent (e.g. no zero eigenvalue)."""
