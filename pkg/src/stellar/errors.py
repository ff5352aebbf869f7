"""Exception hierarchy for the stellar toolkit."""


class StellarError(Exception):
    """Base class for all errors raised by this package."""


class ZeroVector(StellarError, ValueError):
    """Raised when an amplitude vector has no significant component."""


class CutoffTooSmall(StellarError):
    """Raised when a Fock truncation cannot reach the requested accuracy."""


class AnnihilatedToZero(StellarError):
    """Raised when photon subtraction maps a state to the zero vector."""


class RankZero(StellarError, ValueError):
    """Raised when an operation needs a non-Gaussian (rank >= 1) input."""


class NotConverged(StellarError):
    """Raised when no optimizer restart satisfied the convergence tolerance."""


class BadArguments(StellarError, ValueError):
    """Raised for arguments that violate an operation's preconditions."""


class OracleMismatch(StellarError, AssertionError):
    """Raised when the stellar-picture and matrix-oracle routes disagree."""


class StateFileError(StellarError, ValueError):
    """Raised when a state file cannot be parsed or validated."""
