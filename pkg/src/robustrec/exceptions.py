class RobustRecError(Exception):
    """Base class for errors raised by robustrec."""


class DataError(RobustRecError, ValueError):
    """Malformed or invalid rating data."""


class TrainingError(RobustRecError, RuntimeError):
    """Matrix factorization training failed (e.g. diverged)."""


class SolverError(RobustRecError, ValueError):
    """A problem instance cannot be solved as requested."""
