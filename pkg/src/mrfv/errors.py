"""Package-level exception types."""


class Error(Exception):
    """Base class for errors raised by this package."""


class ConfigError(Error):
    """Invalid or inconsistent run configuration."""


class GradingError(Error):
    """A forest operation hit a cell arrangement the grading rules forbid."""


class SolverError(Error):
    """A linear solve could not be carried out as requested."""
