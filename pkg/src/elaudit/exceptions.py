"""Exception types shared across the package."""


class AuditError(Exception):
    """Base class for every error this package raises deliberately."""


class DatasetError(AuditError):
    """Malformed audit dataset: ragged rows, missing values, bad columns."""


class EmptyGroupError(AuditError):
    """A group predicate matched no rows."""

    def __init__(self, group_id: str):
        self.group_id = group_id
        super().__init__(f"group {group_id!r} matched no rows of the dataset")


class DegenerateVarianceError(AuditError):
    """All in-group scores are identical, so the requested statistic is undefined."""

    def __init__(self, group_id: str, constant: float):
        self.group_id = group_id
        self.constant = constant
        super().__init__(
            f"group {group_id!r} has constant score {constant!r}; the statistic "
            "is undefined away from that value"
        )


class SingularCovarianceError(AuditError):
    """The estimating-function covariance is numerically singular."""


class NoConvergenceError(AuditError):
    """An iterative solver hit its iteration cap without converging."""


class BracketFailureError(AuditError):
    """Interval inversion could not bracket the target statistic level."""


class InvalidIntervalError(AuditError, ValueError):
    """Interval hypothesis endpoints are not strictly ordered."""


class ResampleCapError(AuditError):
    """Too many bootstrap resamples left a group empty and were redrawn."""


class ConfigError(AuditError):
    """Invalid or inconsistent run configuration."""
