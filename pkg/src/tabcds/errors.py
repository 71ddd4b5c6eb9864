"""Exception hierarchy shared by every tabcds subpackage."""

from typing import Optional


class TabCdsError(Exception):
    """Base class for all library faults."""


class MdpValidationError(TabCdsError, ValueError):
    """An MDP or policy table is structurally invalid."""


class ConvergenceError(TabCdsError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class EmptyDatasetError(TabCdsError, ValueError):
    pass


class SupportError(TabCdsError, ValueError):
    """A divergence was requested where q(x) = 0 but p(x) > 0."""


class EnvironmentSpecError(TabCdsError, ValueError):
    pass


class GoalUnreachableError(EnvironmentSpecError):
    pass


class BehaviorTargetError(TabCdsError, RuntimeError):
    """The behavior learner did not reach its return target within the episode cap."""


class DatasetSizeError(TabCdsError, ValueError):
    pass


class DatasetFormatError(TabCdsError, ValueError):
    pass


class LearnerDivergenceError(TabCdsError, RuntimeError):
    """A Q table left the admissible value range."""


class PreconditionError(TabCdsError, ValueError):
    pass


class MissingArtifactError(TabCdsError, FileNotFoundError):
    pass


class ConfigError(TabCdsError, ValueError):
    """Invalid experiment configuration. ``field`` names the offending entry."""

    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        if field:
            message = f"{field}: {message}"
        super().__init__(message)


__all__ = [
    'TabCdsError', 'MdpValidationError', 'ConvergenceError', 'EmptyDatasetError',
    'SupportError', 'EnvironmentSpecError', 'GoalUnreachableError',
    'BehaviorTargetError', 'DatasetSizeError', 'DatasetFormatError',
    'LearnerDivergenceError', 'PreconditionError', 'MissingArtifactError',
    'ConfigError',
]
