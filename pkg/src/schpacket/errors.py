"""Exception hierarchy.

Input problems derive from ``ValueError``; failures that only show up while
a computation runs derive from :class:`NumericalError` so the CLI can map
them to distinct exit codes.
"""


class NumericalError(RuntimeError):
    """A computation left its domain of validity."""


class WidthCollapseError(NumericalError):
    pass


class PotentialEvaluationError(NumericalError):
    pass


class IntegrationError(NumericalError):
    pass


class ActionInconsistencyError(NumericalError):
    pass


class NullFieldError(NumericalError):
    pass


class QuadratureError(NumericalError):
    pass


class UnstableStepError(NumericalError):
    pass


class CausalityLimitError(ValueError):
    pass


class GridMismatchError(ValueError):
    pass


class ConfigError(ValueError):
    pass
