"""Exception hierarchy shared across the package."""


class SpmuxError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(SpmuxError, ValueError):
    """A numeric argument is outside its admissible range."""


class ConfigurationError(SpmuxError, ValueError):
    """A system configuration is structurally inconsistent."""


class ScenarioError(SpmuxError, ValueError):
    """A scenario file failed to parse or validate.

    ``field`` holds the dotted path of the offending entry when known,
    ``line`` the source line for parse errors.
    """

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


class UndefinedEstimateError(SpmuxError, ArithmeticError):
    """An estimator denominator is zero (e.g. no accidentals recorded)."""


class NoSolutionError(SpmuxError, RuntimeError):
    """A requested operating point cannot be reached by the model."""


class FitError(SpmuxError, RuntimeError):
    """A fit problem is ill-posed (degenerate or insufficient data)."""
