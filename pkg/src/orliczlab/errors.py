"""Exception hierarchy shared by all modules."""


class OrliczLabError(Exception):
    """Base class for every error raised by the package."""


class DomainError(OrliczLabError, ValueError):
    """An argument lies outside the domain of the operation (e.g. t < 0)."""


class DegenerateFunctionError(OrliczLabError, ValueError):
    pass


class ConfigurationError(OrliczLabError, ValueError):
    pass


class UnsupportedConfigurationError(ConfigurationError):
    pass


class PreconditionError(OrliczLabError, ValueError):
    pass


class ResolutionError(OrliczLabError, ValueError):
    """A discrete ball or level set holds too few nodes to be meaningful."""


class StructureConditionError(OrliczLabError, ValueError):
    """A kernel or structure function violates its two-sided bounds."""

    def __init__(self, message, sample=None):
        super().__init__(message)
        self.sample = sample


class GrowthConditionError(OrliczLabError, ValueError):
    pass


class NumericError(OrliczLabError, ArithmeticError):
    """An iterative method failed; ``diagnostics`` carries whatever was computed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics if diagnostics is not None else {}
