"""Exception and warning types shared across the package."""


class ParameterError(ValueError):
    """A physical or numerical parameter violates an operation's precondition."""


class SingularityError(ParameterError):
    """A closed-form expression is evaluated at its pole."""


class NumericalError(RuntimeError):
    """A numerical procedure failed to produce a trustworthy result."""


class ConvergenceError(NumericalError):
    """Results changed too much under grid refinement."""


class AccuracyError(NumericalError):
    """An integral's estimated error exceeds the requested tolerance."""


class ConfigurationWarning(UserWarning):
    """The requested configuration is valid but physically questionable."""
