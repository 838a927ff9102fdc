"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class NumericalFailure(ArithmeticError):
    """A numerical routine did not reach its accuracy target.

    ``achieved_error`` carries the best error estimate obtained and
    ``context`` any identifying information (e.g. the coordinate index).
    """

    def __init__(self, message, achieved_error=float("nan"), context=None):
        super().__init__(message)
        self.achieved_error = achieved_error
        self.context = dict(context or {})

    def with_context(self, **extra):
        err = NumericalFailure(str(self), self.achieved_error, {**self.context, **extra})
        return err

    def __str__(self):
        base = super().__str__()
        if self.context:
            ctx = ", ".join(f"{k}={v}" for k, v in self.context.items())
            return f"{base} ({ctx})"
        return base


class ConfigError(ValueError):
    """Invalid experiment configuration. ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path
