"""Exception types shared across the package."""


class ModeshapeParseError(ValueError):
    """A gridded-modeshape file could not be read."""

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")


class FitError(RuntimeError):
    """A fit failed to converge or hit a model misfit; carries the best-so-far report."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NegativeImprecisionError(FitError):
    """Fitted noise floor lies below the measured detector floor."""


class ConfigError(ValueError):
    """Invalid experiment configuration; `field` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
