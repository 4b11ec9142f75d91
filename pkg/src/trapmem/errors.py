"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid configuration value.

    ``field`` names the offending parameter so the CLI can report it.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnphysicalTrapError(ConfigError):
    pass


class ResourceError(ConfigError):
    pass


class FormatError(ValueError):
    """Malformed delimited input. ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UndefinedEstimateError(ValueError):
    def __init__(self, message, counts):
        self.counts = dict(counts)
        super().__init__(f"{message} (counts: {self.counts})")


class UnsupportedInputError(ValueError):
    pass


class FitPreconditionError(ValueError):
    pass


class SingularFitError(RuntimeError):
    pass


class DeconvolutionError(ValueError):
    pass
