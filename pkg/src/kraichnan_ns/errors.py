"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid grid, parameter or configuration input."""


class UnsupportedModeError(ConfigurationError):
    """A requested combination the model cannot represent (e.g. Stratonovich
    conversion for time-dependent transport fields)."""
