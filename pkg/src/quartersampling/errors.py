"""Exception types shared across the package."""


class FormatError(ValueError):
    """A file does not follow the expected PGM layout."""


class DimensionError(ValueError):
    """Frames, masks or fields with incompatible sizes were combined."""


class ConfigError(ValueError):
    """Invalid or unknown configuration value."""
