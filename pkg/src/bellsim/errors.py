class ResourceLimitError(RuntimeError):
    """A computation would exceed the configured state-count ceiling."""


class ConfigError(ValueError):
    """Invalid run configuration."""
