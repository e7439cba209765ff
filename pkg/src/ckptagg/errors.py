"""Exception types raised across the package."""


class PlanError(ValueError):
    """A plan cannot be built or is inconsistent with its inputs."""


class ConfigurationTooLarge(OverflowError):
    """Byte arithmetic would leave the signed 64-bit counter range."""


class ConfigError(ValueError):
    """Experiment configuration is malformed."""


class ExecutionError(RuntimeError):
    """Real-file execution failed (missing local file, short write, ...)."""
