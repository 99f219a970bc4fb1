"""Exception categories that map onto distinct CLI exit codes."""


class UdaForgeError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(UdaForgeError):
    """Invalid or inconsistent experiment configuration."""


class DataError(UdaForgeError):
    """Missing, malformed, or inconsistent dataset content."""


class NumericAbort(UdaForgeError):
    """Training aborted on a non-finite loss component."""

    def __init__(self, component: str, step: int):
        self.component = component
        self.step = step
        super().__init__(f"non-finite loss component '{component}' at step {step}")
