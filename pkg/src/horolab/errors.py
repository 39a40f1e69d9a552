class HorolabError(Exception):
    """Base class for errors raised by this package."""


class DomainError(HorolabError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(HorolabError, ValueError):
    pass


class BallSizeError(HorolabError, RuntimeError):
    """Enumeration exceeded its element cap."""


class GroupConstructionError(HorolabError, RuntimeError):
    pass


class VerificationError(HorolabError, AssertionError):
    """A numerical certificate check failed; ``t`` is the offending sample, if any."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t
