"""Exception types shared across the package."""


class HcfqkdError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(HcfqkdError, ValueError):
    """A physical parameter is outside its allowed domain."""


class OnResonanceError(HcfqkdError, ValueError):
    """A wavelength sits on a membrane resonance, where guidance is undefined."""


class ConfigurationError(HcfqkdError, KeyError):
    """A fiber table or run configuration lacks an entry that was needed."""

    def __str__(self) -> str:  # KeyError quotes its message otherwise
        return str(self.args[0]) if self.args else ""


class InfeasibleError(HcfqkdError, ValueError):
    """The requested physics has no solution (e.g. multi-photon gain above total gain)."""


class UnsortedInputError(HcfqkdError, ValueError):
    """Time tags were expected in non-decreasing order."""


class SpanTooSmallError(HcfqkdError, ValueError):
    """A histogram does not cover a requested coincidence peak."""
