"""Exception types shared across the package."""


class DomainError(ValueError):
    """A field violates a pointwise domain requirement (e.g. h <= 0 at a node)."""

    def __init__(self, message, node=None, value=None):
        super().__init__(message)
        self.node = node
        self.value = value


class AdmissibilityError(ValueError):
    """b(h) left the Gamma_k cone somewhere; carries the worst node and margin."""

    def __init__(self, message, node=None, margin=None):
        super().__init__(message)
        self.node = node
        self.margin = margin


class UnsupportedParameterError(ValueError):
    """Parameter combination outside what the discretization supports."""


class SingularJacobianError(RuntimeError):
    """Linearization is numerically singular; may carry a near-null direction."""

    def __init__(self, message, direction=None):
        super().__init__(message)
        self.direction = direction


class ConfigError(ValueError):
    """Malformed run configuration; messages carry the offending line number."""
