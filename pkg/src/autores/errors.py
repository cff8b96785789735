"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input lies outside the region where an operation is defined."""


class NumericError(ArithmeticError):
    """A numerical procedure (quadrature, root isolation, integration) failed."""


class ConfigError(ValueError):
    """A run configuration or perturbation table failed validation.

    ``field`` names the offending entry when one can be identified.
    """

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field


class AdmissibilityError(ConfigError):
    """The perturbation violates the growth/decay balance ``-1 <= sigma < b/q``."""

    def __init__(self, message, sigma, bound):
        super().__init__(message, field="perturbation")
        self.sigma = sigma
        self.bound = bound


class EngineRefusal(RuntimeError):
    """The leading-order averaging engine cannot evaluate this configuration.

    Raised instead of returning an answer that would silently omit
    orbit-correction or sub-leading potential contributions.
    """


class DegenerateError(EngineRefusal):
    """The averaged drift vanishes identically, or an equilibrium is not simple."""


class ResonanceOnsetError(DomainError):
    """Requested time precedes the onset ``t1`` of the resonant energy curve."""

    def __init__(self, message, t1):
        super().__init__(message)
        self.t1 = t1
