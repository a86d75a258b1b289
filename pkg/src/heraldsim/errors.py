"""Exception and warning classes shared across the engines."""


class HeraldSimError(Exception):
    """Base class for simulator errors."""


class TruncationError(HeraldSimError):
    """Fock truncation too small for the requested state or operator."""


class TruncationWarning(UserWarning):
    pass


class StepSizeError(HeraldSimError, ArithmeticError):
    """Damping integrator failed its accuracy check."""


class PoleError(HeraldSimError, ArithmeticError):
    """Filter function evaluated at a pole of the tangent factor."""


class RegimeError(HeraldSimError, ValueError):
    """Parameters outside the regime where the analytic cooling model holds."""


class ZeroProbabilityError(HeraldSimError, ArithmeticError):
    """Conditioning on a measurement outcome with vanishing probability."""


class DegenerateBathError(HeraldSimError, ValueError):
    """Thermal P-function requested for a (near) zero-temperature bath."""


class ConfigError(HeraldSimError, ValueError):
    """Invalid run configuration."""


class RegimeWarning(UserWarning):
    """Suggested parameters sit outside the regime the protocol assumes."""
