"""Exception types raised by the simulation pipeline."""


class CavswapError(Exception):
    """Base class for all library errors."""


class ConfigError(CavswapError, ValueError):
    """Malformed parameters, pulse policies or scheme files."""


class InfiniteCooperativity(CavswapError, ZeroDivisionError):
    """Cooperativity requested with gamma_u == 0 (or kappa == 0)."""


class IntegrationError(CavswapError, RuntimeError):
    """Base class for integrator failures."""


class NonConvergence(IntegrationError):
    """Residual population did not decay inside the maximum window."""


class StepRejection(IntegrationError):
    """Adaptive step control could not meet the requested tolerance."""


class EmissionZero(CavswapError, ValueError):
    """Emission probability too small for a normalised waveform."""


class PostSelectionImpossible(CavswapError, ValueError):
    """No superposition term matches the detected click pattern."""


class NoHighEmissionPoint(CavswapError, LookupError):
    """No sweep point reaches the high-emission threshold."""
