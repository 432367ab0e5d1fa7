"""
Errors Module
Exception hierarchy shared by the library modules and the command-line harness
"""


class DelayMertonError(Exception):
    """Root of every error raised by this package"""
    pass


# ============================================================================
# PARAMETER GATE
# ============================================================================

class ValidationFailedError(DelayMertonError):
    """A scenario failed the standing hypotheses; message lists every violation"""

    def __init__(self, message, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class SigmaSingularError(ValidationFailedError):
    pass


class GammaExcludedError(ValidationFailedError):
    pass


class DiscountHypothesisError(ValidationFailedError):
    """beta - beta_bar_inf > 0 does not hold (human capital would be infinite)"""
    pass


class FinitenessHypothesisError(ValidationFailedError):
    """The denominator of nu is not positive (value function would be infinite)"""
    pass


class NonPositiveParameterError(ValidationFailedError):
    pass


# ============================================================================
# NUMERICS
# ============================================================================

class DegenerateDiscountError(DelayMertonError):
    pass


class GridMismatchError(DelayMertonError):
    pass


class StepIncompatibleError(DelayMertonError):
    """The simulation step dt does not divide the delay-grid step ds"""
    pass


class InadmissibleStateError(DelayMertonError):
    """Total wealth is below the boundary tolerance"""
    pass


class NegativeControlError(DelayMertonError):
    pass


class SentinelEncounteredError(DelayMertonError):
    """A minus-infinity utility reached a Monte Carlo average"""
    pass


# ============================================================================
# HARNESS
# ============================================================================

class ConfigParseError(DelayMertonError):
    pass


class CheckFailedError(DelayMertonError):

    def __init__(self, message, failed=()):
        super().__init__(message)
        self.failed = list(failed)


class IoFailureError(DelayMertonError):
    pass
