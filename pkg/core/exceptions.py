"""
Exception types raised by the toolkit
"""


class RetinaLimitError(Exception):
    """Base class for all toolkit errors"""


class DomainError(RetinaLimitError, ValueError):
    """Input outside the domain of a formula"""


class UnboundedThresholdError(RetinaLimitError, ValueError):
    """Stimulus sensitivity at or above the baseline sensitivity: no finite threshold"""


class ThresholdOutsideRangeError(RetinaLimitError):
    """Psychometric data do not bracket a threshold"""


class ConvergenceError(RetinaLimitError):
    """Optimiser stopped without meeting its tolerance"""

    def __init__(self, message, best_so_far=None, trace=None):
        super().__init__(message)
        self.best_so_far = best_so_far
        self.trace = list(trace or [])


class UnidentifiableParametersError(RetinaLimitError):
    """Data cannot constrain every free parameter"""


class TargetOutOfRangeError(RetinaLimitError):
    """No subsampling factor reaches the target ppd within the rail limits"""

    def __init__(self, message, required_distances=None):
        super().__init__(message)
        self.required_distances = dict(required_distances or {})


class PyramidSizeError(RetinaLimitError, ValueError):
    """Image too small for the requested pyramid"""


class ColorSpaceError(RetinaLimitError, ValueError):
    """Colour conversion cannot be performed"""
