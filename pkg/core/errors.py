class FreqSegError(Exception):
    """Base class for all library errors"""


class ConfigurationError(FreqSegError, ValueError):
    """Shape or configuration mismatch detected before or during compute"""


class ShapeError(ConfigurationError):
    """Array shape violates an operator precondition"""


class UsageError(FreqSegError, RuntimeError):
    """Operation called out of order (e.g. backward without a forward)"""


class MaskValidationError(FreqSegError, ValueError):
    """Mask contains values outside {0, 1}"""


class CheckpointError(FreqSegError):
    """Checkpoint manifest or tensor digest does not match its contents"""
