"""
Exception hierarchy for the W-state expansion toolkit
"""


class WExpandError(Exception):
    """Base class for all toolkit errors"""


class ModeError(WExpandError, ValueError):
    """Unknown, duplicate or overlapping mode labels"""


class StateError(WExpandError, ValueError):
    """A state violates a norm or dimension precondition"""


class LayoutError(WExpandError, ValueError):
    """Invalid parallel layout or PDL placement"""


class ResourceLimitError(WExpandError, RuntimeError):
    """A run would exceed the dense simulation bound"""
