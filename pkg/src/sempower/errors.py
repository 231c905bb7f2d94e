"""Exception types shared across the package."""


class InfeasibleError(ValueError):
    """A perception target cannot be met inside the admissible error range.

    ``reason`` is ``"too_strict"`` when the target lies below what zero
    transmission error achieves, and ``"always_satisfied"`` when the target is
    met even at the largest admissible error. ``achievable`` carries the
    boundary value that was compared against.
    """

    def __init__(self, message, reason="too_strict", achievable=None):
        super().__init__(message)
        self.reason = reason
        self.achievable = achievable


class BracketError(ValueError):
    """Root search interval does not contain a sign change."""
