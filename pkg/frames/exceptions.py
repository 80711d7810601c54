"""
Exception hierarchy for frame computations and experiment configuration.
"""


class FramesError(Exception):
    """Base class for every error raised by the frames app."""


class PreconditionError(FramesError, ValueError):
    """An operation was called outside the hypotheses it can honour."""


class ConvergenceError(FramesError, ArithmeticError):
    """A refinement, tail sum or eigenvalue iteration did not converge."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations

    def to_dict(self):
        return {
            "message": str(self),
            "residual": self.residual,
            "iterations": self.iterations,
        }


class ConfigError(FramesError):
    """An experiment file failed validation."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = list(diagnostics or [])

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        return base + ': ' + '; '.join(self.diagnostics)
