"""Exception hierarchy shared across the package.

Each class maps to one CLI exit code (see ``qfpd.cli``), so failure modes
stay distinguishable from scripts.
"""


class QfpdError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(QfpdError):
    """An input violates a declared invariant (named in the message)."""


class StructureError(QfpdError):
    """Conjugate pairing or realness structure of a vectorized state is broken."""


class NumericsError(QfpdError):
    """A numeric consistency check failed (imaginary residue, quadrature accuracy)."""


class CurvatureError(NumericsError):
    """The control curvature S = 1/Omega + B^T K B came out non-positive."""


class ConvergenceError(QfpdError):
    """An iteration hit its cap without reaching tolerance.

    Carries the residual history so callers can inspect divergence.
    """

    def __init__(self, message, history=None, step=None):
        super().__init__(message)
        self.history = history if history is not None else []
        self.step = step


class ConfigError(QfpdError):
    """A scenario configuration is malformed; message names the key path."""
