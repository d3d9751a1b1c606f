"""Exception types raised by the solvers.

The CLI reports the class name of any :class:`NumericalFailure` on stderr and
exits with status 2.
"""


class ConfigurationError(ValueError):
    """Invalid problem instance (bad points, exponent out of range, ...)."""


class NumericalFailure(RuntimeError):
    """Base class for solver failures."""


class SingularHessian(NumericalFailure):
    pass


class MaxIterations(NumericalFailure):
    pass


class Diverged(NumericalFailure):
    pass


class RankDeficient(NumericalFailure):
    """The 2x3 continuation Jacobian [DF | dF/dh] lost rank (branch point)."""


class CorrectorFailure(NumericalFailure):
    pass


class NoCrossing(NumericalFailure):
    pass


class BranchSwitchFailed(NumericalFailure):
    pass


class EquivarianceError(NumericalFailure):
    """A configuration failed the numerical symmetry certification."""
