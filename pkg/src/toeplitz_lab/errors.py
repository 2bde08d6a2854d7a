"""Exception types shared across the package."""


class ToeplitzLabError(Exception):
    """Base class for all errors raised by the package."""


class ParameterError(ToeplitzLabError, ValueError):
    """Model parameters violate an integrability or range constraint."""


class SingularPointError(ToeplitzLabError, ValueError):
    """A density was evaluated exactly at one of its poles."""


class AccuracyError(ToeplitzLabError, ArithmeticError):
    """A numerical procedure could not reach its error target.

    Attributes
    ----------
    estimate : float
        The best available estimate of the achieved error.
    """

    def __init__(self, message, estimate=float("nan")):
        super().__init__(f"{message} (achieved error estimate {estimate:.3e})")
        self.estimate = estimate


class DivergentIntegralError(ToeplitzLabError, ArithmeticError):
    """An integral required by the computation is infinite."""


class RosenblattRegimeError(DivergentIntegralError):
    """The pair (f, g) sits in the non-central regime where the CLT variance diverges."""


class TheoremInapplicableError(ToeplitzLabError, ValueError):
    """The hypotheses of the requested rate theorem are not met."""


class UnclassifiableError(ToeplitzLabError, TypeError):
    """The density carries no analytic exponent metadata."""


class NotPositiveDefiniteError(ToeplitzLabError, ArithmeticError):
    """A generator matrix that must be inverted is not positive definite."""


class DiscretizationError(ToeplitzLabError, ArithmeticError):
    """An operator discretization did not converge within the node cap.

    Attributes
    ----------
    iterates : tuple of float
        The last two values of the refinement sequence.
    """

    def __init__(self, message, iterates=()):
        super().__init__(f"{message}; last iterates {tuple(iterates)}")
        self.iterates = tuple(iterates)


class DegenerateExperimentError(ToeplitzLabError, ValueError):
    """Too few usable grid points remain to fit a convergence rate."""
