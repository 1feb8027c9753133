"""Exception hierarchy.

Input problems derive from :class:`ProblemError`, numerical breakdowns from
:class:`NumericalError`. The CLI maps the two families onto distinct exit
codes.
"""


class SdeBvpError(Exception):
    pass


class ProblemError(SdeBvpError, ValueError):
    """The problem data or a request about it is invalid."""


class NumericalError(SdeBvpError, ArithmeticError):
    """A computation broke down numerically."""


class RankDeficient(ProblemError):
    pass


class TooFewPoints(ProblemError):
    pass


class PointOutOfRange(ProblemError):
    pass


class UnsortedDuplicatePoints(ProblemError):
    pass


class NotAGridNode(ProblemError):
    pass


class GridMismatch(ProblemError):
    pass


class ConditionCountMismatch(ProblemError):
    pass


class SingularBasis(ProblemError):
    pass


class NotPreserved(ProblemError):
    pass


class EndpointInSupport(ProblemError):
    pass


class MissingSupportPoint(ProblemError):
    pass


class NotWellPosed(NumericalError):
    """The homogeneous boundary problem has nontrivial solutions."""


class PerturbedNotWellPosed(NotWellPosed):
    def __init__(self, n_value, det):
        super().__init__(f"perturbed problem at N={n_value} is not well posed (det={det:.3e})")
        self.n_value = n_value
        self.det = det


class SingularPair(NumericalError):
    pass


class IntegrationOverflow(NumericalError):
    pass


class InconsistentVerdict(NumericalError):
    pass
