"""Exception types raised by the toolkit."""


class LagrangeBCError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgument(LagrangeBCError, ValueError):
    pass


class TransversalityError(LagrangeBCError):
    """The pairing matrix between two Lagrangian bases is singular."""


class NotNestedError(LagrangeBCError):
    """A minimal graph is not contained in the corresponding maximal graph."""


class OddGapError(LagrangeBCError):
    """The dimension gap between nested graphs is odd."""


class DegenerateFormError(LagrangeBCError):
    """A form matrix is singular (or not skew) where it was evaluated.

    The curve parameter of the offending evaluation, when known, is kept in
    :attr:`t`.
    """

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class NotClosedError(LagrangeBCError):
    """A user supplied 2-form field failed the sampled closedness test."""


class RankJumpError(LagrangeBCError):
    pass


class InvarianceError(LagrangeBCError):
    """Transported Lagrangian vectors left the Lagrangian subspace."""


class TraceError(LagrangeBCError):
    pass


class TooManyVectorsError(LagrangeBCError):
    pass


class NoConvergenceError(LagrangeBCError):
    """Newton iteration failed; ``history`` holds the residual norms."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class NotLocallySelfAdjointError(LagrangeBCError):
    """Boundary map fails the Lagrangian-kernel conditions at a sampled trace."""

    def __init__(self, message, verdict=None):
        super().__init__(message)
        self.verdict = verdict
