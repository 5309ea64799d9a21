"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the command-line front end can map
failures onto its documented exit statuses without inspecting messages.
"""


class SpectralStabError(Exception):
    """Base class for all package errors."""

    exit_code = 3


class InvalidInputError(SpectralStabError, ValueError):
    """Malformed or out-of-range input (bad lattice, negative density, ...)."""

    exit_code = 2


class CapacityError(InvalidInputError):
    """Requested problem size exceeds a documented memory guard."""


class UnsupportedTopologyError(InvalidInputError):
    """Operation requested on a surface type it is not defined for."""


class ResolutionError(InvalidInputError):
    """The mesh is too coarse to resolve a requested feature."""


class AssemblyError(SpectralStabError):
    """Finite element assembly met a degenerate element."""


class RankDeficiencyError(SpectralStabError):
    """The mass operator has too small a rank for the requested eigenvalues."""


class NumericalError(SpectralStabError):
    """An iterative solver failed to reach its tolerance."""


class BalanceFailure(NumericalError):
    """Moebius balancing did not converge within its budget."""

    def __init__(self, message, best=None, residual=float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual


class DegenerateMeasureError(InvalidInputError):
    """Measure for which a balancing point does not exist in the open ball."""


class PreconditionError(InvalidInputError):
    """An audit precondition (e.g. moment balancing) is violated."""
