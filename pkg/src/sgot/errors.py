"""Exception hierarchy shared across the package."""


class SgotError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(SgotError):
    """Point sets or matrices with incompatible dimensions."""


class InsufficientDataError(SgotError):
    """Not enough samples to build the requested windowed dataset."""


class ParameterError(SgotError):
    """A numeric parameter violates its precondition."""


class RankError(SgotError):
    """Requested operator rank exceeds what the data supports."""


class DefectiveOperatorError(SgotError):
    """The reduced matrix is numerically defective or near-singular."""


class ZeroEigenvalueError(SgotError):
    """A transfer-operator eigenvalue of zero has no generator counterpart."""


class EmptyMeasureError(SgotError):
    """A spectral measure cannot be built from an empty spectrum."""


class NumericalError(SgotError):
    """A numerical invariant was violated beyond tolerance."""


class MarginalError(SgotError):
    """Transport marginals are not valid probability vectors."""


class IncompatibleSystemsError(SgotError):
    """Two systems cannot be compared (kernel or dimension mismatch)."""


class IllDefinedError(SgotError):
    """The requested similarity is undefined for these inputs."""


class DegenerateDirectionError(SgotError):
    """A descent direction collapsed to (numerical) zero norm."""


class ProjectionError(SgotError):
    """The affine constraint projection is ill-conditioned."""


class StratificationError(SgotError):
    """A class has too few members for stratified splitting."""


class ParseError(SgotError):
    """A file could not be parsed."""


class ConvergenceError(SgotError):
    """An iterative routine ran out of its iteration or time budget."""


class StagnationWarning(UserWarning):
    """The barycenter objective stopped decreasing before convergence."""
