"""Exception hierarchy shared by all modules."""


class EPAtlasError(Exception):
    """Base class for every computation error raised by the package."""


class InvalidInput(EPAtlasError, ValueError):
    """A precondition on the arguments is violated."""


class NonConvergence(EPAtlasError):
    """An iterative method hit its iteration cap."""


class NoConvergence(NonConvergence):
    """The exceptional-point search did not converge."""


class Singular(EPAtlasError):
    """A linear solve met a pivot below the singularity threshold."""


class AmbiguousStructure(EPAtlasError):
    """A degenerate cluster is neither an EP nor fully diagonalizable."""


class ChainBreaks(EPAtlasError):
    """A Jordan chain ended before the requested length."""


class DegenerateNormalization(EPAtlasError):
    """A bilinear scalar needed to normalize a chain vanishes."""


class InconsistentCycles(EPAtlasError):
    """The monodromy cycle structure changed between loop radii."""


class EPOnPath(EPAtlasError):
    """A loop sample sits on (or numerically at) an exceptional point."""

    def __init__(self, message, phi=None):
        super().__init__(message)
        self.phi = phi


class MatchingAmbiguous(EPAtlasError):
    """Branch matching stayed ambiguous after maximal step refinement."""


class WrongOrder(EPAtlasError):
    """The EP search converged to a degeneracy of lower order than requested."""


class DimensionMismatch(EPAtlasError, ValueError):
    """Matrices in a family definition have inconsistent shapes."""


class NonSymmetricFile(EPAtlasError, ValueError):
    """A family file contains a matrix that is not exactly symmetric."""
