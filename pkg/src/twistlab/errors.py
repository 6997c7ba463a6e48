"""Exception types shared across the package."""


class TwistlabError(Exception):
    """Base class for all package errors."""


class NotAPermutation(TwistlabError):
    """Input sequence is not a permutation of 0..n-1."""


class DisconnectedSurface(TwistlabError):
    """The two gluing permutations do not act transitively."""


class SurfaceFileError(TwistlabError):
    """Malformed surface description file; carries line/column info."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + loc)


class EvenGridSize(TwistlabError):
    """Grid resolution m must be odd."""


class AssemblyError(TwistlabError):
    """An assembled operator failed its symmetry verification."""


class NoConvergence(TwistlabError):
    """Iterative solver exhausted its budget without converging."""


class LsqNoConvergence(NoConvergence):
    """Least-squares solver did not reach the requested tolerance."""


class InsufficientBasis(TwistlabError):
    """Eigenbasis does not resolve enough of the field for the requested norm."""


class LambdaOutOfRange(TwistlabError):
    """Counting threshold exceeds the reliably resolved part of the spectrum."""


class RankAmbiguous(TwistlabError):
    """Singular values cluster at the rank threshold; no clear numerical rank."""

    def __init__(self, message, below=None, above=None):
        self.below = below
        self.above = above
        super().__init__(message)


class UnsupportedSize(TwistlabError):
    """Problem size exceeds the supported range for this operation."""


class DimensionMismatch(TwistlabError):
    """Deficiency spaces have unequal dimensions; no isometry exists."""


class BoundaryDivergence(TwistlabError):
    """Resolvent boundary values fail to converge along the radial schedule."""


class SingularHit(TwistlabError):
    """A trajectory hit a cone point of the surface."""


class BumpOverlapsSection(TwistlabError):
    """The bump support contains the section point phi0."""


class ConfigError(TwistlabError):
    """Invalid experiment configuration; carries the offending key."""


class CacheError(TwistlabError):
    """Eigenbasis cache file is corrupt or does not match its key."""
