"""Exception types shared across the package.

Every numerical failure mode has a named exception so that callers (and the
CLI) can report machine-readable error names on stderr.
"""


class IsomonoError(Exception):
    """Base class for all package errors."""

    @property
    def name(self) -> str:
        return type(self).__name__


class NearDegenerate(IsomonoError):
    """Two eigenvalues closer than the separation tolerance."""


class NonConvergence(IsomonoError):
    """An iterative solver (eigen-iteration, extrapolation) failed."""


class PoleAtEigenvalue(IsomonoError):
    """A scalar function is singular at an eigenvalue of the argument."""


class MismatchedBranch(IsomonoError):
    """No bijection between exp(2*pi*i*sigma) and the spectrum of V."""


class Resonant(IsomonoError):
    """Two eigenvalues differ by a non-zero integer."""


class CoincidentU(IsomonoError):
    """Two pole locations u_i, u_j collide (point on the fat diagonal)."""


class OnDiagonal(CoincidentU):
    """A coordinate change produced a point on the fat diagonal."""


class SmallDenominator(IsomonoError):
    """A resolvent denominator fell below tolerance (resonance at finite order)."""


class BoundaryViolated(IsomonoError):
    """Eigenvalue-gap boundary condition fails for the requested margin."""


class OutsideRadius(IsomonoError):
    """Series evaluation requested below the guaranteed convergence radius."""


class TruncationInsufficient(IsomonoError):
    """Series tail estimate exceeds the evaluation tolerance."""


class DiagonalHit(IsomonoError):
    """An integration path came too close to the fat diagonal."""


class StepUnderflow(IsomonoError):
    """Step size underflow; signals a movable pole on the path."""


class NoConvergence(NonConvergence):
    """Richardson extrapolation residual grows instead of shrinking."""


class OnAntiStokes(IsomonoError):
    """Direction d lies (numerically) on an anti-Stokes ray."""


class SingularMinor(IsomonoError):
    """A principal minor needed by the block LU factorization vanishes."""


class QSelectionAmbiguous(IsomonoError):
    """d + arg(u_{i+1}-u_i) sits on the boundary of a q-window."""


class SharedEigenvalue(IsomonoError):
    """Consecutive leading blocks share an eigenvalue."""


class InconsistentInput(IsomonoError):
    """Input data violates a stated consistency precondition."""


class ConditionViolated(IsomonoError):
    """A genericity/non-resonance condition required for inversion fails."""


class CertificationFailed(IsomonoError):
    """Post-hoc certification residual of a reconstruction exceeds tolerance."""


class ExcludedSigma(IsomonoError):
    """sigma hits an excluded value of the small-x asymptotics."""


class SingularSample(IsomonoError):
    """A sample point sits on a singular locus (y = 0, 1, x)."""


class ExtrapolationUnstable(NoConvergence):
    """R-extrapolation of the connection matrix did not stabilize."""


class ConfigError(IsomonoError):
    """Malformed CLI configuration."""
