"""Exception types raised by the pencil, DAE and solver layers."""


class DaeprojError(Exception):
    """Base class for all package-specific failures."""


class SingularPencilPoint(DaeprojError):
    """lam*A(t)+B(t) is numerically singular at the requested (lam, t)."""


class NotRegular(DaeprojError):
    """The pencil appears singular as a pencil: A(t)+mu*B(t) is singular
    for every sampled mu."""


class IndeterminateIndex(DaeprojError):
    """The log-log growth fit of the resolvent norm does not sit close
    enough to an integer to call the pencil index."""


class RadiusSelectionFailed(DaeprojError):
    """No contour radius was found for which the projector quadrature
    stabilizes; the finite spectrum could not be enclosed."""


class QuadratureDiverged(DaeprojError):
    """Doubling the contour nodes exceeded the node budget without two
    successive rules agreeing."""


class DefectTooLarge(DaeprojError):
    """The projector identity suite is violated beyond tolerance; this
    signals a pencil of index > 1 or a non-regular pencil.

    The offending (unvalidated) projector data is attached as
    ``projectors`` when available.
    """

    def __init__(self, message, projectors=None):
        super().__init__(message)
        self.projectors = projectors


class SingularNewtonMatrix(DaeprojError):
    """The update matrix I - G^{-1} Q2 (df/dx) P2 of the algebraic stage is
    numerically singular at the current point."""


class NoConvergence(DaeprojError):
    """An iteration (consistent initialization) did not reach its tolerance
    within the iteration budget."""


class IndexTooHigh(DaeprojError):
    """The pencil index was detected as > 1 somewhere on the integration
    interval; the solvers only handle index 0 and 1."""


class MeshMismatch(DaeprojError):
    """Two trajectories do not live on nested uniform meshes."""
