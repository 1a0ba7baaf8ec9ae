"""Exception types shared across the library."""


class FingapError(Exception):
    """Base class for all library errors."""


# -- elliptic ---------------------------------------------------------------

class LatticeDegenerate(FingapError):
    """Half-periods do not span a lattice (Im(omega2/omega1) <= 0)."""


class PoleProximity(FingapError):
    """Evaluation point too close to a lattice point / potential pole."""


class BranchPointsNotSorted(FingapError):
    """Real branch points must be strictly increasing."""


# -- curve ------------------------------------------------------------------

class SingularLinearSystem(FingapError):
    """Gap-cycle moment matrix is numerically singular."""


class RootOutsideGap(FingapError):
    """A numerator root of dp left its spectral gap (quadrature failure)."""


class PathCrossesCut(FingapError):
    """Integration path for the quasimomentum crosses a branch cut."""


class DivisorPointInsideZone(FingapError):
    """A finite divisor point sits strictly inside an open spectral zone."""


# -- spectral ---------------------------------------------------------------

class PathTooCloseToPole(FingapError):
    """Transfer-matrix path violates its clearance from a potential pole."""


class StepSizeUnderflow(FingapError):
    """Adaptive integrator cannot keep the local error within tolerance."""


class RootClusterUnresolved(FingapError):
    """Two spectral roots closer than the resolution tolerance."""


class FrobeniusSeriesDivergence(FingapError):
    """Local series start point too far from the singular endpoint."""


# -- bloch / kernel ---------------------------------------------------------

class DualDivisorUnavailable(FingapError):
    """No dual solution is available for the requested data."""


class ContourHitsSecondPole(FingapError):
    """Residue contour radius reaches another pole of the potential."""


class DiagonalEvaluation(FingapError):
    """Kernel evaluated at z == w; use the diagonal limit instead."""


class FitIllConditioned(FingapError):
    """Laurent/asymptotic fit grid poorly placed relative to the pole."""


class WindowNotIntegerPeriods(FingapError):
    """x-space window must span an integer number of periods."""


# -- products ---------------------------------------------------------------

class MultiplierMismatch(FingapError):
    """Gram identity requires both points to share the Bloch multiplier."""


class ZeroWeight(FingapError):
    """Bloch point with vanishing dp/dmu weight (boundary case)."""


class DecayTooSlow(FingapError):
    """Contour samples decay too slowly for the transform to converge."""


# -- darboux ----------------------------------------------------------------

class EtaVanishesOnGrid(FingapError):
    """Seed eigenfunction vanishes on the evaluation grid."""


class GroundStateNotFound(FingapError):
    """Chain step could not bracket the ground state eigenvalue."""


# -- kdv --------------------------------------------------------------------

class Collision(FingapError):
    """Pole positions collided during integration."""


class NewtonDiverged(FingapError):
    """No similarity solution found from the attempted starts."""


class NonPhysicalSolution(FingapError):
    """Candidate coefficient set fails cube-root-of-unity set invariance."""


class OrbitAmbiguity(FingapError):
    """Two orbit values coincide within the dedup tolerance."""


# -- cli --------------------------------------------------------------------

class ConfigInvalid(FingapError):
    """CLI configuration violates the documented schema."""


class CheckFailed(FingapError):
    """A numerical check exceeded its tolerance."""
