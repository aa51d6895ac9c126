"""Exception hierarchy for the threshold laboratory."""


class ThresholdLabError(Exception):
    """Base class for all laboratory errors."""


class CriticalityError(ThresholdLabError):
    """(N, p) outside the intercritical window 0 < s_c < 1."""

    def __init__(self, N, p, s_c):
        self.N, self.p, self.s_c = N, p, s_c
        super().__init__(f"(N={N}, p={p}) gives s_c={s_c}, outside (0, 1)")


class GridError(ThresholdLabError):
    """Invalid grid, mismatched fields, or non-finite samples."""


class DegenerateInput(ThresholdLabError):
    """Input with no usable content (e.g. the zero field)."""


class NoConvergence(ThresholdLabError):
    """An iterative solver failed to converge."""


class ResidualTooLarge(ThresholdLabError):
    """A converged object fails its certification residual."""


class NoUnstableEigenvalue(ThresholdLabError):
    """No negative eigenvalue of L-·L+ was found."""


class SingularResolvent(ThresholdLabError):
    """Resolvent requested at (or numerically near) the discrete spectrum."""


class ExpansionIllConditioned(ThresholdLabError):
    """Polynomial extraction of expansion coefficients failed validation."""


class SeedTooLarge(ThresholdLabError):
    """The requested seed tolerance cannot be met on this grid."""


class OutsideWindow(ThresholdLabError):
    """Modulation decomposition requested outside the orbit window."""


class PhaseAmbiguity(ThresholdLabError):
    """Phase extraction undefined (field nearly orthogonal to the ground state)."""


class InsufficientSamples(ThresholdLabError):
    """Too few samples for a finite-difference rate estimate."""


class CutoffOutOfDomain(ThresholdLabError):
    """Cutoff scale incompatible with the grid domain."""


class NotInOrbitNeighborhood(ThresholdLabError):
    """Trajectory does not end near the standing-wave orbit."""


class HankelUnsupported(ThresholdLabError):
    """Fractional Sobolev norm requested for a dimension without an exact transform path."""


class LinearSolveFailure(ThresholdLabError):
    """A banded/sparse linear solve failed."""


class NumericalFailure(ThresholdLabError):
    """Time integration produced NaN or violated conservation guards."""
