"""Exception hierarchy shared across the package.

Every error carries a stable ``category`` (its class name) that the CLI
reports in machine-readable form.
"""


class IsoreduceError(Exception):
    """Base class for all package errors."""

    @property
    def category(self) -> str:
        return type(self).__name__


class ConfigError(IsoreduceError):
    """Invalid configuration detected before any long computation starts."""


# -- Fourier-form algebra ----------------------------------------------------

class MixedFrequency(IsoreduceError):
    """Two harmonic series with different base frequencies were combined."""


class NonlinearUnknowns(IsoreduceError):
    """A product of two unknown-carrying series was requested."""


class UnstableEigenvalue(IsoreduceError):
    """Steady-state solve requested for an eigenvalue with Re >= 0."""


class ResonantDenominator(IsoreduceError):
    """|lambda^2 + (k omega)^2| fell below the scale-aware tolerance."""


class MissingUnknown(IsoreduceError):
    """Substitution did not cover every unknown appearing in a series."""

    def __init__(self, unknowns):
        self.unknowns = sorted(unknowns, key=str)
        super().__init__(f"unresolved unknowns: {self.unknowns}")


# -- Reduced model -----------------------------------------------------------

class StepTooLarge(IsoreduceError):
    """Integration step violates the accuracy/stability guard."""


class NonFiniteState(IsoreduceError):
    """State magnitude exceeded the blow-up threshold or became non-finite."""


class SchemaVersionMismatch(IsoreduceError):
    """Model document carries an unsupported schema version."""


class InvariantViolation(IsoreduceError):
    """A structural invariant of a loaded or constructed object failed."""


class ConjugateSymmetryViolation(IsoreduceError):
    """Output evaluation produced an imaginary part beyond tolerance."""


# -- Probing -----------------------------------------------------------------

class NotSettled(IsoreduceError):
    """Transients had not decayed before the averaging window began."""


class SamplingTooCoarse(IsoreduceError):
    """Fewer than 64 samples per probe cycle were requested."""


class MissingHarmonic(IsoreduceError):
    """A probe record does not contain the harmonic required by a stage."""


# -- Stage fitting -----------------------------------------------------------

class MissingLowerStage(IsoreduceError):
    """Stage assembly requires coefficients that have not been fitted yet."""


class IllConditioned(IsoreduceError):
    """Least-squares matrix condition number exceeded the configured cap."""

    def __init__(self, msg, condition=None):
        self.condition = condition
        super().__init__(msg)


class RankDeficient(IsoreduceError):
    """Least-squares matrix is rank deficient."""


class InconsistentProbeGrids(IsoreduceError):
    """Multi-output records disagree on frequencies or amplitudes."""


# -- Spectral estimation -----------------------------------------------------

class TooFewSamples(IsoreduceError):
    """Not enough samples to build the requested snapshot windows."""


class DegenerateCovariance(IsoreduceError):
    """Snapshot covariance is numerically zero."""


class UnstableEstimate(IsoreduceError):
    """An estimated decay rate has a non-negative real part."""


class InsufficientRank(IsoreduceError):
    """Too few modes or snapshots for the requested number of eigenvalues."""


class NoConvergence(IsoreduceError):
    """Newton refinement did not converge within the iteration budget."""

    def __init__(self, msg, residual=None, state=None):
        self.residual = residual
        self.state = state
        super().__init__(msg)


# -- Forward oracle ----------------------------------------------------------

class NotConverged(IsoreduceError):
    """A trajectory or relaxation did not converge within its horizon."""


class LimitUnstable(IsoreduceError):
    """The two-horizon isostable limit check disagreed."""


class ResonantCombination(IsoreduceError):
    """An eigenvalue sum collides with a Jacobian eigenvalue."""


class MissingDerivativeTensor(IsoreduceError):
    """A required higher-order derivative tensor was not supplied."""


# -- Testbeds ----------------------------------------------------------------

class CflViolation(IsoreduceError):
    """Time step violates the advection/diffusion stability bound."""


class BasisDimensionMismatch(IsoreduceError):
    """POD basis dimensions do not match the simulator grid."""


class DimensionMismatch(IsoreduceError):
    """Model and system disagree on output dimensions."""
