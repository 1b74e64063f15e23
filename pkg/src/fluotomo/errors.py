"""Exception types shared across the toolkit.

Every error raised by the package derives from FluotomoError so callers can
catch the whole family. The CLI maps subclasses onto exit codes: configuration
problems exit 2, numerical failures exit 4 (warnings that do not abort a run
exit 3, handled in the runner, not here).
"""


class FluotomoError(Exception):
    """Base class for all package errors."""


class ParameterError(FluotomoError):
    """A physical parameter is outside its allowed domain."""


class FilterError(FluotomoError):
    """Temporal-mode filter is malformed or fails its normalization check."""


class CoverageError(FluotomoError):
    """A measurement record does not cover the filter window."""


class NumericalInstabilityError(FluotomoError):
    """Stochastic integration produced a non-finite state.

    Carries enough context to reproduce the failing trajectory.
    """

    def __init__(self, message, step_index=None, phase_index=None,
                 trajectory_index=None, state=None):
        super().__init__(message)
        self.step_index = step_index
        self.phase_index = phase_index
        self.trajectory_index = trajectory_index
        self.state = state


class HistogramError(FluotomoError):
    """Binning input is empty or contains invalid samples."""

    def __init__(self, message, sample_index=None):
        super().__init__(message)
        self.sample_index = sample_index


class QuadratureError(FluotomoError):
    """Numerical quadrature for a projector element failed to converge."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element  # (m, n, bin_index)


class LikelihoodError(FluotomoError):
    """Log-likelihood decreased during the fixed-point iteration.

    The iteration is monotone for correct projectors and probabilities, so a
    decrease beyond roundoff slack indicates a bug upstream, not bad data.
    """


class GridError(FluotomoError):
    """Phase-space grid too coarse or too small for a reliable integral."""


class CutoffError(FluotomoError):
    """Fock-space cutoff too small for the requested operation."""

    def __init__(self, message, required_cutoff=None):
        super().__init__(message)
        self.required_cutoff = required_cutoff


class ConfigError(FluotomoError):
    """Experiment configuration failed validation.

    ``field`` holds the dotted path of the offending key when known.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ArtifactMismatchError(FluotomoError):
    """Artifacts from different configurations were mixed in one analysis."""
