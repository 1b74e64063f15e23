"""Homodyne tomography of filtered resonance fluorescence.

A driven two-level emitter radiating into a half-open waveguide produces a
propagating field whose temporal modes can carry Wigner-negative states. This
package simulates continuous homodyne detection of that field by stochastic
unraveling of the emitter master equation, reconstructs the filtered mode's
density matrix by iterative maximum-likelihood tomography, and quantifies the
Wigner negativity of the result.

Modules:
    model         closed-form steady state, correlations, filtered photon number
    filters       temporal mode filters and their discrete sampling
    trajectories  stochastic homodyne records and filtered quadrature samples
    tomography    histogramming, projectors, R-rho-R maximum likelihood
    wigner        phase-space grids, integrated negativity, displacement
    config        JSON experiment configuration with hashing and overrides
    runner        end-to-end pipelines and artifact persistence
    cli           fluotomo command-line entry point
"""

from .config import DEFAULTS, PROFILES, ExperimentConfig, resolve_omega
from .errors import (
    ArtifactMismatchError,
    ConfigError,
    CoverageError,
    CutoffError,
    FilterError,
    FluotomoError,
    GridError,
    HistogramError,
    LikelihoodError,
    NumericalInstabilityError,
    ParameterError,
    QuadratureError,
)
from .filters import FILTER_KINDS, FilterSpec, evaluate_filter, filter_bandwidth, filter_norm, sampled_weights
from .model import (
    BlochVector,
    CorrelationValue,
    SystemParams,
    filtered_mean_photon_number,
    incoherent_drive_amplitude,
    output_coherent_amplitude,
    regression_correlation,
    steady_state_bloch,
    two_time_correlation,
)
from .runner import (
    PointResult,
    SweepResult,
    cmd_oracle,
    cmd_run,
    cmd_sweep,
    cmd_wigner,
    load_state,
    run_point,
    selftest_rows,
)
from .tomography import (
    FockDensityMatrix,
    MleReport,
    ProjectorSet,
    QuadratureHistogram,
    annihilation_expectation,
    bin_samples,
    build_projectors,
    coherent_density_matrix,
    convention_selftest,
    exact_probabilities,
    mle_reconstruct,
    quadrature_wavefunction,
)
from .trajectories import (
    HARVESTING_MODES,
    ConditionedState,
    HomodyneRecord,
    QuadratureSample,
    TrajectoryConfig,
    batch_samples,
    ensemble_bloch_checkpoints,
    sample_filtered_quadrature,
    simulate_record,
    step_sme,
)
from .wigner import (
    CONVENTION,
    SINGLE_PHOTON_NEGATIVITY,
    NegativityReport,
    PhaseSpaceGrid,
    displace_density_matrix,
    integrated_negativity,
    purity,
    wigner_fock_diagonal,
    wigner_from_density_matrix,
    wigner_two_level,
)

__version__ = "0.1.0"
