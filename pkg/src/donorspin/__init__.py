"""Donor-bound-exciton spin spectroscopy: simulation and analysis toolkit."""

from .spinmodel import (
    CONSTANTS,
    EV_TO_GHZ,
    ConfigError,
    DriveField,
    EnergySplitting,
    HyperfineConfig,
    InhomogeneityConfig,
    LevelScheme,
    LiouvillianModel,
    PhysicalConstants,
    RelaxationConfig,
    ZeemanConfig,
    apply_energy_shift,
    build_level_scheme,
    build_liouvillian,
    build_liouvillian_pencil,
    excited_splitting,
    ground_splitting,
    rabi_from_power,
)
from .dynamics import (
    DegenerateSteadyStateError,
    DensityMatrix,
    EnsembleKernelError,
    EnsembleSpec,
    StiffIntegrationError,
    ensemble_average,
    evolve,
    evolve_path,
    steady_state,
    steady_state_batch,
)
from .spectroscopy import (
    MagnetoPoint,
    PolarizationPoint,
    PolarizationScan,
    ScanPlan,
    Spectrum,
    composite_axis,
    read_spectrum_csv,
    simulate_cpt_scan,
    simulate_magneto_pl,
    simulate_polarization_pl,
    simulate_pumping_transient,
    simulate_single_laser_ple,
    simulate_two_laser_ple,
    write_spectrum_csv,
)
from .analysis import (
    DegenerateDataError,
    DipNotFoundError,
    FitResult,
    PeakDipParams,
    VoigtParams,
    dip_shift_slope,
    fit_peak_with_dip,
    fit_polarization_positions,
    fit_voigt,
    fit_zeeman_splitting,
    voigt_eval,
    voigt_fwhm,
)
from .corrections import (
    BeamsplitterModel,
    PhaseEstimate,
    apply_correction,
    correction_factor,
    estimate_phase,
    ratio_f,
    synthesize_oscillation,
)

__version__ = "0.1.0"
