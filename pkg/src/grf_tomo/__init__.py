"""Noise statistics of discrete cone-beam local tomography.

Simulates noise propagation through derivative-backprojection reconstruction
on a circular cone-beam geometry, predicts the limiting Gaussian-field
covariance of the reconstruction error in closed form, and provides
executable checks of the geometric assumptions plus equidistribution
diagnostics.
"""

from .analysis import (
    WeylDecayResult,
    ZeroSetReport,
    degeneracy_tolerance_scan,
    direction_degeneracy_fraction,
    equidistributed_average,
    fit_log_slope,
    hessian_scan_battery,
    hessian_zero_scan,
    weyl_decay_table,
    weyl_sum,
)
from .config import ConfigError, ExperimentConfig, load as load_config
from .covariance import CovariancePredictor, QuadratureConvergenceError
from .geometry import (
    ConeBeamGeometry,
    DegenerateProjectionError,
    Radon2DGeometry,
    radon2d_psi,
    radon2d_psi_second_derivative,
)
from .kernel import Kernel, KernelSpec, autocorrelation_spline
from .noise import NoiseModel, modulation_field, variance_field
from .recon import (
    HistogramDensity,
    ReconstructionPlan,
    SampleStats,
    density_mismatch,
    detector_response,
    gaussian_on_bins,
    histogram_density,
    histogram_density_2d,
    reconstruct_point,
    reconstruct_with_field,
    run_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "ConeBeamGeometry",
    "ConfigError",
    "CovariancePredictor",
    "DegenerateProjectionError",
    "ExperimentConfig",
    "HistogramDensity",
    "Kernel",
    "KernelSpec",
    "NoiseModel",
    "QuadratureConvergenceError",
    "Radon2DGeometry",
    "ReconstructionPlan",
    "SampleStats",
    "WeylDecayResult",
    "ZeroSetReport",
    "autocorrelation_spline",
    "degeneracy_tolerance_scan",
    "density_mismatch",
    "detector_response",
    "direction_degeneracy_fraction",
    "equidistributed_average",
    "fit_log_slope",
    "gaussian_on_bins",
    "hessian_scan_battery",
    "hessian_zero_scan",
    "histogram_density",
    "histogram_density_2d",
    "load_config",
    "modulation_field",
    "radon2d_psi",
    "radon2d_psi_second_derivative",
    "reconstruct_point",
    "reconstruct_with_field",
    "run_experiment",
    "variance_field",
    "weyl_decay_table",
    "weyl_sum",
]
