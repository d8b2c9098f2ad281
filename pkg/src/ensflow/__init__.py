"""Ensemble-informed estimation of 2-D incompressible ocean-current fields.

Offline, every ensemble member is embedded with a divergence-free kernel and
the resulting latent states are compressed by SVD into a handful of basis flow
fields.  Online, the basis weights are refined from noisy point measurements
with a Kalman filter whose cost does not grow with the number of measurements.
"""

__version__ = "0.1.0"

from .kernels import KernelConfig, SquaredExponential, se_kernel, incompressible_kernel, gram
from .ensemble import (
    EnsembleForecast,
    GridSpec,
    SyntheticTruth,
    aggregate_statistics,
    generate_synthetic_ensemble,
    load_ensemble,
    save_ensemble,
)
from .regression import LatentMatrix, LatentState, fit_all, fit_latent
from .compression import BasisModel, TruncationRule, basis_eval, basis_field_dump, compress
from .estimator import (
    EstimatorState,
    Measurement,
    batch_ls,
    init_from_ensemble,
    query,
    update,
)

__all__ = [
    "KernelConfig",
    "SquaredExponential",
    "se_kernel",
    "incompressible_kernel",
    "gram",
    "EnsembleForecast",
    "GridSpec",
    "SyntheticTruth",
    "aggregate_statistics",
    "generate_synthetic_ensemble",
    "load_ensemble",
    "save_ensemble",
    "LatentMatrix",
    "LatentState",
    "fit_all",
    "fit_latent",
    "BasisModel",
    "TruncationRule",
    "basis_eval",
    "basis_field_dump",
    "compress",
    "EstimatorState",
    "Measurement",
    "batch_ls",
    "init_from_ensemble",
    "query",
    "update",
]
