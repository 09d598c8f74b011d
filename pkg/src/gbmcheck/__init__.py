"""Nonclassicality tests for single-mode light from generalized Bochner matrices.

Submodules: ``specfun`` (polynomials), ``states`` (analytic characteristic
functions), ``gbm`` (matrices, determinants, scans), ``estimator`` (sampling
from homodyne data), ``bhdsim`` (synthetic data) and ``cli``.
"""

from . import bhdsim, estimator, gbm, specfun, states
from .bhdsim import SimConfig, generate, read_dataset, write_dataset
from .errors import GbmError
from .estimator import (ComplexEstimate, DataSource, EstimatedMatrix, QuadratureDataset, det_with_error,
                        estimate_gbm, pattern_D, phase_uniformity, sample_cf_derivative, sample_cf_derivatives, sample_cf_direct,
                        sample_moment)
from .gbm import (AnalyticSource, CriterionResult, GbmSpec, build_gbm, det_hermitian, grid_scan, lattice,
                  preset)
from .states import (Coherent, Fock, Mixture, PhotonAddedThermal, SqueezedVacuum, Thermal, cf,
                     cf_derivative, moment)

__version__ = "0.1.0"
