"""3D single-image super-resolution with CPD and Tucker tensor factorizations."""

__version__ = "0.1.0"

from .cpd_sisr import CpdConfig, CpdFactors, cpd_reconstruct, tf_sisr
from .degradation import DegradationSpec, degrade, measure_snr
from .operators import ModeOperator, build_operators, gaussian_kernel
from .tucker_sisr import TruncationRule, TuckerModel, hosvd, td_sisr, truncate, tucker_reconstruct

__all__ = [
    "CpdConfig",
    "CpdFactors",
    "DegradationSpec",
    "ModeOperator",
    "TruncationRule",
    "TuckerModel",
    "build_operators",
    "cpd_reconstruct",
    "degrade",
    "gaussian_kernel",
    "hosvd",
    "measure_snr",
    "td_sisr",
    "tf_sisr",
    "truncate",
    "tucker_reconstruct",
]
