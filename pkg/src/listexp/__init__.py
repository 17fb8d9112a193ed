"""Error exponents and simulation for list decoding over discrete memoryless channels."""
from .channel import Dmc, bec, bsc, load_channel, mutual_information
from .ckm import ckm_exponent, ckm_solution, distortion_rate, tuple_bhattacharyya
from .csiszar import (
    critical_list_size,
    exponential_list_exponent,
    fixed_composition_exponent,
    sphere_packing_csiszar,
    finite_length_bound,
)
from .gallager import (
    e0,
    gallager_expurgated,
    random_coding_exponent,
    sphere_packing_exponent,
)
from .gaussian import GaussianSpec, gaussian_ckm_exponent, gaussian_rho_of_rate
from .simulator import SimConfig, estimate_list_error, exceeder_statistics

__version__ = "0.1.0"

__all__ = [
    "Dmc", "bec", "bsc", "load_channel", "mutual_information",
    "ckm_exponent", "ckm_solution", "distortion_rate", "tuple_bhattacharyya",
    "critical_list_size", "exponential_list_exponent", "fixed_composition_exponent",
    "sphere_packing_csiszar", "finite_length_bound",
    "e0", "gallager_expurgated", "random_coding_exponent", "sphere_packing_exponent",
    "GaussianSpec", "gaussian_ckm_exponent", "gaussian_rho_of_rate",
    "SimConfig", "estimate_list_error", "exceeder_statistics",
]
