from .dmrg import ConvergenceWarning, DmrgConfig, dmrg_ground_state, expectation_value
from .ed import StateVector, build_sector_hamiltonian, ed_ground_state, sector_basis
from .lanczos import lowest_eigenpair
from .mps import MPSState, entropy_profile, mps_norm, schmidt_values
from .schmidt import schmidt_decompose

__all__ = [
    "ConvergenceWarning",
    "DmrgConfig",
    "MPSState",
    "StateVector",
    "build_sector_hamiltonian",
    "dmrg_ground_state",
    "ed_ground_state",
    "entropy_profile",
    "expectation_value",
    "lowest_eigenpair",
    "mps_norm",
    "schmidt_decompose",
    "schmidt_values",
    "sector_basis",
]
