"""
contact-hj - implicit Lax-Oleinik solver for Hamilton-Jacobi equations whose
Hamiltonian depends on the unknown, on the 1-D torus.

Provides:
- PeriodicGrid, TimeGrid - discretization of the torus and of time
- QuadraticHamiltonian, ConvexHamiltonian - models H(x, u, p) and their Lagrangians
- evolve, fundamental_solution, picard_solve - the discrete semigroup and fundamental solution
- shoot, min_over_characteristics - contact characteristics
- classify_drift, critical_search - critical shifts
- stationary_solve, aubry_set - large-time behaviour
"""

__version__ = "0.1.0"

from .characteristics import CharacteristicState, ShootParams, ShootResult, integrate, min_over_characteristics, shoot
from .config import RunConfig, load_config
from .critical import CriticalValueReport, classify_drift, critical_scan, critical_search, mane_value_frozen
from .domain import PeriodicGrid, TimeGrid
from .errors import (
    ConfigValidationError,
    ContactHJError,
    DivergenceError,
    InvalidWindowError,
    MalformedFieldError,
    NoBracketError,
    NoCharacteristicFoundError,
    OracleBudgetError,
    PicardNonConvergenceError,
    StabilityError,
    TransformWindowError,
    UnsupportedModelError,
)
from .hamiltonian import ConvexHamiltonian, HamiltonianModel, QuadraticHamiltonian, create_hamiltonian, parse_profile
from .longtime import AubryReport, StationaryResult, aubry_set, barrier, liminf_field, representation_check, stationary_solve
from .propagator import (
    BIG,
    MinimizerPath,
    PicardTrace,
    SpaceTimeField,
    ValueField,
    backtrack,
    evolve,
    fundamental_solution,
    picard_solve,
    step,
)

__all__ = [
    "PeriodicGrid",
    "TimeGrid",
    "HamiltonianModel",
    "QuadraticHamiltonian",
    "ConvexHamiltonian",
    "create_hamiltonian",
    "parse_profile",
    "BIG",
    "ValueField",
    "SpaceTimeField",
    "MinimizerPath",
    "PicardTrace",
    "step",
    "evolve",
    "fundamental_solution",
    "picard_solve",
    "backtrack",
    "CharacteristicState",
    "ShootParams",
    "ShootResult",
    "integrate",
    "shoot",
    "min_over_characteristics",
    "CriticalValueReport",
    "classify_drift",
    "critical_search",
    "critical_scan",
    "mane_value_frozen",
    "StationaryResult",
    "AubryReport",
    "liminf_field",
    "stationary_solve",
    "barrier",
    "aubry_set",
    "representation_check",
    "RunConfig",
    "load_config",
    "ContactHJError",
    "ConfigValidationError",
    "InvalidWindowError",
    "StabilityError",
    "TransformWindowError",
    "UnsupportedModelError",
    "MalformedFieldError",
    "PicardNonConvergenceError",
    "NoCharacteristicFoundError",
    "NoBracketError",
    "DivergenceError",
    "OracleBudgetError",
]
