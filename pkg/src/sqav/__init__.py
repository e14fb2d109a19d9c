"""Simulation and verification toolkit for self-tallying quantum anonymous voting."""
from .errors import (
    BroadcastTimeout,
    ConfigurationError,
    InvalidDimensionError,
    InvalidPermutationError,
    NormalizationError,
    ResourceBudgetError,
    SequencingError,
    SqavError,
)
from .qstate import (
    Basis,
    SparseState,
    apply_local_unitary,
    fourier_matrix,
    inner_product,
    inverse_number,
    make_chi_state,
    make_singlet_state,
    measure_all,
    measure_particle,
)
from .rng import make_rng
from .protocol import ProtocolConfig, run_full_protocol, tally
from .amc import AmcConfig, AmcInputs, anonymous_broadcast, anonymous_ranking, run_amc

__version__ = "0.1.0"
