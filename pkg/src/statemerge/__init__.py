"""Garbage-free merging of black-box quantum state preparations."""

from .batch import BatchState
from .circuit import (
    Circuit,
    Gate,
    OracleCall,
    Rotation,
    StateControl,
    ZeroControl,
    circuit_from_dict,
)
from .errors import (
    ContractError,
    InfeasibleEstimationError,
    NotUnitaryError,
    ResourceError,
    StateMergeError,
)
from .exact import (
    NotApplicable,
    build_exact_merge_special,
    build_state_control,
    build_superposition_prep,
    build_swap_orthogonal,
    build_zero_control,
    detect_special_case,
    harden_clean_preparation,
)
from .general import (
    AngleEstimate,
    MergeReport,
    build_orthogonal_component,
    estimate_angle,
    estimate_cos_squared,
    estimate_sign,
    general_merge,
    hoeffding_sample_count,
    theta_prime,
    verify_theta_cleanup_bound,
)
from .oracle import (
    AccessMode,
    BlackBoxUnitary,
    invoke,
    load_oracle,
    matrix_oracle,
    oracle_from_dict,
    prepared_state,
)
from .statevector import (
    PureState,
    QubitLayout,
    ancilla_leakage,
    apply_controlled,
    apply_single_qubit,
    fidelity,
    inner_product,
    trace_distance,
)
from .verification import (
    IdealTarget,
    build_ideal_merge,
    circuit_to_matrix,
    error_scaling_sweep,
    garbage_sweep,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
