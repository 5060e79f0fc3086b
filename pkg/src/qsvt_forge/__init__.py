"""Desk-scale exact simulator of block-encoding pipelines."""

from .blockenc import (
    BlockEncoding,
    ChebyshevPolynomial,
    PureState,
    SparseHermitianMatrix,
    apply_to_state,
    diag_encode,
    dilate,
    density_exponentiation,
    encoded_block,
    exp_poly,
    linear_combination,
    log_unitary,
    poly_transform,
    preamplify,
    product,
    purified_density_encode,
    scale_down,
    sparse_oracle_encode,
    tensor,
)
from .estimation import (
    EstimatorMode,
    Purification,
    QueryLedger,
    amplitude_estimate,
    hadamard_overlap,
    trace_estimate,
)
from .power_eig import (
    PowerConfig,
    PowerRunRecord,
    classical_power_reference,
    conditioning_experiment,
    extract_extremes,
    iteration_count,
    run_power_method,
    solve_readout_system,
    spectrum_shift_encode,
    stability_bound,
)
from .graddesc import (
    GdConfigV1,
    GdConfigV2,
    TensorPolynomial,
    bounded_init_state,
    build_md,
    cost_model_compare,
    eval_f,
    eta_bound_for_beta,
    gd_step_v2,
    gradient_operator_d,
    run_gd_v1,
    run_gd_v2,
)
from .matinv import NewtonConfig, newton_inverse, residual_contraction_check

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
