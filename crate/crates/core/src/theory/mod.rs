//! Model constants and the sufficient sample-size / regularization bounds
//! derived from them.

mod bounds;
mod constants;
mod diagnostics;

pub use bounds::{
    bound_lambda_and_n, bound_n_min, lambda_lo, lambda_hi, n_min_formula, regime_multiplier,
    reference_checks, ReferenceCheck, TheoryBounds, TheoryReport, UniversalConstants, REFERENCE_CASES,
};
pub use constants::{
    compute_constants, compute_constants_over_grid, fit_envelope, resolve_trajectory_len, ModelConstants, MIN_TRAJECTORY_LEN,
    ENVELOPE_MARGIN,
};
pub use diagnostics::{
    cone_violation, diagnose_lambda_condition, diagnose_psd_gap, diagnose_restricted_eigenvalue,
    error_bound_check, lambda_condition_lhs, oracle_support, restricted_eigenvalue_from_gram,
    ErrorBoundCheck, LambdaCondition, PsdGap,
};
