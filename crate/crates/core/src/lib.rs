//! Degenerate age-structured population dynamics
//!
//! `y_t + y_a - (k(x) y_x)_x + μ y = f χ_ω` on `(0,T) × (0,A) × (0,1)` with
//! Dirichlet walls and the renewal condition `y(t, 0, x) = ∫ β y da`, where
//! `k` vanishes at an interior point `x0`.
//!
//! The crate provides forward and adjoint solvers whose discrete steps are
//! exact transposes of each other, Carleman weight evaluators, empirical
//! certificates for weighted energy inequalities, and penalized HUM null
//! controls.

pub mod adjoint;
pub mod certify;
pub mod coefficients;
pub mod error;
pub mod field;
pub mod forward;
pub mod grid;
pub mod hum;
pub mod quadrature;
pub mod rates;
pub mod region;
pub mod samples;
pub mod scheme;
pub mod tridiag;
pub mod weights;

pub use adjoint::{
    characteristic_eval, duality_report, CharacteristicEvaluator, duality_residual, semigroup_apply, solve_backward, AdjointProblem,
    DualityReport, SpectralSemigroup,
};
pub use certify::{
    caccioppoli_report, carleman_local_report, carleman_nondeg_report, carleman_report, carleman_s_sweep,
    empirical_constant, observability_from_trajectory, observability_report, CarlemanSample, CarlemanSweep, CertificateReport, EmpiricalConstant,
    InequalityId, ObservabilityForm,
};
pub use coefficients::{
    check_hypothesis_3_1, classify, Classification, ConditionCheck, DegeneracyWitness, DiffusionCoefficient,
    Hypothesis31Report, Integrability,
};
pub use error::{Error, Result};
pub use field::{restrict, weighted_norm, Field, Interval, Rank, SubBox, Weight};
pub use forward::{energy_estimate_check, renewal_integral, solve_forward, EnergyReport, ForwardProblem, ForwardSolution};
pub use grid::Grid;
pub use hum::{gramian_apply, synthesize_control, verify_null, HumProblem, HumResult, NullReport};
pub use rates::{check_rates, Fertility, Mortality, RateReport, RateSpec};
pub use region::ControlRegion;
pub use scheme::TimeScheme;
pub use weights::{
    carleman_factor, eval_nondeg_weights, eval_weights, hardy_poincare_ratio, theta_shifted, HardyWeight, NondegEval,
    NondegWeights, WeightEval, WeightOptions, WeightSet,
};

/// `|x - x0|^alpha` with analytic derivative.
pub fn make_power_law(alpha: f64, x0: f64) -> Result<DiffusionCoefficient> {
    DiffusionCoefficient::power_law(alpha, x0)
}
