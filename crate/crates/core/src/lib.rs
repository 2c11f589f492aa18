//! Optimal group testing designs for prevalence estimation when the test's
//! sensitivity and specificity are unknown.
//!
//! The crate builds locally D- and Ds-optimal approximate designs, rounds
//! them into integer designs, certifies optimality with the equivalence
//! theorem, and measures finite-sample efficiency by Monte Carlo.
//!
//! ```
//! use gtdesign::{optimal_design, round_design, Criterion, ParamVector, SizeBounds};
//!
//! let theta = ParamVector::new(0.07, 0.93, 0.96).unwrap();
//! let bounds = SizeBounds::new(1.0, 61.0).unwrap();
//! let opt = optimal_design(&theta, &bounds, Criterion::Ds).unwrap();
//! let exact = round_design(&opt.design, &theta, 3000, Criterion::Ds).unwrap();
//! assert_eq!(exact.counts(), vec![393, 1884, 723]);
//! ```

pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod robustness;
pub mod rounding;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
pub use model::{
    criterion_value, d_criterion, ds_criterion, estimability_check, evaluate_model,
    information_matrix, ApproximateDesign, Criterion, DesignPoint, Estimability, ExactDesign,
    ExactPoint, InfoMatrix, ModelEvaluation, ParamVector, SizeBounds,
};
pub use oracle::oracle_search;
pub use robustness::{monotonicity_report, sweep, MisspecGrid, MonotonicityReport, SweepRow};
pub use rounding::{efficient_round, round_design, ApportionmentResult};
pub use simulation::{
    efficiencies, mle_fit, sample_outcomes, simulate_mse, EfficiencyReport, MseMatrix, SampleData,
};
pub use solver::{
    d_optimal_design, derived_constants, ds_optimal_design, ds_weights, optimal_design,
    solve_d_equation, solve_ds_equation, verify_optimality, DerivedConstants, OptimalDesign,
    OptimalityReport, RootSolution, WeightSolution,
};
