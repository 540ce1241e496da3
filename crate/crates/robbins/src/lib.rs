//! Numerical laboratory for a rank-threshold stopping rule on the planar
//! Poisson strip `[0,1] x [0,∞)`.
//!
//! The crate evaluates the expected absolute rank of the stopped atom three
//! ways and cross-checks them against one another:
//!
//! - [`analytic`]: nested adaptive quadrature of the conditional-risk
//!   decomposition, exact inner integrals in closed form;
//! - [`simulate`]: seeded, reproducible Monte Carlo execution of the rule on
//!   sampled process realizations;
//! - [`optimize`]: derivative-free search for the loss-minimizing parameter
//!   triple `(alpha, b, c)`.
//!
//! [`quadrature`] supplies the adaptive Gauss-Kronrod integrator the
//! analytic layer is built on.

pub mod analytic;
pub mod optimize;
pub mod quadrature;
pub mod simulate;

pub use analytic::{
    expected_rank, threshold_formula, ParamError, RiskBreakdown, RuleParams,
};
pub use optimize::{nelder_mead, optimize_rule, OptConfig, OptResult};
pub use quadrature::{integrate, integrate_semi_infinite, QuadConfig, QuadError, QuadResult};
pub use simulate::{
    mc_compare, mc_estimate, mc_estimate_with_mode, Atom, LossMode, MCEstimate,
    PairedComparison, Phase, SimConfig, SimError, StopOutcome,
};
