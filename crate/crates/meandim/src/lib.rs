//! Mean dimension of radial-basis-type functions.
//!
//! The crate computes mean dimension three ways and lets them be compared on
//! one axis:
//!
//! - exact closed forms where they exist: the product formula for
//!   product-form RBFs ([`theory`]) and full ANOVA decompositions on small
//!   discrete grids ([`anova`]);
//! - randomized-QMC estimation for everything else, multiquadrics and the
//!   Keister function in particular ([`estimate`]);
//! - evaluators for the asymptotic bounds and expansions ([`theory`]).
//!
//! Supporting layers: scrambled Sobol' point sets ([`lowdisc`]), the special
//! functions behind the quantile transforms ([`special`]), and the integrand
//! and input-distribution descriptions ([`model`]).

pub mod anova;
pub mod estimate;
pub mod lowdisc;
pub mod model;
pub mod special;
pub mod theory;

pub use anova::{exact_anova, exact_jansen_check, exact_total_index, AnovaError, AnovaResult};
pub use estimate::{
    derive_seed, estimate_gaussian_product_nu, estimate_mean_dimension_generic,
    estimate_mean_dimension_log_sum, estimate_mean_dimension_radial, estimate_variance_1d,
    jansen_radial_tau, EstimateError, EstimateReport, ReplicateRow,
};
pub use lowdisc::{
    load_direction_table, midpoint_grid, owen_scramble, sobol_points, DirectionTable,
    LowdiscError, PointBatch, SobolStream,
};
pub use model::{
    beta_constant, chi1_negative_moment, noncentral_chi1_moments, AssumptionConstants,
    CoordinateLaw, CoordinateMoments, FunctionSpec, InputModel, ModelError, MomentSummary,
};
pub use special::{
    chisq_cdf, chisq_quantile, gamma_p, gamma_q, ln_gamma, normal_cdf, normal_pdf,
    normal_quantile, SpecialError, ToleranceProfile,
};
pub use theory::{
    expansion_report, gaussian_product_nu, gaussian_rho, gaussian_rho_vector, moment_expansion_p,
    product_mean_dimension, prop_const_upper_bound, tau_sum_bound, theorem_nu_bound, tune_theta,
    variance_expansion, ExpansionReport, RhoVector, TheoryError,
};
