//! Closed-form mean dimension for product functions, the Gaussian-RBF theta
//! tuner, and the asymptotic expansions and bounds used to cross-check the
//! estimators.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{beta_constant, ModelError, MomentSummary};

#[derive(Debug, Error)]
pub enum TheoryError {
    #[error("rho_{index} = {value} is outside [0, 1]")]
    RhoOutOfRange { index: usize, value: f64 },
    #[error("all rho_j are zero; mean dimension undefined")]
    AllZeroRho,
    #[error("theta must be positive, got {0}")]
    NonpositiveTheta(f64),
    #[error("target mean dimension {target} is outside the open interval (1, {d})")]
    TargetOutOfRange { target: f64, d: usize },
    #[error("no theta in [1e-9, 1e9] straddles the target; achieved nu range [{lo_nu}, {hi_nu}]")]
    BracketNotFound { lo_nu: f64, hi_nu: f64 },
    #[error("exponent p = {p} is outside the validity range {range}")]
    POutOfRange { p: f64, range: &'static str },
    #[error("mu sum must be positive, got {0}")]
    NonpositiveMu(f64),
    #[error("variance sum must be positive, got {0}")]
    NonpositiveVariance(f64),
    #[error("dimension {d} is below the validity threshold -p/alpha = {threshold}")]
    DimensionBelowThreshold { d: usize, threshold: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-coordinate variance ratios rho_j = Var(g_j) / E[g_j^2] for a product
/// function f = prod_j g_j(x_j).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RhoVector {
    pub rhos: Vec<f64>,
}

impl RhoVector {
    pub fn new(rhos: Vec<f64>) -> Result<Self, TheoryError> {
        for (index, &value) in rhos.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) || !value.is_finite() {
                return Err(TheoryError::RhoOutOfRange { index, value });
            }
        }
        Ok(Self { rhos })
    }

    /// Coordinates that contribute nothing (rho = 0).
    pub fn zero_flags(&self) -> Vec<bool> {
        self.rhos.iter().map(|&r| r == 0.0).collect()
    }

    /// Coordinates with all mass in interactions (rho = 1).
    pub fn one_flags(&self) -> Vec<bool> {
        self.rhos.iter().map(|&r| r == 1.0).collect()
    }
}

/// Mean dimension of a product function: sum_j rho_j / (1 - prod_j (1 - rho_j)).
///
/// The denominator is formed as -expm1(sum_j ln(1 + (-rho_j))) so the
/// all-rho-small regime stays accurate; the naive product cancels
/// catastrophically exactly where the formula is most used (theta large).
pub fn product_mean_dimension(rho: &RhoVector) -> Result<f64, TheoryError> {
    let numer: f64 = rho.rhos.iter().sum();
    if numer == 0.0 {
        return Err(TheoryError::AllZeroRho);
    }
    // rho_j = 1 drives the log to -inf and the denominator to exactly 1,
    // which is the correct limit
    let log_prod: f64 = rho.rhos.iter().map(|&r| (-r).ln_1p()).sum();
    let denom = -log_prod.exp_m1();
    Ok(numer / denom)
}

/// rho for one coordinate of a Gaussian product RBF exp(-(x-c)^2/theta^2)
/// under standard normal x, in closed form.
pub fn gaussian_rho(theta: f64, c: f64) -> Result<f64, TheoryError> {
    if !(theta > 0.0) {
        return Err(TheoryError::NonpositiveTheta(theta));
    }
    let s = 1.0 / (theta * theta);
    // rho = 1 - m1^2/m2 with
    //   m1 = (1+2s)^(-1/2) exp(-s c^2 / (1+2s))
    //   m2 = (1+4s)^(-1/2) exp(-2s c^2 / (1+4s))
    // so m1^2/m2 = exp(g) with the shift terms combined into one stable ratio
    let g = 0.5 * (4.0 * s).ln_1p() - (2.0 * s).ln_1p()
        - 4.0 * s * s * c * c / ((1.0 + 2.0 * s) * (1.0 + 4.0 * s));
    Ok(-g.exp_m1())
}

/// rho vector for a Gaussian product RBF with the given centers.
pub fn gaussian_rho_vector(theta: f64, centers: &[f64]) -> Result<RhoVector, TheoryError> {
    let rhos = centers
        .iter()
        .map(|&c| gaussian_rho(theta, c))
        .collect::<Result<Vec<f64>, _>>()?;
    RhoVector::new(rhos)
}

/// Closed-form nu(theta) for a Gaussian product RBF.
pub fn gaussian_product_nu(theta: f64, centers: &[f64]) -> Result<f64, TheoryError> {
    product_mean_dimension(&gaussian_rho_vector(theta, centers)?)
}

/// Solve nu(theta) = target_nu for a Gaussian product RBF.
///
/// Brackets on a log-theta grid over [1e-9, 1e9] and bisects the leftmost
/// straddling cell; the solver tracks the function value directly instead of
/// assuming monotonicity in theta.
pub fn tune_theta(
    d: usize,
    centers: &[f64],
    target_nu: f64,
    tol: f64,
) -> Result<f64, TheoryError> {
    assert_eq!(centers.len(), d, "centers must have length d");
    assert!(tol > 0.0, "tol must be positive");
    if !(target_nu > 1.0 && target_nu < d as f64) {
        return Err(TheoryError::TargetOutOfRange {
            target: target_nu,
            d,
        });
    }
    let (lo_log, hi_log) = (-9.0f64 * std::f64::consts::LN_10, 9.0 * std::f64::consts::LN_10);
    let steps = 720usize;
    let nu_at = |t: f64| gaussian_product_nu(t.exp(), centers);

    let mut prev_log = lo_log;
    let mut prev_nu = nu_at(prev_log)?;
    let mut lo_seen = prev_nu;
    let mut hi_seen = prev_nu;
    let mut bracket = None;
    for i in 1..=steps {
        let cur_log = lo_log + (hi_log - lo_log) * (i as f64) / (steps as f64);
        let cur_nu = nu_at(cur_log)?;
        lo_seen = lo_seen.min(cur_nu);
        hi_seen = hi_seen.max(cur_nu);
        if (prev_nu - target_nu) * (cur_nu - target_nu) <= 0.0 {
            bracket = Some((prev_log, cur_log, prev_nu));
            break;
        }
        prev_log = cur_log;
        prev_nu = cur_nu;
    }
    let (mut a, mut b, nu_a) = bracket.ok_or(TheoryError::BracketNotFound {
        lo_nu: lo_seen,
        hi_nu: hi_seen,
    })?;
    let mut fa = nu_a - target_nu;
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        let fm = nu_at(mid)? - target_nu;
        if fm.abs() <= tol || (b - a) < 1e-15 {
            return Ok(mid.exp());
        }
        if fa * fm <= 0.0 {
            b = mid;
        } else {
            a = mid;
            fa = fm;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

fn falling_factorial(p: f64, k: u32) -> f64 {
    (0..k).map(|i| p - i as f64).product()
}

fn ratio_checks(summary: &MomentSummary) -> Result<(f64, f64), TheoryError> {
    if !(summary.mu_sum > 0.0) {
        return Err(TheoryError::NonpositiveMu(summary.mu_sum));
    }
    let v = summary.var_sum / (summary.mu_sum * summary.mu_sum);
    let m3 = summary.mu3_sum / summary.mu_sum.powi(3);
    Ok((v, m3))
}

/// Truncated expansion of E[(z_{1:d}/mu_{1:d})^p] through the d^-2 terms:
/// 1 + (p)_2/2! V + (p)_3/3! M3 + (p)_4/4! 3 V^2 with V = sigma^2/mu^2 and
/// M3 = mu^(3)/mu^3.
pub fn moment_expansion_p(summary: &MomentSummary, p: f64) -> Result<f64, TheoryError> {
    if p >= 6.0 {
        return Err(TheoryError::POutOfRange { p, range: "p < 6" });
    }
    let (v, m3) = ratio_checks(summary)?;
    Ok(1.0
        + falling_factorial(p, 2) / 2.0 * v
        + falling_factorial(p, 3) / 6.0 * m3
        + falling_factorial(p, 4) / 24.0 * 3.0 * v * v)
}

/// Asymptotic variance of (z_{1:d}/mu_{1:d})^p:
/// p^2 V (1 + (p-1) mu^(3)/(sigma^2 mu) + (p-1)(3p-5)/2 V).
pub fn variance_expansion(summary: &MomentSummary, p: f64) -> Result<f64, TheoryError> {
    if p > 1.0 {
        return Err(TheoryError::POutOfRange { p, range: "p <= 1" });
    }
    if !(summary.var_sum > 0.0) {
        return Err(TheoryError::NonpositiveVariance(summary.var_sum));
    }
    let (v, _) = ratio_checks(summary)?;
    let skew = summary.mu3_sum / (summary.var_sum * summary.mu_sum);
    Ok(p * p * v * (1.0 + (p - 1.0) * skew + 0.5 * (p - 1.0) * (3.0 * p - 5.0) * v))
}

/// Upper bound on sum_j tau-bar^2_j:
/// p^2 V (1 + (p-1)(2p-3) V + (p-1) mu^(3)/(mu sigma^2)).
pub fn tau_sum_bound(summary: &MomentSummary, p: f64) -> Result<f64, TheoryError> {
    if p >= 1.0 {
        return Err(TheoryError::POutOfRange { p, range: "p < 1" });
    }
    if !(summary.var_sum > 0.0) {
        return Err(TheoryError::NonpositiveVariance(summary.var_sum));
    }
    let (v, _) = ratio_checks(summary)?;
    let skew = summary.mu3_sum / (summary.mu_sum * summary.var_sum);
    Ok(p * p * v * (1.0 + (p - 1.0) * (2.0 * p - 3.0) * v + (p - 1.0) * skew))
}

/// Mean dimension upper bound 1 + (p-1)^2/2 sigma^2_{1:d} / mu^2_{1:d}.
pub fn theorem_nu_bound(summary: &MomentSummary, p: f64) -> Result<f64, TheoryError> {
    if p == 0.0 || p > 1.0 {
        return Err(TheoryError::POutOfRange {
            p,
            range: "nonzero p <= 1",
        });
    }
    let (v, _) = ratio_checks(summary)?;
    Ok(1.0 + 0.5 * (p - 1.0) * (p - 1.0) * v)
}

/// Uniform-in-d negative moment bound E[(z_{1:d}/mu_{1:d})^p] <= beta^p,
/// valid for d >= -p/alpha.
pub fn prop_const_upper_bound(summary: &MomentSummary, p: f64) -> Result<f64, TheoryError> {
    if p >= 0.0 {
        return Err(TheoryError::POutOfRange { p, range: "p < 0" });
    }
    let beta = beta_constant(summary)?;
    let alpha = summary.assumptions.as_ref().unwrap().alpha;
    let d = summary.per_coord.len();
    let threshold = -p / alpha;
    if (d as f64) < threshold {
        return Err(TheoryError::DimensionBelowThreshold { d, threshold });
    }
    Ok(beta.powf(p))
}

/// All closed-form values for one (d, p) pair, serialized next to the
/// estimates for joint plotting.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub d: usize,
    pub p: f64,
    pub mu_sum: f64,
    pub var_sum: f64,
    pub mu3_sum: f64,
    pub moment_expansion: f64,
    pub variance_expansion: f64,
    pub tau_sum_bound: f64,
    pub nu_bound: f64,
}

/// Evaluate every expansion at once; requires p < 1 so all four are defined.
pub fn expansion_report(summary: &MomentSummary, p: f64) -> Result<ExpansionReport, TheoryError> {
    if p >= 1.0 {
        return Err(TheoryError::POutOfRange { p, range: "p < 1" });
    }
    Ok(ExpansionReport {
        d: summary.per_coord.len(),
        p,
        mu_sum: summary.mu_sum,
        var_sum: summary.var_sum,
        mu3_sum: summary.mu3_sum,
        moment_expansion: moment_expansion_p(summary, p)?,
        variance_expansion: variance_expansion(summary, p)?,
        tau_sum_bound: tau_sum_bound(summary, p)?,
        nu_bound: theorem_nu_bound(summary, p)?,
    })
}
