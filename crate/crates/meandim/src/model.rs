//! Integrand families, input distributions, and the moment summaries the
//! theory evaluators consume.
//!
//! The QMC engine only emits unit-cube points, so every coordinate law
//! carries a quantile transform from (0,1) to its native support: normal
//! quantile for normals, chi-square quantile for chi-square variates, CDF
//! bucketing for finite discrete supports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::{self, SpecialError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("point dimension {got} does not match spec dimension {want}")]
    DimensionMismatch { want: usize, got: usize },
    #[error("MultiquadricZ requires nonnegative z inputs, got {0}")]
    NegativeZ(f64),
    #[error("singular evaluation: z sum is 0 with negative exponent")]
    SingularOrigin,
    #[error("finite discrete probabilities sum to {0}, expected 1")]
    ProbsNotNormalized(f64),
    #[error("finite discrete support must be finite and nonempty")]
    BadDiscreteSupport,
    #[error("assumption constants (alpha, M_alpha, mu_lower) are missing")]
    MissingAssumptions,
    #[error(transparent)]
    Special(#[from] SpecialError),
}

/// A tagged description of an integrand family.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    /// (a + sum_j (x_j - c_j)^2)^p on x in R^d
    Multiquadric { p: f64, a: f64, centers: Vec<f64> },
    /// (z_{1:d} / mu_{1:d})^p on nonnegative z inputs
    MultiquadricZ { p: f64, d: usize, mu_sum: f64 },
    /// prod_j exp(-(x_j - c_j)^2 / theta^2)
    GaussianProduct { theta: f64, centers: Vec<f64> },
    /// cos(|x| / 2) under standard Gaussian inputs
    Keister { d: usize },
    /// sum_j x_j
    SyntheticAdditive { d: usize },
    /// prod_j x_j
    SyntheticProduct { d: usize },
}

impl FunctionSpec {
    pub fn dim(&self) -> usize {
        match self {
            FunctionSpec::Multiquadric { centers, .. } => centers.len(),
            FunctionSpec::MultiquadricZ { d, .. } => *d,
            FunctionSpec::GaussianProduct { centers, .. } => centers.len(),
            FunctionSpec::Keister { d } => *d,
            FunctionSpec::SyntheticAdditive { d } => *d,
            FunctionSpec::SyntheticProduct { d } => *d,
        }
    }

    /// True when f(x) = h(sum_j phi_j(x_j)); such specs admit O(1) hybrid
    /// updates in the Jansen estimator.
    pub fn is_sum_structured(&self) -> bool {
        !matches!(self, FunctionSpec::SyntheticProduct { .. })
    }

    /// phi_j for sum-structured specs.
    pub fn coord_feature(&self, j: usize, x: f64) -> f64 {
        match self {
            FunctionSpec::Multiquadric { centers, .. } => {
                let t = x - centers[j];
                t * t
            }
            FunctionSpec::MultiquadricZ { .. } => x,
            FunctionSpec::GaussianProduct { centers, .. } => {
                let t = x - centers[j];
                t * t
            }
            FunctionSpec::Keister { .. } => x * x,
            FunctionSpec::SyntheticAdditive { .. } => x,
            FunctionSpec::SyntheticProduct { .. } => x,
        }
    }

    /// h applied to the feature sum, for sum-structured specs.
    pub fn from_feature_sum(&self, t: f64) -> Result<f64, ModelError> {
        match self {
            FunctionSpec::Multiquadric { p, a, .. } => {
                let base = a + t;
                if base == 0.0 && *p < 0.0 {
                    return Err(ModelError::SingularOrigin);
                }
                Ok(base.powf(*p))
            }
            FunctionSpec::MultiquadricZ { p, mu_sum, .. } => {
                if t < 0.0 {
                    return Err(ModelError::NegativeZ(t));
                }
                if t == 0.0 && *p < 0.0 {
                    return Err(ModelError::SingularOrigin);
                }
                Ok((t / mu_sum).powf(*p))
            }
            FunctionSpec::GaussianProduct { theta, .. } => Ok((-t / (theta * theta)).exp()),
            FunctionSpec::Keister { .. } => Ok((t.sqrt() * 0.5).cos()),
            FunctionSpec::SyntheticAdditive { .. } => Ok(t),
            FunctionSpec::SyntheticProduct { .. } => unreachable!("not sum structured"),
        }
    }

    /// Exact formula evaluation at a point of matching dimension.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.dim() {
            return Err(ModelError::DimensionMismatch {
                want: self.dim(),
                got: x.len(),
            });
        }
        if let FunctionSpec::MultiquadricZ { .. } = self {
            if let Some(&z) = x.iter().find(|&&z| z < 0.0) {
                return Err(ModelError::NegativeZ(z));
            }
        }
        if self.is_sum_structured() {
            let t: f64 = x
                .iter()
                .enumerate()
                .map(|(j, &xj)| self.coord_feature(j, xj))
                .sum();
            self.from_feature_sum(t)
        } else {
            Ok(x.iter().product())
        }
    }
}

/// One independent input coordinate.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum CoordinateLaw {
    StandardNormal,
    /// x ~ N(0,1); the coordinate contributes z = (x - c)^2,
    /// a noncentral chi-square(1) with noncentrality c^2.
    NormalShift { c: f64 },
    ChiSquare { df: f64 },
    FiniteDiscrete { values: Vec<f64>, probs: Vec<f64> },
    /// z = a + inner; folds a constant offset into one coordinate.
    Offset { a: f64, inner: Box<CoordinateLaw> },
}

impl CoordinateLaw {
    pub fn validate(&self) -> Result<(), ModelError> {
        match self {
            CoordinateLaw::FiniteDiscrete { values, probs } => {
                if values.is_empty()
                    || values.len() != probs.len()
                    || values.iter().any(|v| !v.is_finite())
                    || probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite())
                {
                    return Err(ModelError::BadDiscreteSupport);
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(ModelError::ProbsNotNormalized(total));
                }
                Ok(())
            }
            CoordinateLaw::Offset { inner, .. } => inner.validate(),
            _ => Ok(()),
        }
    }

    /// Quantile transform from u in (0,1) to a sample of this law.
    pub fn transform(&self, u: f64) -> Result<f64, ModelError> {
        match self {
            CoordinateLaw::StandardNormal => Ok(special::normal_quantile(u)?),
            CoordinateLaw::NormalShift { c } => {
                let x = special::normal_quantile(u)?;
                let t = x - c;
                Ok(t * t)
            }
            CoordinateLaw::ChiSquare { df } => Ok(special::chisq_quantile(*df, u)?),
            CoordinateLaw::FiniteDiscrete { values, probs } => {
                // CDF bucketing; ties break toward the lower index
                let mut cdf = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    cdf += p;
                    if u <= cdf {
                        return Ok(*v);
                    }
                }
                Ok(*values.last().unwrap())
            }
            CoordinateLaw::Offset { a, inner } => Ok(a + inner.transform(u)?),
        }
    }

    /// Mean, variance and central moments 3..6 of the law's output.
    pub fn moments(&self) -> CoordinateMoments {
        match self {
            CoordinateLaw::StandardNormal => CoordinateMoments {
                mu: 0.0,
                var: 1.0,
                mu3: 0.0,
                mu4: 3.0,
                mu5: 0.0,
                mu6: 15.0,
            },
            CoordinateLaw::NormalShift { c } => noncentral_chi1_central_moments(*c),
            CoordinateLaw::ChiSquare { df } => {
                // cumulants kappa_n = 2^(n-1) (n-1)! df
                let k = *df;
                let (k3, k4, k5, k6) = (8.0 * k, 48.0 * k, 384.0 * k, 3840.0 * k);
                let var = 2.0 * k;
                CoordinateMoments {
                    mu: k,
                    var,
                    mu3: k3,
                    mu4: k4 + 3.0 * var * var,
                    mu5: k5 + 10.0 * k3 * var,
                    mu6: k6 + 15.0 * k4 * var + 10.0 * k3 * k3 + 15.0 * var * var * var,
                }
            }
            CoordinateLaw::FiniteDiscrete { values, probs } => {
                let mu: f64 = values.iter().zip(probs).map(|(v, p)| v * p).sum();
                let central = |k: i32| -> f64 {
                    values
                        .iter()
                        .zip(probs)
                        .map(|(v, p)| (v - mu).powi(k) * p)
                        .sum()
                };
                CoordinateMoments {
                    mu,
                    var: central(2),
                    mu3: central(3),
                    mu4: central(4),
                    mu5: central(5),
                    mu6: central(6),
                }
            }
            CoordinateLaw::Offset { a, inner } => {
                let mut m = inner.moments();
                m.mu += a; // central moments are shift-invariant
                m
            }
        }
    }
}

/// Per-coordinate moment record: mean, variance, central moments 3..6.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoordinateMoments {
    pub mu: f64,
    pub var: f64,
    pub mu3: f64,
    pub mu4: f64,
    pub mu5: f64,
    pub mu6: f64,
}

/// Constants for the bounded-mean / negative-moment assumptions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AssumptionConstants {
    pub alpha: f64,
    pub m_alpha: f64,
    pub mu_lower: f64,
    pub mu_upper: Option<f64>,
    pub sigma_sq_upper: Option<f64>,
    pub lambda: Option<f64>,
}

/// Aggregated moment summary over the coordinates of an input model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentSummary {
    pub per_coord: Vec<CoordinateMoments>,
    pub mu_sum: f64,
    pub var_sum: f64,
    pub mu3_sum: f64,
    pub mu4_sum: f64,
    pub mu5_sum: f64,
    pub mu6_sum: f64,
    pub assumptions: Option<AssumptionConstants>,
}

/// Independent per-coordinate input distributions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputModel {
    pub laws: Vec<CoordinateLaw>,
}

impl InputModel {
    pub fn new(laws: Vec<CoordinateLaw>) -> Result<Self, ModelError> {
        for law in &laws {
            law.validate()?;
        }
        Ok(Self { laws })
    }

    pub fn dim(&self) -> usize {
        self.laws.len()
    }

    /// Moment summary; aggregates are exact coordinate sums.
    pub fn summary(&self) -> MomentSummary {
        let per_coord: Vec<CoordinateMoments> = self.laws.iter().map(|l| l.moments()).collect();
        MomentSummary {
            mu_sum: per_coord.iter().map(|m| m.mu).sum(),
            var_sum: per_coord.iter().map(|m| m.var).sum(),
            mu3_sum: per_coord.iter().map(|m| m.mu3).sum(),
            mu4_sum: per_coord.iter().map(|m| m.mu4).sum(),
            mu5_sum: per_coord.iter().map(|m| m.mu5).sum(),
            mu6_sum: per_coord.iter().map(|m| m.mu6).sum(),
            per_coord,
            assumptions: None,
        }
    }

    pub fn summary_with(&self, assumptions: AssumptionConstants) -> MomentSummary {
        let mut s = self.summary();
        s.assumptions = Some(assumptions);
        s
    }
}

/// Central moments of z = (x - c)^2 for x ~ N(0,1): a noncentral
/// chi-square(1) with noncentrality c^2.  Returns (mu, var, mu3, mu4).
pub fn noncentral_chi1_moments(c: f64) -> (f64, f64, f64, f64) {
    let l = c * c;
    let mu = 1.0 + l;
    let var = 2.0 * (1.0 + 2.0 * l);
    let mu3 = 8.0 * (1.0 + 3.0 * l);
    let mu4 = 12.0 * (1.0 + 2.0 * l) * (1.0 + 2.0 * l) + 48.0 * (1.0 + 4.0 * l);
    (mu, var, mu3, mu4)
}

// Full central moments up to order 6, exact via raw even moments of the
// shifted normal y = x - c ~ N(-c, 1):  E[y^(2m)] = sum_i C(2m,2i) c^(2m-2i) (2i-1)!!.
fn noncentral_chi1_central_moments(c: f64) -> CoordinateMoments {
    fn binom(n: u64, k: u64) -> f64 {
        let mut acc = 1.0;
        for i in 0..k {
            acc = acc * ((n - i) as f64) / ((i + 1) as f64);
        }
        acc
    }
    fn double_factorial_odd(m: u64) -> f64 {
        // (2m-1)!! with the empty product = 1
        (0..m).map(|i| (2 * i + 1) as f64).product()
    }
    // raw moments of z: E[z^m] = E[y^(2m)]
    let mut raw = [0.0f64; 7];
    raw[0] = 1.0;
    for m in 1..=6u64 {
        let n = 2 * m;
        let mut acc = 0.0;
        for i in 0..=m {
            acc += binom(n, 2 * i) * c.powi((n - 2 * i) as i32) * double_factorial_odd(i);
        }
        raw[m as usize] = acc;
    }
    let mu = raw[1];
    let central = |k: u64| -> f64 {
        let mut acc = 0.0;
        for i in 0..=k {
            acc += binom(k, i) * (-mu).powi((k - i) as i32) * raw[i as usize];
        }
        acc
    };
    CoordinateMoments {
        mu,
        var: central(2),
        mu3: central(3),
        mu4: central(4),
        mu5: central(5),
        mu6: central(6),
    }
}

/// beta = 1 / (mu_lower * M_alpha^(1/alpha)), the constant controlling
/// negative moments of normalized sums.
pub fn beta_constant(summary: &MomentSummary) -> Result<f64, ModelError> {
    let a = summary
        .assumptions
        .as_ref()
        .ok_or(ModelError::MissingAssumptions)?;
    if !(a.alpha > 0.0 && a.m_alpha.is_finite() && a.mu_lower > 0.0) {
        return Err(ModelError::MissingAssumptions);
    }
    Ok(1.0 / (a.mu_lower * a.m_alpha.powf(1.0 / a.alpha)))
}

/// Negative moment E[z^-alpha] of the central chi-square(1), in closed form:
/// 2^-alpha Gamma(1/2 - alpha) / Gamma(1/2), valid for alpha < 1/2.
pub fn chi1_negative_moment(alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 0.5);
    (0.5f64.powf(alpha))
        * (special::ln_gamma(0.5 - alpha) - special::ln_gamma(0.5)).exp()
}
