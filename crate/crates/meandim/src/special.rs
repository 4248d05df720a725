//! Special functions backing the quantile transforms: normal CDF/quantile,
//! regularized incomplete gamma, chi-square CDF/quantile.
//!
//! Everything here is deterministic, table-free and thread-safe.  The
//! chi-square quantile carries an explicit accuracy contract: the CDF of the
//! returned quantile matches the requested probability to
//! [`ToleranceProfile::abs_cdf_roundtrip`].

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecialError {
    #[error("probability must lie strictly inside (0,1), got {0}")]
    ProbabilityOutOfRange(f64),
    #[error("shape parameter must be positive, got {0}")]
    NonpositiveShape(f64),
    #[error("x must be nonnegative, got {0}")]
    NegativeArgument(f64),
    #[error("degrees of freedom must be positive, got {0}")]
    NonpositiveDf(f64),
    #[error("quantile iteration did not reach tolerance; last iterate {last}, residual {residual:e}")]
    NonConvergence { last: f64, residual: f64 },
}

/// Accuracy contract for the iterative quantile inversions.
#[derive(Debug, Clone, Copy)]
pub struct ToleranceProfile {
    pub abs_cdf_roundtrip: f64,
    pub max_newton_iters: usize,
}

impl Default for ToleranceProfile {
    fn default() -> Self {
        Self {
            abs_cdf_roundtrip: 1e-10,
            max_newton_iters: 64,
        }
    }
}

/// ln Γ(x) for x > 0, Lanczos approximation (g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const COEFFS: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return pi.ln() - (pi * x).sin().abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.99999999999980993;
    for (i, &c) in COEFFS.iter().enumerate() {
        acc += c / (x + (i as f64) + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma P(a, x).
pub fn gamma_p(a: f64, x: f64) -> Result<f64, SpecialError> {
    if a <= 0.0 {
        return Err(SpecialError::NonpositiveShape(a));
    }
    if x < 0.0 {
        return Err(SpecialError::NegativeArgument(x));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < a + 1.0 {
        Ok(gamma_p_series(a, x))
    } else {
        Ok(1.0 - gamma_q_cf(a, x))
    }
}

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x), computed
/// without cancellation in the right tail.
pub fn gamma_q(a: f64, x: f64) -> Result<f64, SpecialError> {
    if a <= 0.0 {
        return Err(SpecialError::NonpositiveShape(a));
    }
    if x < 0.0 {
        return Err(SpecialError::NegativeArgument(x));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < a + 1.0 {
        Ok(1.0 - gamma_p_series(a, x))
    } else {
        Ok(gamma_q_cf(a, x))
    }
}

// Series expansion, converges fast for x < a + 1.
fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut ap = a;
    for _ in 0..500 {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    sum * log_prefix.exp()
}

// Lentz continued fraction for Q(a, x), x >= a + 1.
fn gamma_q_cf(a: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * ((i as f64) - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    let log_prefix = a * x.ln() - x - ln_gamma(a);
    h * log_prefix.exp()
}

/// Standard normal CDF Φ(x), accurate into both tails.
pub fn normal_cdf(x: f64) -> f64 {
    let half_sq = 0.5 * x * x;
    if x >= 0.0 {
        // 0.5 * (1 + erf(x/sqrt 2))
        0.5 + 0.5 * gamma_p(0.5, half_sq).unwrap_or(1.0)
    } else {
        0.5 * gamma_q(0.5, half_sq).unwrap_or(0.0)
    }
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile Φ⁻¹(u) for u in (0,1).
///
/// Rational minimax initial approximation (Acklam) followed by one Halley
/// refinement against the gamma-based CDF.  Odd symmetry about u = 0.5 is
/// exact by construction.
pub fn normal_quantile(u: f64) -> Result<f64, SpecialError> {
    if !(u > 0.0 && u < 1.0) {
        return Err(SpecialError::ProbabilityOutOfRange(u));
    }
    // exploit symmetry so both halves share one code path
    let (q, sign) = if u > 0.5 { (1.0 - u, 1.0) } else { (u, -1.0) };
    let x = acklam_quantile_upper(q);
    // One Halley step on Φ(-x) = q, i.e. on the magnitude of the tail.
    let cdf = normal_cdf(-x);
    let pdf = normal_pdf(x);
    let refined = if pdf > 0.0 {
        let delta = (cdf - q) / pdf;
        x + delta / (1.0 - 0.5 * delta * x)
    } else {
        x
    };
    Ok(sign * refined)
}

// Acklam's approximation for the magnitude of Φ⁻¹(q), 0 < q <= 0.5,
// returned as a positive number (the upper-tail quantile of 1-q).
fn acklam_quantile_upper(q: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const Q_LOW: f64 = 0.02425;
    if q < Q_LOW {
        let t = (-2.0 * q.ln()).sqrt();
        -(((((C[0] * t + C[1]) * t + C[2]) * t + C[3]) * t + C[4]) * t + C[5])
            / ((((D[0] * t + D[1]) * t + D[2]) * t + D[3]) * t + 1.0)
    } else {
        let r = q - 0.5;
        let s = r * r;
        -r * (((((A[0] * s + A[1]) * s + A[2]) * s + A[3]) * s + A[4]) * s + A[5])
            / (((((B[0] * s + B[1]) * s + B[2]) * s + B[3]) * s + B[4]) * s + 1.0)
    }
}

/// Chi-square CDF with `df` degrees of freedom.
pub fn chisq_cdf(df: f64, x: f64) -> Result<f64, SpecialError> {
    if df <= 0.0 {
        return Err(SpecialError::NonpositiveDf(df));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    gamma_p(0.5 * df, 0.5 * x)
}

/// Chi-square quantile via inversion of [`gamma_p`] with a Wilson–Hilferty
/// starting value and bracketed Newton refinement.
pub fn chisq_quantile(df: f64, u: f64) -> Result<f64, SpecialError> {
    chisq_quantile_with(df, u, &ToleranceProfile::default())
}

pub fn chisq_quantile_with(
    df: f64,
    u: f64,
    tol: &ToleranceProfile,
) -> Result<f64, SpecialError> {
    if df <= 0.0 {
        return Err(SpecialError::NonpositiveDf(df));
    }
    if !(u > 0.0 && u < 1.0) {
        return Err(SpecialError::ProbabilityOutOfRange(u));
    }
    let a = 0.5 * df;
    let ln_norm = -a * std::f64::consts::LN_2 - ln_gamma(a);

    // Wilson–Hilferty cube; falls back to the small-x power asymptote when
    // the cube goes nonpositive (deep left tail at small df).
    let z = normal_quantile(u)?;
    let h = 2.0 / (9.0 * df);
    let cube = 1.0 - h + z * h.sqrt();
    let mut x = if cube > 0.0 {
        df * cube * cube * cube
    } else {
        2.0 * ((u.ln() + ln_gamma(a + 1.0)) / a).exp()
    };
    if !(x > 0.0) || !x.is_finite() {
        x = df;
    }

    // Bracketed Newton on gamma_p(a, x/2) - u.
    let mut lo = 0.0_f64;
    let mut hi = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for _ in 0..tol.max_newton_iters {
        let cdf = gamma_p(a, 0.5 * x)?;
        residual = cdf - u;
        if residual.abs() <= tol.abs_cdf_roundtrip {
            return Ok(x);
        }
        if residual > 0.0 {
            hi = hi.min(x);
        } else {
            lo = lo.max(x);
        }
        // chi-square density at x, via logs to survive extreme df
        let ln_pdf = ln_norm + (a - 1.0) * x.ln() - 0.5 * x;
        let pdf = ln_pdf.exp();
        let mut next = if pdf > 0.0 { x - residual / pdf } else { x };
        if !(next > lo && next < hi) || !next.is_finite() {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                lo.max(x) * 2.0 + 1.0
            };
        }
        x = next;
    }
    Err(SpecialError::NonConvergence {
        last: x,
        residual,
    })
}
