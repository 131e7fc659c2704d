//! Closed-form bounds on the number of equal-weight nodes.
//!
//! Upper bounds come from the separation radius `ρ = (k−1) R_σ(1/(k+3))` and
//! `r = ρ/(6(k+3)) · (ρ/(12e))^{k−1}`, with `n ≥ ⌈1/r⌉` sufficient. Lower
//! bounds come from the moment ratio `m_k^{k−1}/m_{k−1}^k` (odd `k`) and from
//! the extreme weights of the Gauss rule.
//!
//! Node counts are reported as `f64` holding integer values: they overflow
//! 64-bit integers quickly as `k` grows.

use alloc::format;

use crate::error::{domain, param, Error, Result};
use crate::math::{ceil, ipow, sqrt, E};
use crate::measure::Measure1D;
use crate::orthopoly::gauss_rule_for_measure;

/// `(k−1) R_σ(1/(k+3))`.
pub fn separation_rho(m: &Measure1D, k: u32) -> Result<f64> {
    if k < 2 {
        return Err(param(format!("separation radius needs k >= 2, got {k}")));
    }
    Ok(f64::from(k - 1) * m.inverse_modulus(1.0 / f64::from(k + 3))?)
}

/// `ρ/(6(k+3)) · (ρ/(12e))^{k−1}`.
pub fn r_from_rho(rho: f64, k: u32) -> f64 {
    rho / (6.0 * f64::from(k + 3)) * ipow(rho / (12.0 * E), k.saturating_sub(1))
}

/// `⌈1/r⌉` (infinite for `r = 0`).
pub fn n_from_r(r: f64) -> f64 {
    if r > 0.0 {
        ceil(1.0 / r).max(1.0)
    } else {
        f64::INFINITY
    }
}

/// `⌈75 e^4 k M (12 e M)^{k−1}⌉` for a density bounded by `M`.
pub fn density_bound(k: u32, sup: f64) -> f64 {
    ceil(75.0 * ipow(E, 4) * f64::from(k) * sup * ipow(12.0 * E * sup, k.saturating_sub(1)))
}

/// `⌈1/r⌉` with `ρ` replaced by its lower bound `(k−1) c (1/(k+3))^β`, valid
/// whenever `R_σ(δ) ≥ c δ^β`.
pub fn beta_bound(k: u32, c: f64, beta: f64) -> f64 {
    let rho = f64::from(k - 1) * c * crate::math::powf(1.0 / f64::from(k + 3), beta);
    n_from_r(r_from_rho(rho, k))
}

/// Upper-bound quantities for one measure and degree.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct UpperBoundReport {
    pub k: u32,
    pub rho: f64,
    pub r: f64,
    pub n_guaranteed: f64,
    /// Present when the measure has a bounded density (no atoms).
    pub density_bound: Option<f64>,
    /// Present when the caller supplies `(c, β)` with `R_σ(δ) ≥ c δ^β`.
    pub beta_bound: Option<f64>,
}

/// Evaluates `ρ`, `r`, `⌈1/r⌉` and the optional density and power-law bounds.
pub fn upper_bound(
    m: &Measure1D,
    k: u32,
    power_law: Option<(f64, f64)>,
) -> Result<UpperBoundReport> {
    let (a, b) = m.support();
    if a < -1e-12 || b > 1.0 + 1e-12 {
        return Err(domain(format!(
            "upper bound needs support inside [0, 1], got [{a}, {b}]"
        )));
    }
    let rho = separation_rho(m, k)?;
    if rho == 0.0 {
        return Err(Error::Construction(format!(
            "an atom carries mass >= 1/(k+3) = {}, so rho = 0; use the large-atom bound instead",
            1.0 / f64::from(k + 3)
        )));
    }
    let r = r_from_rho(rho, k);
    Ok(UpperBoundReport {
        k,
        rho,
        r,
        n_guaranteed: n_from_r(r),
        density_bound: m.density_sup().map(|sup| density_bound(k, sup)),
        beta_bound: power_law.map(|(c, beta)| beta_bound(k, c, beta)),
    })
}

/// `max(1, m_k^{k−1} / m_{k−1}^k)` for odd `k ≥ 3`, reflecting first when `m_k < 0`.
pub fn lower_bound_moments(m: &Measure1D, k: u32) -> Result<f64> {
    if k < 3 || k % 2 == 0 {
        return Err(param(format!(
            "moment lower bound needs odd k >= 3, got {k}"
        )));
    }
    let at_zero: f64 = m
        .atoms()
        .iter()
        .filter(|a| a.x == 0.0)
        .map(|a| a.mass)
        .sum();
    if at_zero >= 1.0 - 1e-15 {
        return Err(domain("the measure is the point mass at 0"));
    }
    let mk = m.moment(k);
    if mk == 0.0 {
        return Ok(1.0);
    }
    // reflection x -> -x flips the sign of odd moments and keeps even ones
    let mk = mk.abs();
    let mkm1 = m.moment(k - 1);
    let value = ipow(mk, k - 1) / ipow(mkm1, k);
    Ok(value.max(1.0))
}

/// Best moment lower bound over translates `σ(· − t)` for `t` in `shifts`,
/// returning `(bound, shift)`. The unshifted bound is always included.
pub fn lower_bound_moments_scan(m: &Measure1D, k: u32, shifts: &[f64]) -> Result<(f64, f64)> {
    let mut best = (lower_bound_moments(m, k)?, 0.0);
    for &t in shifts {
        if t == 0.0 {
            continue;
        }
        if let Ok(v) = lower_bound_moments(&m.translate(t)?, k) {
            if v > best.0 {
                best = (v, t);
            }
        }
    }
    Ok(best)
}

/// `1 / min(λ_1, λ_m)` from the `mth`-point Gauss rule; bounds `n^0_σ(2·mth − 1)`.
pub fn lower_bound_bernstein(m: &Measure1D, mth: usize) -> Result<f64> {
    let g = gauss_rule_for_measure(m, mth)?;
    let lo = g.weights[0].min(*g.weights.last().unwrap());
    Ok(1.0 / lo)
}

/// Both sides of `λ_1 ≥ 1/⌈75 e^4 (2m−1) M (12 e M)^{2m−2}⌉`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianWeightCheck {
    pub mth: usize,
    pub lambda_first: f64,
    pub lambda_last: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub fn gaussian_weight_check(m: &Measure1D, mth: usize) -> Result<GaussianWeightCheck> {
    let sup = m
        .density_sup()
        .ok_or_else(|| domain("the weight inequality needs a bounded density (no atoms)"))?;
    let g = gauss_rule_for_measure(m, mth)?;
    let rhs = 1.0 / density_bound(2 * mth as u32 - 1, sup);
    let lambda_first = g.weights[0];
    let lambda_last = *g.weights.last().unwrap();
    Ok(GaussianWeightCheck {
        mth,
        lambda_first,
        lambda_last,
        rhs,
        holds: lambda_first >= rhs && lambda_last >= rhs,
    })
}

/// `(e/2)^k / (2√k)`: the asymptotic lower bound for the truncated exponential family.
pub fn exponential_family_bound(k: u32) -> f64 {
    ipow(E / 2.0, k) / (2.0 * sqrt(f64::from(k)))
}

/// Lower-bound quantities for one measure and odd degree.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LowerBoundReport {
    pub k: u32,
    pub moment_bound: f64,
    pub bernstein_bound: Option<f64>,
    /// Gauss order used for the Bernstein bound, `(k+1)/2`.
    pub m: Option<usize>,
}

/// Moment bound plus, when the Gauss rule is computable, the Bernstein bound.
pub fn lower_bound(m: &Measure1D, k: u32) -> Result<LowerBoundReport> {
    let moment_bound = lower_bound_moments(m, k)?;
    let mth = (k as usize).div_ceil(2);
    let bernstein = lower_bound_bernstein(m, mth).ok();
    Ok(LowerBoundReport {
        k,
        moment_bound,
        bernstein_bound: bernstein,
        m: bernstein.map(|_| mth),
    })
}
