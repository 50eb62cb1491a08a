//! The three composite integrals every ergodic-rate formula reduces to:
//!
//! ```text
//! I1(a, b, m) = ∫₀^∞ x^m e^{−ax} / (x + b) dx
//! I2(a, b, m) = ∫₀^∞ e^{−ax} / (x + b)^m dx
//! I3(a, b, m) = ∫₀^∞ e^{−ax} / ((x + b)^m (x + 1)) dx
//! ```
//!
//! I1 and I2 are evaluated through the exact identities
//! `I1 = m!·a^{−m}·e^{ab}E_{m+1}(ab)` and `I2 = b^{1−m}·e^{ab}E_m(ab)`,
//! which are free of the alternating-sum cancellation of the finite-sum
//! expansions (also provided, as `*_finite_sum`, for cross-checking). I3 uses
//! the partial-fraction expansion over I2 away from the merged pole and a
//! convergent series in `(b − 1)` close to it.

use crate::error::{Error, Result};

use super::special::scaled_expint;

fn check_ab(func: &'static str, a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(
            func,
            format!("a and b must be positive, got a={a}, b={b}"),
        ));
    }
    Ok(())
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

pub fn integral_i1(a: f64, b: f64, m: u32) -> Result<f64> {
    check_ab("integral_i1", a, b)?;
    Ok(factorial(m) * a.powi(-(m as i32)) * scaled_expint(m + 1, a * b)?)
}

pub fn integral_i2(a: f64, b: f64, m: u32) -> Result<f64> {
    check_ab("integral_i2", a, b)?;
    if m == 0 {
        return Err(Error::domain("integral_i2", "m must be >= 1"));
    }
    Ok(b.powi(1 - m as i32) * scaled_expint(m, a * b)?)
}

/// Pole separation below which I3 is rejected.
pub const I3_POLE_TOL: f64 = 1e-9;

pub fn integral_i3(a: f64, b: f64, m: u32) -> Result<f64> {
    check_ab("integral_i3", a, b)?;
    if m == 0 {
        return Err(Error::domain("integral_i3", "m must be >= 1"));
    }
    if (b - 1.0).abs() < I3_POLE_TOL {
        return Err(Error::DegeneratePole { b });
    }
    if (b - 1.0).abs() <= 0.5 * b {
        i3_pole_series(a, b, m)
    } else {
        integral_i3_partial_fractions(a, b, m)
    }
}

/// `I3 = Σ_{i=1}^m (−1)^{i−1}(1−b)^{−i} I2(a,b,m−i+1) + (b−1)^{−m} I2(a,1,1)`.
pub fn integral_i3_partial_fractions(a: f64, b: f64, m: u32) -> Result<f64> {
    check_ab("integral_i3", a, b)?;
    if (b - 1.0).abs() < I3_POLE_TOL {
        return Err(Error::DegeneratePole { b });
    }
    let mut sum = 0.0;
    for i in 1..=m {
        let sign = if i % 2 == 1 { 1.0 } else { -1.0 };
        sum += sign * (1.0 - b).powi(-(i as i32)) * integral_i2(a, b, m - i + 1)?;
    }
    Ok(sum + (b - 1.0).powi(-(m as i32)) * integral_i2(a, 1.0, 1)?)
}

// 1/(x+1) = Σ_k (b−1)^k / (x+b)^{k+1}, convergent for |b−1| < b ≤ x + b.
fn i3_pole_series(a: f64, b: f64, m: u32) -> Result<f64> {
    let ratio = b - 1.0;
    let mut sum = 0.0;
    let mut weight = 1.0;
    for k in 0..400u32 {
        let term = weight * integral_i2(a, b, m + k + 1)?;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
        weight *= ratio;
    }
    Ok(sum)
}

/// I1 by its finite-sum closed form
/// `Σ_{k=1}^m (k−1)!(−b)^{m−k}a^{−k} − (−1)^{m−1} b^m e^{ab}E1(ab)`.
pub fn integral_i1_finite_sum(a: f64, b: f64, m: u32) -> Result<f64> {
    check_ab("integral_i1", a, b)?;
    let mut sum = 0.0;
    for k in 1..=m {
        sum += factorial(k - 1) * (-b).powi((m - k) as i32) * a.powi(-(k as i32));
    }
    let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
    Ok(sum + sign * b.powi(m as i32) * scaled_expint(1, a * b)?)
}

/// I2 by its finite-sum closed form (m ≥ 2) or `e^{ab}E1(ab)` (m = 1).
pub fn integral_i2_finite_sum(a: f64, b: f64, m: u32) -> Result<f64> {
    check_ab("integral_i2", a, b)?;
    if m == 0 {
        return Err(Error::domain("integral_i2", "m must be >= 1"));
    }
    let e1 = scaled_expint(1, a * b)?;
    if m == 1 {
        return Ok(e1);
    }
    let fm1 = factorial(m - 1);
    let mut sum = 0.0;
    for k in 1..m {
        sum += factorial(k - 1) / fm1 * (-a).powi((m - k - 1) as i32) / b.powi(k as i32);
    }
    Ok(sum + (-a).powi((m - 1) as i32) / fm1 * e1)
}
