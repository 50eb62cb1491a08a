//! Special functions: Bessel J0, exponential integrals, Γ(−k, x) and the
//! beta function.
//!
//! The exponential integral is the workhorse of every closed-form rate. Its
//! arguments span roughly 1e-6 (60 dB) to 1e6 (quantization cells at low
//! SNR), so the scaled product `e^x·E_n(x)` is produced natively rather than
//! by multiplying two factors that over/underflow on their own.

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Zeroth-order Bessel function of the first kind.
pub fn bessel_j0(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::domain("bessel_j0", format!("non-finite argument {x}")));
    }
    let ax = x.abs();
    if ax <= 12.0 {
        Ok(j0_series(ax))
    } else {
        Ok(j0_asymptotic(ax))
    }
}

fn j0_series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        let kf = k as f64;
        term *= -q / (kf * kf);
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum.clamp(-1.0, 1.0)
}

// Hankel expansion, truncated at its smallest term.
fn j0_asymptotic(x: f64) -> f64 {
    // t_k = a_k / x^k with a_k = Π_{j≤k} (2j−1)² / (k!·8^k);
    // P = Σ (−1)^m t_{2m}, Q = Σ (−1)^{m+1} t_{2m+1}.
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0f64;
    for k in 1..60usize {
        let odd = (2 * k - 1) as f64;
        let next = term * odd * odd / (8.0 * k as f64 * x);
        if next >= term {
            break;
        }
        term = next;
        let m = k / 2;
        let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * term;
        } else {
            q -= sign * term;
        }
    }
    let chi = x - std::f64::consts::FRAC_PI_4;
    (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn check_expint_args(func: &'static str, n: u32, x: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain(func, "order n must be >= 1"));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(
            func,
            format!("argument must be positive and finite, got {x}"),
        ));
    }
    Ok(())
}

/// Power series for `E_n(x)`, valid and used for `0 < x < 1`.
fn expint_series(n: u32, x: f64) -> f64 {
    let nm1 = (n - 1) as i64;
    let mut ans = if nm1 != 0 {
        1.0 / nm1 as f64
    } else {
        -x.ln() - EULER_GAMMA
    };
    let mut fact = 1.0;
    for i in 1..MAX_ITER as i64 {
        fact *= -x / i as f64;
        let del = if i != nm1 {
            -fact / (i - nm1) as f64
        } else {
            let psi = -EULER_GAMMA + (1..=nm1).map(|ii| 1.0 / ii as f64).sum::<f64>();
            fact * (-x.ln() + psi)
        };
        ans += del;
        if del.abs() < ans.abs() * EPS {
            break;
        }
    }
    ans
}

/// Modified Lentz evaluation of the continued fraction for `e^x·E_n(x)`,
/// used for `x >= 1`.
fn scaled_expint_cf(n: u32, x: f64) -> f64 {
    let nm1 = (n - 1) as f64;
    let mut b = x + n as f64;
    let mut c = 1.0 / FPMIN;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        let a = -fi * (nm1 + fi);
        b += 2.0;
        d = 1.0 / (a * d + b);
        c = b + a / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Exponential integral `E_n(x) = ∫₁^∞ e^{−xt} t^{−n} dt`.
pub fn expint_en(n: u32, x: f64) -> Result<f64> {
    check_expint_args("expint_en", n, x)?;
    if x < 1.0 {
        Ok(expint_series(n, x))
    } else {
        Ok(scaled_expint_cf(n, x) * (-x).exp())
    }
}

/// Overflow-safe `e^x·E_n(x)`.
pub fn scaled_expint(n: u32, x: f64) -> Result<f64> {
    check_expint_args("scaled_expint", n, x)?;
    if x < 1.0 {
        Ok(expint_series(n, x) * x.exp())
    } else {
        Ok(scaled_expint_cf(n, x))
    }
}

/// Γ(−k, x) for non-negative integer k, via `Γ(−k, x) = x^{−k}·E_{k+1}(x)`.
pub fn gamma_upper_negint(k: u32, x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain(
            "gamma_upper_negint",
            format!("x must be positive, got {x}"),
        ));
    }
    Ok(x.powi(-(k as i32)) * expint_en(k + 1, x)?)
}

/// `ln Γ(a + b) − ln Γ(a)` without the cancellation of subtracting two huge
/// log-gammas when `a` is large.
pub fn ln_gamma_ratio(a: f64, b: f64) -> f64 {
    if a < 10.0 {
        return ln_gamma(a + b) - ln_gamma(a);
    }
    let stirling_tail = |z: f64| {
        let z2 = z * z;
        (1.0 / 12.0 - (1.0 / 360.0 - (1.0 / 1260.0 - 1.0 / (1680.0 * z2)) / z2) / z2) / z
    };
    (a - 0.5) * (b / a).ln_1p() + b * (a + b).ln() - b + stirling_tail(a + b) - stirling_tail(a)
}

/// `ln β(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(
            "beta_fn",
            format!("arguments must be positive, got ({a}, {b})"),
        ));
    }
    let (small, large) = if a <= b { (a, b) } else { (b, a) };
    Ok(ln_gamma(small) - ln_gamma_ratio(large, small))
}

/// β(a, b) = Γ(a)Γ(b)/Γ(a+b), evaluated in log space.
pub fn beta_fn(a: f64, b: f64) -> Result<f64> {
    ln_beta(a, b).map(f64::exp)
}
