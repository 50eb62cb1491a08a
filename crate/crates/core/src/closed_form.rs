//! Closed-form ergodic rates, bounds and approximations.
//!
//! Rates are in bps/Hz. Internally everything is in nats and converted once
//! by `log2(e)`.

use std::f64::consts::LOG2_E;

use serde::{Deserialize, Serialize};

use crate::channel::ScenarioConfig;
use crate::codebook::quantization_delta;
use crate::error::{Error, Result};
use crate::numerics::quadrature::integrate_with_breakpoints;
use crate::numerics::{integral_i2, integral_i3, integrate_log_scale, scaled_expint, QuadratureSpec};

/// Above this error amplification the partial-fraction forms give way to
/// direct quadrature of the equivalent Laplace-transform integral.
const MAX_CANCELLATION: f64 = 1e6;

/// Rate of a multi-user scheme: one entry per user and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuRate {
    pub per_user: Vec<f64>,
    pub sum: f64,
}

impl MuRate {
    fn from_per_user(per_user: Vec<f64>) -> Self {
        let sum = per_user.iter().sum();
        Self { per_user, sum }
    }

    fn uniform(value: f64, n_users: usize) -> Self {
        Self::from_per_user(vec![value; n_users])
    }
}

fn check_snr(func: &'static str, snr: f64) -> Result<()> {
    if !(snr > 0.0) || !snr.is_finite() {
        return Err(Error::domain(
            func,
            format!("snr must be positive and finite, got {snr}"),
        ));
    }
    Ok(())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `I3(a, b, m)`, merging the poles when `b` is within `1e-9` of 1.
fn i3_or_merged(a: f64, b: f64, m: u32) -> Result<f64> {
    match integral_i3(a, b, m) {
        Err(Error::DegeneratePole { .. }) => integral_i2(a, 1.0, m + 1),
        other => other,
    }
}

/// Perfect-CSIT eigen-beamforming: `log2(e)·Σ_{k<Nt} e^{1/P}E_{k+1}(1/P)`.
pub fn r_bf_perfect(snr_linear: f64, n_tx: usize) -> Result<f64> {
    check_snr("r_bf_perfect", snr_linear)?;
    let x = 1.0 / snr_linear;
    let mut sum = 0.0;
    for k in 0..n_tx as u32 {
        sum += scaled_expint(k + 1, x)?;
    }
    Ok(LOG2_E * sum)
}

/// Per-user perfect-CSIT ZF rate `log2(e)·e^{U/P}E1(U/P)`.
pub fn r_zf_perfect_per_user(snr_linear: f64, n_users: usize) -> Result<f64> {
    check_snr("r_zf_perfect", snr_linear)?;
    Ok(LOG2_E * scaled_expint(1, n_users as f64 / snr_linear)?)
}

pub fn r_zf_perfect(snr_linear: f64, n_users: usize) -> Result<MuRate> {
    Ok(MuRate::uniform(r_zf_perfect_per_user(snr_linear, n_users)?, n_users))
}

fn delta_or_zero(n_tx: usize, bits: Option<u32>) -> Result<f64> {
    match bits {
        Some(b) if n_tx >= 2 => quantization_delta(n_tx, b),
        _ => Ok(0.0),
    }
}

/// Upper bound on the average BF SNR with quantized, delayed CSIT:
/// `P·Nt·(ρ²(1 − (Nt−1)/Nt·δ) + ε²/Nt)`.
pub fn avg_snr_bf_qd(cfg: &ScenarioConfig) -> Result<f64> {
    cfg.validate()?;
    let (rho, eps_sq) = cfg.user_model(0)?;
    let nt = cfg.n_tx as f64;
    let delta = delta_or_zero(cfg.n_tx, cfg.feedback_bits)?;
    let quant = 1.0 - (nt - 1.0) / nt * delta;
    Ok(cfg.snr_linear() * nt * (rho * rho * quant + eps_sq / nt))
}

/// Limited-feedback BF rate with an RVQ codebook of `2^bits` entries.
///
/// The correction integral is evaluated in `y = 1 − x`, where the codebook
/// weight `(1 − y^{Nt−1})^{2^B}` switches on around `y ≈ δ`.
pub fn r_bf_quantized(snr_linear: f64, n_tx: usize, bits: u32, quad: &QuadratureSpec) -> Result<f64> {
    let perfect = r_bf_perfect(snr_linear, n_tx)?;
    if n_tx < 2 {
        return Ok(perfect);
    }
    quad.validate()?;
    let nt = n_tx as f64;
    let size = 2f64.powi(bits as i32);
    let order = (n_tx - 1) as i32;
    let nu = n_tx as u32 + 1;
    let integrand = |y: f64| {
        let x = 1.0 - y;
        if !(x > 0.0) || !(y > 0.0) {
            return 0.0;
        }
        let log_weight = size * (-y.powi(order)).ln_1p();
        if log_weight < -745.0 {
            return 0.0;
        }
        let z = 1.0 / (snr_linear * x);
        // Domain errors are impossible here: z > 0 and n >= 2.
        let tail = scaled_expint(nu, z).unwrap_or(0.0);
        log_weight.exp() * nt / x * tail
    };
    let delta = quantization_delta(n_tx, bits)?;
    let cuts: Vec<f64> = [0.25, 0.5, 1.0, 2.0, 4.0].iter().map(|k| k * delta).collect();
    let correction = integrate_with_breakpoints(integrand, 0.0, 1.0, &cuts, quad)?.value;
    Ok((perfect - LOG2_E * correction).max(0.0))
}

/// Quantized-and-delayed BF, approximated as limited feedback at SNR `ρ²P`.
/// Without feedback bits this is perfect-direction BF at `ρ²P`.
pub fn r_bf_qd_approx(cfg: &ScenarioConfig) -> Result<f64> {
    cfg.validate()?;
    let (rho, _) = cfg.user_model(0)?;
    let snr = rho * rho * cfg.snr_linear();
    if snr == 0.0 {
        return Ok(0.0);
    }
    match cfg.feedback_bits {
        Some(bits) => r_bf_quantized(snr, cfg.n_tx, bits, &QuadratureSpec::default()),
        None => r_bf_perfect(snr, cfg.n_tx),
    }
}

/// Parameters of the BF-with-delay SNR `η1·χ²_{2Nt} + η2·χ²_2` (unit-mean
/// chi-square components).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BfDelayParams {
    pub eta1: f64,
    pub eta2: f64,
    pub a0: f64,
    pub n_tx: usize,
}

impl BfDelayParams {
    pub fn new(snr_linear: f64, rho: f64, eps_sq: f64, n_tx: usize) -> Result<Self> {
        check_snr("BfDelayParams", snr_linear)?;
        let eta1 = snr_linear * rho * rho;
        let eta2 = snr_linear * eps_sq;
        if !(eta1 > 0.0 && eta2 > 0.0) || eta1 == eta2 || n_tx == 0 {
            return Err(Error::domain(
                "BfDelayParams",
                format!("need distinct positive eta1, eta2 and n_tx >= 1, got {eta1}, {eta2}, {n_tx}"),
            ));
        }
        Ok(Self {
            eta1,
            eta2,
            a0: eta2 / (eta2 - eta1),
            n_tx,
        })
    }

    /// Error amplification of the partial-fraction evaluation.
    pub fn cancellation(&self) -> f64 {
        self.a0.abs().powi(self.n_tx as i32).max(1.0)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let nt = self.n_tx;
        let r = x / self.eta1;
        let mut tail = 0.0;
        for i in 0..nt {
            let mut poly = 0.0;
            let mut term = 1.0;
            for k in 0..=i {
                poly += term;
                term *= r / (k + 1) as f64;
            }
            tail += self.a0.powi((nt - 1 - i) as i32) * poly;
        }
        let survival = self.a0.powi(nt as i32) * (-x / self.eta2).exp() + (1.0 - self.a0) * (-r).exp() * tail;
        (1.0 - survival).clamp(0.0, 1.0)
    }

    /// `E[ln(1 + X)]` by partial fractions.
    fn mean_log_closed(&self) -> Result<f64> {
        let nt = self.n_tx;
        let x1 = 1.0 / self.eta1;
        let tails: Vec<f64> = (0..nt as u32)
            .map(|k| scaled_expint(k + 1, x1))
            .collect::<Result<_>>()?;
        let mut sum = 0.0;
        let mut prefix = 0.0;
        for i in 0..nt {
            prefix += tails[i];
            sum += self.a0.powi((nt - 1 - i) as i32) * prefix;
        }
        Ok(self.a0.powi(nt as i32) * integral_i2(1.0 / self.eta2, 1.0, 1)? + (1.0 - self.a0) * sum)
    }

    /// `E[ln(1 + X)] = ∫ e^{−s}(1 − E e^{−sX})/s ds` by quadrature.
    fn mean_log_quadrature(&self) -> Result<f64> {
        let (e1, e2, nt) = (self.eta1, self.eta2, self.n_tx as f64);
        let mean = nt * e1 + e2;
        let f = |s: f64| {
            let log_mgf = -nt * (s * e1).ln_1p() - (s * e2).ln_1p();
            (-s).exp() * -(log_mgf.exp_m1()) / s
        };
        let spec = QuadratureSpec::new(1e-12, 1e-10, 4000)?;
        Ok(integrate_log_scale(f, 1e-12 / mean, 50.0, &spec)?.value)
    }
}

/// BF with one-symbol delayed, unquantized CSIT.
pub fn r_bf_delay(cfg: &ScenarioConfig) -> Result<f64> {
    cfg.validate()?;
    let (rho, eps_sq) = cfg.user_model(0)?;
    let snr = cfg.snr_linear();
    bf_delay_rate(snr, rho, eps_sq, cfg.n_tx)
}

pub fn bf_delay_rate(snr_linear: f64, rho: f64, eps_sq: f64, n_tx: usize) -> Result<f64> {
    check_snr("r_bf_delay", snr_linear)?;
    if eps_sq <= 0.0 {
        return r_bf_perfect(snr_linear * rho * rho, n_tx);
    }
    if rho == 0.0 {
        return Ok(LOG2_E * scaled_expint(1, 1.0 / (snr_linear * eps_sq))?);
    }
    let eta1 = snr_linear * rho * rho;
    let eta2 = snr_linear * eps_sq;
    if eta1 == eta2 {
        let params = BfDelayParams {
            eta1,
            eta2,
            a0: f64::INFINITY,
            n_tx,
        };
        return Ok(LOG2_E * params.mean_log_quadrature()?);
    }
    let params = BfDelayParams::new(snr_linear, rho, eps_sq, n_tx)?;
    let nats = if params.cancellation() > MAX_CANCELLATION {
        params.mean_log_quadrature()?
    } else {
        params.mean_log_closed()?
    };
    Ok(LOG2_E * nats)
}

/// Average noise plus interference of one ZF user:
/// `1 + (U−1)(P/U)(ρ²·U/(U−1)·δ + ε²)`.
pub fn delta_zf_interference(cfg: &ScenarioConfig, rho: f64, eps_sq: f64) -> Result<f64> {
    cfg.validate()?;
    let u = cfg.n_users as f64;
    if cfg.n_users < 2 {
        return Ok(1.0);
    }
    let delta = delta_or_zero(cfg.n_tx, cfg.feedback_bits)?;
    let quant = u / (u - 1.0) * delta;
    Ok(1.0 + (u - 1.0) * cfg.snr_linear() / u * (rho * rho * quant + eps_sq))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status", content = "bits")]
pub enum BitsRequirement {
    Feasible(f64),
    /// Delay alone already costs more than the allowed loss.
    Infeasible,
}

/// Feedback bits per user that keep the ZF interference at `delta0`,
/// i.e. a rate loss of `log2(delta0)` per user.
pub fn required_bits(
    delta0: f64,
    snr_linear: f64,
    rho_sq: f64,
    n_tx: usize,
    n_users: usize,
) -> Result<BitsRequirement> {
    if !(delta0 > 1.0) {
        return Err(Error::domain(
            "required_bits",
            format!("delta0 must exceed 1, got {delta0}"),
        ));
    }
    check_snr("required_bits", snr_linear)?;
    if !(rho_sq > 0.0 && rho_sq <= 1.0) || n_tx < 2 || n_users < 1 {
        return Err(Error::domain(
            "required_bits",
            format!("need rho_sq in (0, 1], n_tx >= 2, n_users >= 1; got {rho_sq}, {n_tx}, {n_users}"),
        ));
    }
    let u = n_users as f64;
    let bracket = (delta0 - 1.0) / (rho_sq * snr_linear) - (u - 1.0) / u * (1.0 / rho_sq - 1.0);
    if bracket <= 0.0 {
        return Ok(BitsRequirement::Infeasible);
    }
    Ok(BitsRequirement::Feasible(-((n_tx - 1) as f64) * bracket.log2()))
}

/// `R_ZF − Σ_u log2 Δ_u`, floored at zero.
pub fn r_zf_lower_bound(cfg: &ScenarioConfig) -> Result<f64> {
    cfg.validate()?;
    let snr = cfg.snr_linear();
    let mut sum = r_zf_perfect(snr, cfg.n_users)?.sum;
    for u in 0..cfg.n_users {
        let (rho, eps_sq) = cfg.user_model(u)?;
        sum -= delta_zf_interference(cfg, rho, eps_sq)?.log2();
    }
    Ok(sum.max(0.0))
}

/// Density of `δ1·Y1 + δ2·Y2` with `Y1, Y2 ~ Gamma(M, 1)` written as
/// `Σ_j Σ_i a_i^{(j)} y^i e^{−y/δ_j}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZfApproxParams {
    pub alpha: f64,
    pub beta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub m: usize,
    pub a1_coeffs: Vec<f64>,
    pub a2_coeffs: Vec<f64>,
}

impl ZfApproxParams {
    pub fn new(alpha: f64, beta: f64, delta1: f64, delta2: f64, m: usize) -> Result<Self> {
        if !(delta1 > 0.0 && delta2 > 0.0) || delta1 == delta2 || m == 0 {
            return Err(Error::domain(
                "ZfApproxParams",
                format!("need distinct positive scales and m >= 1, got {delta1}, {delta2}, {m}"),
            ));
        }
        let coeffs = |d1: f64, d2: f64| -> Vec<f64> {
            (0..m)
                .map(|i| {
                    let comb = factorial(2 * (m - 1) - i) / (factorial(i) * factorial(m - 1 - i) * factorial(m - 1));
                    comb * d1.powi(-(i as i32 + 1))
                        * (d1 / (d1 - d2)).powi(m as i32)
                        * (d2 / (d2 - d1)).powi((m - 1 - i) as i32)
                })
                .collect()
        };
        Ok(Self {
            alpha,
            beta,
            delta1,
            delta2,
            m,
            a1_coeffs: coeffs(delta1, delta2),
            a2_coeffs: coeffs(delta2, delta1),
        })
    }

    /// Error amplification of the partial-fraction evaluation.
    pub fn cancellation(&self) -> f64 {
        let hi = self.delta1.max(self.delta2);
        (hi / (self.delta1 - self.delta2).abs()).powi(2 * self.m as i32 - 1)
    }

    pub fn pdf(&self, y: f64) -> f64 {
        if !(y >= 0.0) {
            return 0.0;
        }
        let mut sum = 0.0;
        for (coeffs, d) in [(&self.a1_coeffs, self.delta1), (&self.a2_coeffs, self.delta2)] {
            let decay = (-y / d).exp();
            for (i, a) in coeffs.iter().enumerate() {
                sum += a * y.powi(i as i32) * decay;
            }
        }
        sum
    }

    /// `Σ_j Σ_i a_i^{(j)} ∫ y^i e^{−y/δ_j} dy`, which is 1 for a density.
    pub fn total_mass(&self) -> f64 {
        let mut sum = 0.0;
        for (coeffs, d) in [(&self.a1_coeffs, self.delta1), (&self.a2_coeffs, self.delta2)] {
            for (i, a) in coeffs.iter().enumerate() {
                sum += a * factorial(i) * d.powi(i as i32 + 1);
            }
        }
        sum
    }

    fn mean_log_closed(&self) -> Result<f64> {
        let ratio = self.alpha / self.beta;
        let mut sum = 0.0;
        for (coeffs, d) in [(&self.a1_coeffs, self.delta1), (&self.a2_coeffs, self.delta2)] {
            for (i, a) in coeffs.iter().enumerate() {
                let i3 = i3_or_merged(1.0 / self.alpha, ratio / d, i as u32 + 1)?;
                sum += a * factorial(i) * ratio.powi(i as i32 + 1) * i3;
            }
        }
        Ok(sum)
    }
}

/// `E[ln(1 + αZ/(1 + β(δ1·Y1 + δ2·Y2)))]` for `Z ~ Exp(1)` and independent
/// `Y1, Y2 ~ Gamma(M, 1)`, by quadrature of
/// `∫ e^{−x/α} (1 + xβδ1/α)^{−M} (1 + xβδ2/α)^{−M} / (1 + x) dx`.
pub fn zf_mean_log_quadrature(alpha: f64, beta: f64, delta1: f64, delta2: f64, m: usize) -> Result<f64> {
    let (c1, c2, mf) = (beta * delta1 / alpha, beta * delta2 / alpha, m as f64);
    let f = |x: f64| {
        let log_mgf = -mf * ((x * c1).ln_1p() + (x * c2).ln_1p());
        (-x / alpha + log_mgf).exp() / (1.0 + x)
    };
    let spec = QuadratureSpec::new(1e-12, 1e-10, 4000)?;
    Ok(integrate_log_scale(f, 1e-12, 50.0 * alpha, &spec)?.value)
}

/// `E[ln(1 + αZ/(1 + β'·Y))]` with `Y ~ Gamma(M, 1)`:
/// `(α/β')^M·I3(1/α, α/β', M)`.
fn zf_single_interference(alpha: f64, beta_eff: f64, m: usize) -> Result<f64> {
    if beta_eff == 0.0 {
        return scaled_expint(1, 1.0 / alpha);
    }
    let ratio = alpha / beta_eff;
    Ok(ratio.powi(m as i32) * i3_or_merged(1.0 / alpha, ratio, m as u32)?)
}

fn require_mu(cfg: &ScenarioConfig, func: &'static str) -> Result<()> {
    if cfg.n_tx < 2 || cfg.n_users != cfg.n_tx {
        return Err(Error::Config(format!(
            "{func} needs n_users = n_tx >= 2, got n_tx = {}, n_users = {}",
            cfg.n_tx, cfg.n_users
        )));
    }
    Ok(())
}

/// Per-user ZF rate with quantized and delayed CSIT, treating the
/// quantization and delay interference as independent Gamma terms.
pub fn zf_qd_user_rate(snr_linear: f64, n_users: usize, n_tx: usize, delta1: f64, delta2: f64) -> Result<f64> {
    check_snr("r_zf_qd_approx", snr_linear)?;
    let alpha = snr_linear / n_users as f64;
    let beta = alpha;
    let m = n_tx - 1;
    let nats = if delta1 == 0.0 || delta2 == 0.0 {
        zf_single_interference(alpha, beta * (delta1 + delta2), m)?
    } else if delta1 == delta2 {
        let b = 1.0 / delta1;
        delta1.powi(-2 * m as i32) * i3_or_merged(1.0 / alpha, b, 2 * m as u32)?
    } else {
        let params = ZfApproxParams::new(alpha, beta, delta1, delta2, m)?;
        if params.cancellation() > MAX_CANCELLATION {
            zf_mean_log_quadrature(alpha, beta, delta1, delta2, m)?
        } else {
            params.mean_log_closed()?
        }
    };
    Ok(LOG2_E * nats)
}

/// ZF rate with quantized and delayed CSIT. Without feedback bits only the
/// delay term remains.
pub fn r_zf_qd_approx(cfg: &ScenarioConfig) -> Result<MuRate> {
    cfg.validate()?;
    require_mu(cfg, "r_zf_qd_approx")?;
    let delta = delta_or_zero(cfg.n_tx, cfg.feedback_bits)?;
    let per_user = (0..cfg.n_users)
        .map(|u| {
            let (rho, eps_sq) = cfg.user_model(u)?;
            zf_qd_user_rate(cfg.snr_linear(), cfg.n_users, cfg.n_tx, rho * rho * delta, eps_sq)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MuRate::from_per_user(per_user))
}

/// Per-user ZF rate with delayed, unquantized CSIT (interference
/// `ε²·Gamma(Nt−1, 1)` per user).
pub fn r_zf_delay(cfg: &ScenarioConfig) -> Result<MuRate> {
    cfg.validate()?;
    require_mu(cfg, "r_zf_delay")?;
    let alpha = cfg.snr_linear() / cfg.n_users as f64;
    let per_user = (0..cfg.n_users)
        .map(|u| {
            let (_, eps_sq) = cfg.user_model(u)?;
            Ok(LOG2_E * zf_single_interference(alpha, alpha * eps_sq, cfg.n_tx - 1)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MuRate::from_per_user(per_user))
}

/// Per-user ZF rate with quantized, undelayed CSIT (interference
/// `δ·Gamma(Nt−1, 1)` per user).
pub fn r_zf_quantized(snr_linear: f64, n_tx: usize, bits: u32) -> Result<f64> {
    check_snr("r_zf_quantized", snr_linear)?;
    let alpha = snr_linear / n_tx as f64;
    let delta = quantization_delta(n_tx, bits)?;
    Ok(LOG2_E * zf_single_interference(alpha, alpha * delta, n_tx - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn db(x: f64) -> f64 {
        10f64.powf(x / 10.0)
    }

    #[test]
    fn perfect_csit_rates() {
        assert!((r_bf_perfect(1.0, 1).unwrap() - 0.8604).abs() < 1e-3);
        for p in [0.1, 1.0, 10.0] {
            assert_relative_eq!(
                r_bf_perfect(p, 1).unwrap(),
                r_zf_perfect_per_user(p, 1).unwrap(),
                max_relative = 1e-14
            );
        }
        assert!((r_zf_perfect_per_user(4.0, 4).unwrap() - 0.86036).abs() < 1e-4);
        let hi = r_zf_perfect_per_user(1e4, 4).unwrap();
        let asym = (1e4f64 / 4.0).log2() - 0.577_215_664_901_532_9 * LOG2_E;
        assert!((hi - asym).abs() < 0.01);
        let mut last = f64::INFINITY;
        for p in [1.0, 0.1, 1e-2, 1e-4] {
            let s = r_zf_perfect(p, 4).unwrap().sum;
            assert!(s < last && s > 0.0);
            last = s;
        }
        assert!(last < 1e-3);
        assert!(r_bf_perfect(0.0, 4).is_err());
    }

    #[test]
    fn bf_perfect_survives_high_snr() {
        let r = r_bf_perfect(1e6, 4).unwrap();
        assert!(r.is_finite() && r > 19.0 && r < 23.0);
    }

    #[test]
    fn bf_average_snr_bound() {
        let mut cfg = ScenarioConfig::delay_only(4, 1, 10.0, 0.0).with_bits(60);
        assert_relative_eq!(avg_snr_bf_qd(&cfg).unwrap(), 40.0, max_relative = 1e-5);
        cfg.doppler_ts = Some(0.04);
        cfg.feedback_bits = Some(18);
        let (rho, eps) = cfg.csit_model().unwrap();
        let want = 10.0 * 4.0 * (rho * rho * (1.0 - 0.75 * 2f64.powi(-6)) + eps / 4.0);
        assert_relative_eq!(avg_snr_bf_qd(&cfg).unwrap(), want, max_relative = 1e-14);
    }

    #[test]
    fn quantized_bf_limits() {
        let q = QuadratureSpec::default();
        // The quantization loss shrinks like δ; the B = 30 value comes from
        // an independent scipy quadrature of the same integral.
        let perfect = r_bf_perfect(10.0, 4).unwrap();
        let gap30 = perfect - r_bf_quantized(10.0, 4, 30, &q).unwrap();
        assert!((gap30 - 0.0012186781393070945).abs() < 1e-6, "{gap30}");
        let gap40 = perfect - r_bf_quantized(10.0, 4, 40, &q).unwrap();
        assert!(gap40 > 0.0 && gap40 < 2e-4);
        let mut last = 0.0;
        for b in [0, 2, 4, 8, 12, 16] {
            let r = r_bf_quantized(10.0, 4, b, &q).unwrap();
            assert!(r > last);
            last = r;
        }
        assert_eq!(r_bf_quantized(10.0, 1, 3, &q).unwrap(), r_bf_perfect(10.0, 1).unwrap());
    }

    #[test]
    fn quantized_delayed_bf_reduces_to_quantized() {
        let cfg = ScenarioConfig::delay_only(4, 1, 10.0, 0.0).with_bits(10);
        let q = r_bf_quantized(10.0, 4, 10, &QuadratureSpec::default()).unwrap();
        assert_relative_eq!(r_bf_qd_approx(&cfg).unwrap(), q, max_relative = 1e-12);
        let mut last = f64::INFINITY;
        for f in [0.0, 0.02, 0.05, 0.1] {
            let cfg = ScenarioConfig::delay_only(4, 1, 10.0, f).with_bits(12);
            let r = r_bf_qd_approx(&cfg).unwrap();
            assert!(r <= last);
            last = r;
        }
    }

    #[test]
    fn bf_delay_limits() {
        let p = 10.0;
        let near = bf_delay_rate(p, (1.0f64 - 1e-8).sqrt(), 1e-8, 4).unwrap();
        assert!((near - r_bf_perfect(p, 4).unwrap()).abs() < 1e-3);
        // With one antenna the SNR is a sum of two exponentials of means
        // 0.36 and 0.64 (cross term dropped).
        let siso = bf_delay_rate(1.0, 0.6, 0.64, 1).unwrap();
        assert!((siso - 0.917104034853301).abs() < 1e-9);
        let stale = bf_delay_rate(p, 0.0, 1.0, 4).unwrap();
        assert_relative_eq!(stale, r_zf_perfect_per_user(p, 1).unwrap(), max_relative = 1e-14);
    }

    #[test]
    fn bf_delay_routes_agree() {
        for (p, rho) in [(10.0, 0.98427), (1000.0, 0.9), (db(45.0), 0.995), (3.0, 0.3)] {
            let eps = 1.0 - rho * rho;
            let params = BfDelayParams::new(p, rho, eps, 4).unwrap();
            assert_relative_eq!(
                params.mean_log_closed().unwrap(),
                params.mean_log_quadrature().unwrap(),
                max_relative = 1e-8
            );
        }
        // Equal branch weights go through quadrature and stay continuous.
        let half = 0.5f64.sqrt();
        let at = bf_delay_rate(10.0, half, 0.5, 4).unwrap();
        let near = bf_delay_rate(10.0, half * (1.0 + 1e-3), 1.0 - 0.5 * (1.0 + 1e-3f64).powi(2), 4).unwrap();
        assert!((at - near).abs() < 1e-2);
    }

    #[test]
    fn bf_delay_cdf_is_a_cdf() {
        let params = BfDelayParams::new(10.0, 0.98427, 1.0 - 0.98427f64.powi(2), 4).unwrap();
        assert_eq!(params.cdf(0.0), 0.0);
        assert!((params.cdf(1e4) - 1.0).abs() < 1e-12);
        let mut last = 0.0;
        for k in 1..=100 {
            let f = params.cdf(k as f64);
            assert!(f >= last);
            last = f;
        }
    }

    #[test]
    fn zf_interference_formula() {
        let cfg = ScenarioConfig::delay_only(4, 4, 10.0, 0.0).with_bits(10);
        let d = delta_zf_interference(&cfg, 1.0, 0.0).unwrap();
        assert_relative_eq!(d, 1.0 + 10.0 * 2f64.powf(-10.0 / 3.0), max_relative = 1e-14);
        let cfg = ScenarioConfig::delay_only(4, 4, 10.0, 0.0).with_bits(200);
        assert!((delta_zf_interference(&cfg, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-12);
        let cfg = ScenarioConfig::delay_only(4, 4, 10.0, 0.0).with_bits(10);
        let want = 1.0 + 3.0 * 2.5 * (0.96879 * (4.0 / 3.0) * 2f64.powf(-10.0 / 3.0) + 0.03121);
        assert_relative_eq!(
            delta_zf_interference(&cfg, 0.96879f64.sqrt(), 0.03121).unwrap(),
            want,
            max_relative = 1e-14
        );
    }

    #[test]
    fn feedback_bits_requirement() {
        let p = 100.0;
        match required_bits(2.0, p, 1.0, 4, 4).unwrap() {
            BitsRequirement::Feasible(b) => assert_relative_eq!(b, 3.0 * (p / 1.0).log2(), max_relative = 1e-14),
            BitsRequirement::Infeasible => panic!("feasible at rho = 1"),
        }
        let BitsRequirement::Feasible(b) = required_bits(2.0, p, 0.999, 4, 4).unwrap() else {
            panic!("expected a finite bit count");
        };
        assert!(b > 0.0 && b.is_finite());
        let rho = 0.999f64.sqrt();
        let mut cfg = ScenarioConfig::delay_only(4, 4, 20.0, 0.0);
        cfg.per_user_rho = Some(vec![rho; 4]);
        let delta = quantization_delta(4, 0).unwrap().powf(1.0) * 2f64.powf(-b / 3.0);
        let loss = 1.0 + 100.0 * 0.999 * delta + 0.75 * 100.0 * 0.001;
        assert_relative_eq!(loss, 2.0, max_relative = 1e-12);
        assert_eq!(required_bits(1.01, p, 0.9, 4, 4).unwrap(), BitsRequirement::Infeasible);
        assert!(required_bits(1.0, p, 0.9, 4, 4).is_err());
    }

    #[test]
    fn lower_bound_pieces() {
        let cfg = ScenarioConfig::delay_only(4, 4, 10.0, 0.0);
        assert_relative_eq!(
            r_zf_lower_bound(&cfg).unwrap(),
            r_zf_perfect(10.0, 4).unwrap().sum,
            max_relative = 1e-14
        );
        let cfg = cfg.with_bits(10);
        let want = r_zf_perfect(10.0, 4).unwrap().sum - 4.0 * (1.0 + 10.0 * 2f64.powf(-10.0 / 3.0)).log2();
        assert_relative_eq!(r_zf_lower_bound(&cfg).unwrap(), want, max_relative = 1e-12);
        for snr in [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0] {
            let cfg = ScenarioConfig::delay_only(4, 4, snr, 0.037).with_bits(10);
            assert!(r_zf_lower_bound(&cfg).unwrap() <= r_zf_qd_approx(&cfg).unwrap().sum);
        }
    }

    #[test]
    fn hypoexponential_coefficients() {
        let p = ZfApproxParams::new(1.0, 1.0, 0.1, 0.03, 1).unwrap();
        assert_relative_eq!(p.a1_coeffs[0], 1.0 / 0.07, max_relative = 1e-12);
        assert_relative_eq!(p.a2_coeffs[0], -1.0 / 0.07, max_relative = 1e-12);
        for m in 1..=7 {
            for (d1, d2) in [(0.1, 0.03), (0.01, 0.2), (0.05, 0.03)] {
                let p = ZfApproxParams::new(1.0, 1.0, d1, d2, m).unwrap();
                assert!((p.total_mass() - 1.0).abs() < 1e-6, "m={m} {d1} {d2}");
            }
        }
    }

    #[test]
    fn zf_routes_agree_with_quadrature() {
        for (p, d1, d2, m) in [
            (10.0, 0.0992 * 0.93, 0.031, 3usize),
            (1000.0, 0.01, 0.0669, 3),
            (2.5, 0.3, 0.05, 1),
            (50.0, 0.002, 0.5, 5),
        ] {
            let closed = zf_qd_user_rate(p * 4.0, 4, m + 1, d1, d2).unwrap() / LOG2_E;
            let quad = zf_mean_log_quadrature(p, p, d1, d2, m).unwrap();
            assert_relative_eq!(closed, quad, max_relative = 1e-7);
        }
        // Single-interference and confluent branches.
        for (d1, d2) in [(0.0, 0.04), (0.04, 0.0), (0.04, 0.04)] {
            let closed = zf_qd_user_rate(40.0, 4, 4, d1, d2).unwrap() / LOG2_E;
            let quad = zf_mean_log_quadrature(10.0, 10.0, d1, d2, 3).unwrap();
            assert_relative_eq!(closed, quad, max_relative = 1e-7);
        }
        let merged = zf_qd_user_rate(40.0, 4, 4, 0.0, 1.0).unwrap() / LOG2_E;
        let quad = zf_mean_log_quadrature(10.0, 10.0, 0.0, 1.0, 3).unwrap();
        assert_relative_eq!(merged, quad, max_relative = 1e-7);
    }

    #[test]
    fn zf_two_antennas_against_direct_quadrature() {
        // Triple integral over (z, y1, y2) evaluated with scipy.
        let r = zf_qd_user_rate(10.0, 2, 2, 0.3 * 0.0992, 0.05).unwrap();
        assert!((r - 1.8504484027953247).abs() < 1e-4, "{r}");
    }

    #[test]
    fn zf_delay_ceiling() {
        // E log2(1 + z/(ε²y)), z ~ Exp(1), y ~ Gamma(3, 1), ε² at fd·Ts = 0.04.
        let cfg = ScenarioConfig::delay_only(4, 4, 60.0, 0.04);
        let r = r_zf_delay(&cfg).unwrap().per_user[0];
        assert!((r - 3.219233507758646).abs() < 0.05, "{r}");
    }

    #[test]
    fn zf_interference_free_limits() {
        let cfg = ScenarioConfig::delay_only(4, 4, 10.0, 0.0);
        let perfect = r_zf_perfect_per_user(10.0, 4).unwrap();
        assert_relative_eq!(r_zf_qd_approx(&cfg).unwrap().per_user[0], perfect, max_relative = 1e-12);
        let tiny = zf_qd_user_rate(10.0, 4, 4, 1e-9, 1e-10).unwrap();
        assert!((tiny - perfect).abs() < 1e-3);
        let mut cfg = ScenarioConfig::delay_only(4, 4, 10.0, 0.0);
        cfg.per_user_rho = Some(vec![(1.0f64 - 1e-10).sqrt(); 4]);
        assert!((r_zf_delay(&cfg).unwrap().per_user[0] - perfect).abs() < 1e-3);
    }

    #[test]
    fn zf_saturates_and_bf_keeps_growing() {
        let at = |snr: f64| ScenarioConfig::delay_only(4, 4, snr, 0.037).with_bits(10);
        let s50 = r_zf_qd_approx(&at(50.0)).unwrap().sum;
        let s60 = r_zf_qd_approx(&at(60.0)).unwrap().sum;
        assert!(s60 - s50 < 0.05 && s60 >= s50);
        let bf = |snr: f64| r_bf_qd_approx(&ScenarioConfig::delay_only(4, 1, snr, 0.037).with_bits(10)).unwrap();
        let slope = (bf(60.0) - bf(40.0)) / (20.0 / 3.0103);
        assert!((0.9..=1.1).contains(&slope), "slope {slope}");
    }

    #[test]
    fn closed_forms_finite_on_the_grid() {
        for &nt in &[2usize, 4, 6, 8] {
            for &bits in &[0u32, 6, 13, 20, 26] {
                for &f in &[0.0, 0.02, 0.05, 0.1, 0.2] {
                    for &snr in &[-10.0, 10.0, 30.0, 60.0] {
                        let mu = ScenarioConfig::delay_only(nt, nt, snr, f).with_bits(bits);
                        let su = ScenarioConfig::delay_only(nt, 1, snr, f).with_bits(bits);
                        let values = [
                            r_bf_qd_approx(&su).unwrap(),
                            r_bf_delay(&su).unwrap(),
                            r_zf_qd_approx(&mu).unwrap().sum,
                            r_zf_delay(&mu).unwrap().sum,
                            r_zf_lower_bound(&mu).unwrap(),
                        ];
                        for v in values {
                            assert!(
                                v.is_finite() && v >= 0.0,
                                "nt={nt} B={bits} f={f} snr={snr}: {values:?}"
                            );
                        }
                    }
                }
            }
        }
    }
}
