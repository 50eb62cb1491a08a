//! Scenario configuration and the Gauss–Markov time-varying channel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CVec;
use crate::numerics::random::complex_normal;
use crate::numerics::{bessel_j0, RngStream};

pub const SPEED_OF_LIGHT_M_S: f64 = 2.998e8;

/// Which imperfection produces the CSIT error vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsitVariant {
    #[default]
    Delay,
    Estimation,
    AnalogFeedback,
    AnalogFeedbackPrediction,
}

/// Parameters of the non-delay CSIT variants. Only the fields the chosen
/// variant needs are read.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariantParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_symbols: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pilot_snr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uplink_uses: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uplink_snr: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prediction_steps: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter_mse: Option<f64>,
}

fn default_delay_symbols() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_tx: usize,
    pub n_users: usize,
    pub snr_db: f64,
    /// Feedback bits per user; absent means unquantized CSIT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feedback_bits: Option<u32>,
    /// Normalized Doppler fd·Ts. When absent it is derived from velocity,
    /// carrier and symbol period, or taken as 0 if those are missing too.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doppler_ts: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbol_period_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carrier_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_kmh: Option<f64>,
    #[serde(default)]
    pub csit_variant: CsitVariant,
    #[serde(default)]
    pub variant_params: VariantParams,
    /// Per-user channel correlation, overriding the common value.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_user_rho: Option<Vec<f64>>,
    #[serde(default = "default_delay_symbols")]
    pub delay_symbols: u32,
}

impl ScenarioConfig {
    /// Delay-only scenario with a given normalized Doppler.
    pub fn delay_only(n_tx: usize, n_users: usize, snr_db: f64, doppler_ts: f64) -> Self {
        Self {
            n_tx,
            n_users,
            snr_db,
            feedback_bits: None,
            doppler_ts: Some(doppler_ts),
            symbol_period_s: None,
            carrier_hz: None,
            velocity_kmh: None,
            csit_variant: CsitVariant::Delay,
            variant_params: VariantParams::default(),
            per_user_rho: None,
            delay_symbols: 1,
        }
    }

    pub fn with_bits(mut self, bits: u32) -> Self {
        self.feedback_bits = Some(bits);
        self
    }

    pub fn with_snr_db(mut self, snr_db: f64) -> Self {
        self.snr_db = snr_db;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_tx == 0 {
            return Err(Error::Config("n_tx must be >= 1".into()));
        }
        if self.n_users != 1 && self.n_users != self.n_tx {
            return Err(Error::Config(format!(
                "n_users must be 1 or n_tx ({}), got {}",
                self.n_tx, self.n_users
            )));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::Config("snr_db must be finite".into()));
        }
        if let Some(f) = self.doppler_ts {
            if !(f >= 0.0) || !f.is_finite() {
                return Err(Error::Config(format!("doppler_ts must be >= 0, got {f}")));
            }
        }
        for (name, v) in [
            ("symbol_period_s", self.symbol_period_s),
            ("carrier_hz", self.carrier_hz),
            ("velocity_kmh", self.velocity_kmh),
        ] {
            if let Some(v) = v {
                if !(v >= 0.0) || !v.is_finite() {
                    return Err(Error::Config(format!("{name} must be >= 0, got {v}")));
                }
            }
        }
        if self.delay_symbols == 0 {
            return Err(Error::Config("delay_symbols must be >= 1".into()));
        }
        if let Some(rhos) = &self.per_user_rho {
            if rhos.len() != self.n_users {
                return Err(Error::Config(format!(
                    "per_user_rho has {} entries, expected n_users = {}",
                    rhos.len(),
                    self.n_users
                )));
            }
            if let Some(r) = rhos.iter().find(|r| !(r.abs() <= 1.0)) {
                return Err(Error::Config(format!(
                    "per_user_rho entries must lie in [-1, 1], got {r}"
                )));
            }
        }
        self.csit_model()?;
        Ok(())
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.snr_db / 10.0)
    }

    pub fn resolved_doppler_ts(&self) -> f64 {
        if let Some(f) = self.doppler_ts {
            return f;
        }
        match (self.velocity_kmh, self.carrier_hz, self.symbol_period_s) {
            (Some(v), Some(fc), Some(ts)) => doppler_ts_from_motion(v, fc, ts),
            _ => 0.0,
        }
    }

    /// Common `(ρ, ε²)` of the CSIT model `h = ρ·g + e`.
    ///
    /// For the delay variant `ρ` is the Clarke correlation over
    /// `delay_symbols` symbols; for the others `ρ = √(1 − ε²)`.
    pub fn csit_model(&self) -> Result<(f64, f64)> {
        let clarke = correlation_from_doppler(self.resolved_doppler_ts())?;
        if self.csit_variant == CsitVariant::Delay {
            let rho = clarke.powi(self.delay_symbols as i32);
            return Ok((rho, 1.0 - rho * rho));
        }
        let eps_sq = error_variance(self.csit_variant, &self.variant_params, clarke)?;
        Ok(((1.0 - eps_sq).sqrt(), eps_sq))
    }

    /// `(ρ_u, ε_u²)` for one user, honouring `per_user_rho`.
    pub fn user_model(&self, user: usize) -> Result<(f64, f64)> {
        match &self.per_user_rho {
            Some(rhos) => {
                let rho = *rhos
                    .get(user)
                    .ok_or_else(|| Error::Config(format!("no per_user_rho entry for user {user}")))?;
                Ok((rho, 1.0 - rho * rho))
            }
            None => self.csit_model(),
        }
    }
}

/// `fd·Ts = (v/3.6)·(fc/c)·Ts`.
pub fn doppler_ts_from_motion(velocity_kmh: f64, carrier_hz: f64, symbol_period_s: f64) -> f64 {
    velocity_kmh / 3.6 * carrier_hz / SPEED_OF_LIGHT_M_S * symbol_period_s
}

/// Clarke correlation `J0(2π·fd·Ts)`.
pub fn correlation_from_doppler(doppler_ts: f64) -> Result<f64> {
    if !(doppler_ts >= 0.0) {
        return Err(Error::domain(
            "correlation_from_doppler",
            format!("doppler_ts must be >= 0, got {doppler_ts}"),
        ));
    }
    bessel_j0(2.0 * PI * doppler_ts)
}

fn require(value: Option<f64>, name: &str, variant: CsitVariant) -> Result<f64> {
    match value {
        Some(v) if v >= 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(Error::Config(format!("variant_params.{name} must be >= 0, got {v}"))),
        None => Err(Error::Config(format!(
            "variant_params.{name} is required for csit_variant {variant:?}"
        ))),
    }
}

/// CSIT error variance ε² of each imperfection model.
pub fn error_variance(variant: CsitVariant, params: &VariantParams, rho: f64) -> Result<f64> {
    let eps_sq = match variant {
        CsitVariant::Delay => 1.0 - rho * rho,
        CsitVariant::Estimation => {
            let tau = require(params.pilot_symbols, "pilot_symbols", variant)?;
            let snr = require(params.pilot_snr, "pilot_snr", variant)?;
            1.0 / (1.0 + tau * snr)
        }
        CsitVariant::AnalogFeedback => {
            let tau = require(params.uplink_uses, "uplink_uses", variant)?;
            let snr = require(params.uplink_snr, "uplink_snr", variant)?;
            1.0 / (1.0 + tau * snr)
        }
        CsitVariant::AnalogFeedbackPrediction => {
            let d = params.prediction_steps.ok_or_else(|| {
                Error::Config(format!(
                    "variant_params.prediction_steps is required for csit_variant {variant:?}"
                ))
            })?;
            if d == 0 {
                return Err(Error::Config("variant_params.prediction_steps must be >= 1".into()));
            }
            let eps0 = require(params.filter_mse, "filter_mse", variant)?;
            if eps0 > 1.0 {
                return Err(Error::Config(format!(
                    "variant_params.filter_mse must be <= 1, got {eps0}"
                )));
            }
            let r2 = rho * rho;
            let tail: f64 = (0..d).map(|l| r2.powi(l as i32)).sum();
            r2.powi(d as i32) * eps0 + (1.0 - r2) * tail
        }
    };
    Ok(eps_sq.clamp(0.0, 1.0))
}

/// One user's channel at the CSI instant and one symbol later.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelState {
    pub h_now: CVec,
    pub h_prev: CVec,
    pub rho: f64,
    pub eps_sq: f64,
}

/// `h_prev ~ CN(0, I)`, `h_now = ρ·h_prev + e` with `e ~ CN(0, ε²I)`.
pub fn sample_channel_pair<R: Rng + ?Sized>(n_tx: usize, rho: f64, eps_sq: f64, rng: &mut R) -> ChannelState {
    let unit = 0.5f64.sqrt();
    let h_prev: CVec = (0..n_tx).map(|_| complex_normal(rng, unit)).collect();
    let h_now = if eps_sq > 0.0 {
        let sigma = (0.5 * eps_sq).sqrt();
        h_prev.iter().map(|h| rho * h + complex_normal(rng, sigma)).collect()
    } else {
        h_prev.iter().map(|h| rho * h).collect()
    };
    ChannelState {
        h_now,
        h_prev,
        rho,
        eps_sq,
    }
}

/// Channel pair for `user`, drawn from that user's lane of `stream`.
pub fn draw_channel_pair(cfg: &ScenarioConfig, user: usize, stream: RngStream) -> Result<ChannelState> {
    let (rho, eps_sq) = cfg.user_model(user)?;
    let mut rng = stream.lane(user as u64).rng();
    Ok(sample_channel_pair(cfg.n_tx, rho, eps_sq, &mut rng))
}

/// `Σ a_i·conj(b_i)`, the empirical cross moment of two channels.
pub fn cross_moment(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}
