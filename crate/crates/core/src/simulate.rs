//! Genie-aided Monte Carlo rates for BF, ZF and MMSE.
//!
//! Trial `t` draws everything from `RngStream(master_seed, t)`. Trials are
//! grouped into fixed batches, each batch is accumulated sequentially, and
//! the batch summaries are merged by a fixed-shape pairwise reduction, so
//! results are bit-identical for any thread count and with or without the
//! `parallel` feature.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channel_pair, ChannelState, ScenarioConfig};
use crate::codebook::{quantize_cell_approx, quantize_fresh_rvq, MAX_RVQ_BITS};
use crate::error::{Error, Result};
use crate::linalg::{inner, normalized, CVec};
use crate::numerics::random::sample_complex_gaussian_vec;
use crate::numerics::RngStream;
use crate::parallel::{map_indexed, pairwise_reduce, Execution};
use crate::precoding::{beam_gains, mmse_precoders, sinr_from_gains, zf_precoders, CsitKind, PrecoderKind};

/// Largest codebook quantized by explicit RVQ when the choice is automatic.
pub const AUTO_RVQ_MAX_BITS: u32 = 14;

/// Redraws allowed per trial before a rank failure is reported.
const MAX_REDRAWS: u32 = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSpec {
    pub n_trials: u64,
    pub master_seed: u64,
    /// `None` picks RVQ up to 14 bits and the cell approximation above.
    /// Codebooks beyond 24 bits always use the cell approximation.
    #[serde(default)]
    pub use_cell_approx: Option<bool>,
    #[serde(default = "default_batch")]
    pub batch: u64,
    #[serde(default)]
    pub execution: Execution,
}

fn default_batch() -> u64 {
    1000
}

impl MonteCarloSpec {
    pub fn new(n_trials: u64, master_seed: u64) -> Self {
        Self {
            n_trials,
            master_seed,
            use_cell_approx: None,
            batch: default_batch(),
            execution: Execution::Parallel,
        }
    }

    pub fn with_cell_approx(mut self, on: bool) -> Self {
        self.use_cell_approx = Some(on);
        self
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 || self.batch == 0 {
            return Err(Error::Config("n_trials and batch must be >= 1".into()));
        }
        Ok(())
    }

    /// Whether `bits`-bit feedback is drawn from the cell approximation.
    /// Explicitly requesting RVQ beyond its size limit is an error.
    fn cell_approx_for(&self, bits: u32) -> Result<bool> {
        match self.use_cell_approx {
            Some(false) if bits > MAX_RVQ_BITS => Err(Error::Capacity {
                bits,
                limit: MAX_RVQ_BITS,
            }),
            Some(on) => Ok(on),
            None => Ok(bits > AUTO_RVQ_MAX_BITS),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub mean_bps_hz: f64,
    pub std_error: f64,
    pub per_user: Vec<f64>,
    pub n_trials: u64,
    /// Trials whose design directions were redrawn after a rank failure.
    pub rank_redraws: u64,
}

/// Mean and standard error of a scalar Monte Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_trials: u64,
}

// Count, mean and sum of squared deviations (merged with Chan's update),
// plus per-component sums.
#[derive(Debug, Clone)]
struct Moments {
    n: u64,
    mean: f64,
    m2: f64,
    components: Vec<f64>,
    redraws: u64,
}

impl Moments {
    fn from_batch(values: &[f64], components: Vec<f64>, redraws: u64) -> Self {
        let n = values.len() as u64;
        let mean = values.iter().sum::<f64>() / n as f64;
        let m2 = values.iter().map(|v| (v - mean).powi(2)).sum();
        Self {
            n,
            mean,
            m2,
            components,
            redraws,
        }
    }

    fn merge(a: &Self, b: &Self) -> Self {
        let n = a.n + b.n;
        let d = b.mean - a.mean;
        let (na, nb) = (a.n as f64, b.n as f64);
        Self {
            n,
            mean: a.mean + d * nb / n as f64,
            m2: a.m2 + b.m2 + d * d * na * nb / n as f64,
            components: a.components.iter().zip(&b.components).map(|(x, y)| x + y).collect(),
            redraws: a.redraws + b.redraws,
        }
    }

    fn std_error(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

struct TrialOutput {
    value: f64,
    components: Vec<f64>,
    redraws: u64,
}

fn run_trials<F>(mc: &MonteCarloSpec, n_components: usize, trial: F) -> Result<Moments>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Result<TrialOutput> + Sync + Send,
{
    mc.validate()?;
    let n_batches = mc.n_trials.div_ceil(mc.batch);
    let batches = map_indexed(n_batches as usize, mc.execution, |k| -> Result<Moments> {
        let start = k as u64 * mc.batch;
        let end = (start + mc.batch).min(mc.n_trials);
        let mut values = Vec::with_capacity((end - start) as usize);
        let mut components = vec![0.0; n_components];
        let mut redraws = 0;
        for t in start..end {
            let mut rng = RngStream::new(mc.master_seed, t).rng();
            let out = trial(&mut rng)?;
            values.push(out.value);
            for (c, v) in components.iter_mut().zip(&out.components) {
                *c += v;
            }
            redraws += out.redraws;
        }
        Ok(Moments::from_batch(&values, components, redraws))
    });
    let batches = batches.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(pairwise_reduce(&batches, &Moments::merge).expect("at least one batch"))
}

fn estimate_from(m: Moments) -> RateEstimate {
    let n = m.n as f64;
    RateEstimate {
        mean_bps_hz: m.mean,
        std_error: m.std_error(),
        per_user: m.components.iter().map(|c| c / n).collect(),
        n_trials: m.n,
        rank_redraws: m.redraws,
    }
}

fn require_bits(cfg: &ScenarioConfig, csit: CsitKind) -> Result<Option<u32>> {
    if !csit.is_quantized() {
        return Ok(None);
    }
    match cfg.feedback_bits {
        Some(b) if cfg.n_tx >= 2 => Ok(Some(b)),
        Some(_) => Err(Error::Config("quantized CSIT needs n_tx >= 2".into())),
        None => Err(Error::Config(format!("csit {csit:?} needs feedback_bits"))),
    }
}

fn quantize_dir<R: Rng + ?Sized>(h: &[Complex64], bits: u32, cell: bool, rng: &mut R) -> Result<CVec> {
    let dir = normalized(h).ok_or_else(|| Error::domain("simulate", "zero channel draw"))?;
    Ok(if cell {
        quantize_cell_approx(&dir, bits, rng)?.quantized_dir
    } else {
        quantize_fresh_rvq(&dir, bits, rng).quantized_dir
    })
}

fn draw_users<R: Rng + ?Sized>(cfg: &ScenarioConfig, models: &[(f64, f64)], rng: &mut R) -> Vec<ChannelState> {
    models
        .iter()
        .map(|&(rho, eps)| sample_channel_pair(cfg.n_tx, rho, eps, rng))
        .collect()
}

fn user_models(cfg: &ScenarioConfig) -> Result<Vec<(f64, f64)>> {
    (0..cfg.n_users).map(|u| cfg.user_model(u)).collect()
}

/// Single-user BF: `E[log2(1 + P|h[n]^* f|²)]` with `f` from the CSIT the
/// transmitter has.
pub fn simulate_bf(cfg: &ScenarioConfig, csit: CsitKind, mc: &MonteCarloSpec) -> Result<RateEstimate> {
    cfg.validate()?;
    let bits = require_bits(cfg, csit)?;
    let cell = bits.map(|b| mc.cell_approx_for(b)).transpose()?.unwrap_or(false);
    let (rho, eps_sq) = cfg.user_model(0)?;
    let snr = cfg.snr_linear();
    let m = run_trials(mc, 1, |rng| {
        let s = sample_channel_pair(cfg.n_tx, rho, eps_sq, rng);
        let seen = if csit.is_delayed() { &s.h_prev } else { &s.h_now };
        let f = match bits {
            Some(b) => quantize_dir(seen, b, cell, rng)?,
            None => normalized(seen).ok_or_else(|| Error::domain("simulate_bf", "zero channel draw"))?,
        };
        let rate = (1.0 + snr * inner(&s.h_now, &f).norm_sqr()).log2();
        Ok(TrialOutput {
            value: rate,
            components: vec![rate],
            redraws: 0,
        })
    })?;
    Ok(estimate_from(m))
}

/// What the transmitter designs its MU precoder from, per user.
fn design_rows<R: Rng + ?Sized>(
    users: &[ChannelState],
    csit: CsitKind,
    bits: Option<u32>,
    cell: bool,
    kind: PrecoderKind,
    rng: &mut R,
) -> Result<Vec<CVec>> {
    users
        .iter()
        .map(|s| {
            let seen = if csit.is_delayed() { &s.h_prev } else { &s.h_now };
            match bits {
                Some(b) => quantize_dir(seen, b, cell, rng),
                // MMSE regularization is scale-aware, so it sees the raw
                // estimate; ZF is invariant to row scaling.
                None if kind == PrecoderKind::Mmse => Ok(seen.clone()),
                None => normalized(seen).ok_or_else(|| Error::domain("simulate", "zero channel draw")),
            }
        })
        .collect()
}

fn simulate_mu(cfg: &ScenarioConfig, csit: CsitKind, kind: PrecoderKind, mc: &MonteCarloSpec) -> Result<RateEstimate> {
    cfg.validate()?;
    if cfg.n_users != cfg.n_tx || cfg.n_tx < 2 {
        return Err(Error::Config("MU simulation needs n_users = n_tx >= 2".into()));
    }
    let bits = require_bits(cfg, csit)?;
    let cell = bits.map(|b| mc.cell_approx_for(b)).transpose()?.unwrap_or(false);
    let models = user_models(cfg)?;
    let (snr, n_users) = (cfg.snr_linear(), cfg.n_users);
    let m = run_trials(mc, n_users, |rng| {
        let mut users = draw_users(cfg, &models, rng);
        let mut redraws = 0;
        let precoders = loop {
            let rows = design_rows(&users, csit, bits, cell, kind, rng)?;
            let set = match kind {
                PrecoderKind::Mmse => mmse_precoders(&rows, snr, n_users),
                _ => zf_precoders(&rows),
            };
            match set {
                Ok(set) => break set,
                Err(e @ Error::NumericalRank { .. }) => {
                    redraws += 1;
                    if redraws > MAX_REDRAWS as u64 {
                        return Err(e);
                    }
                    if bits.is_none() {
                        users = draw_users(cfg, &models, rng);
                    }
                }
                Err(e) => return Err(e),
            }
        };
        let per_user: Vec<f64> = users
            .iter()
            .enumerate()
            .map(|(u, s)| {
                let gains = beam_gains(&s.h_now, &precoders);
                (1.0 + sinr_from_gains(&gains, u, snr, n_users)).log2()
            })
            .collect();
        Ok(TrialOutput {
            value: per_user.iter().sum(),
            components: per_user,
            redraws,
        })
    })?;
    if m.redraws as f64 > 1e-4 * m.n as f64 {
        log::warn!("{} of {} trials needed redrawn design directions", m.redraws, m.n);
    }
    Ok(estimate_from(m))
}

/// ZF sum rate `E[Σ_u log2(1 + SINR_u)]` with SINR on the true channel.
pub fn simulate_zf(cfg: &ScenarioConfig, csit: CsitKind, mc: &MonteCarloSpec) -> Result<RateEstimate> {
    simulate_mu(cfg, csit, PrecoderKind::Zf, mc)
}

pub fn simulate_mmse(cfg: &ScenarioConfig, csit: CsitKind, mc: &MonteCarloSpec) -> Result<RateEstimate> {
    simulate_mu(cfg, csit, PrecoderKind::Mmse, mc)
}

/// MC mean of `1 + (P/U)·Σ_{u'≠u}|h_u^* f_{u'}|²` under ZF, averaged over
/// users. The CSIT is quantized when feedback bits are set and delayed
/// whenever the scenario has a CSIT error.
pub fn estimate_avg_interference(cfg: &ScenarioConfig, mc: &MonteCarloSpec) -> Result<Estimate> {
    cfg.validate()?;
    if cfg.n_users != cfg.n_tx || cfg.n_tx < 2 {
        return Err(Error::Config("interference estimate needs n_users = n_tx >= 2".into()));
    }
    let csit = if cfg.feedback_bits.is_some() {
        CsitKind::QuantizedDelayed
    } else {
        CsitKind::Delayed
    };
    let bits = cfg.feedback_bits;
    let cell = bits.map(|b| mc.cell_approx_for(b)).transpose()?.unwrap_or(false);
    let models = user_models(cfg)?;
    let (p_user, n_users) = (cfg.snr_linear() / cfg.n_users as f64, cfg.n_users);
    let m = run_trials(mc, 0, |rng| {
        let users = draw_users(cfg, &models, rng);
        let rows = design_rows(&users, csit, bits, cell, PrecoderKind::Zf, rng)?;
        let set = zf_precoders(&rows)?;
        let mut total = 0.0;
        for (u, s) in users.iter().enumerate() {
            let gains = beam_gains(&s.h_now, &set);
            let leak: f64 = gains.iter().enumerate().filter(|&(v, _)| v != u).map(|(_, g)| g).sum();
            total += 1.0 + p_user * leak;
        }
        Ok(TrialOutput {
            value: total / n_users as f64,
            components: Vec::new(),
            redraws: 0,
        })
    })?;
    Ok(Estimate {
        mean: m.mean,
        std_error: m.std_error(),
        n_trials: m.n,
    })
}

/// MC mean of the RVQ distortion `sin²θ` for an isotropic channel.
pub fn estimate_sq_distortion(n_tx: usize, bits: u32, mc: &MonteCarloSpec) -> Result<Estimate> {
    if n_tx < 2 {
        return Err(Error::domain("estimate_sq_distortion", "n_tx must be >= 2"));
    }
    let cell = mc.cell_approx_for(bits)?;
    let m = run_trials(mc, 0, |rng| {
        let h = sample_complex_gaussian_vec(n_tx, 1.0, rng)?;
        let dir = normalized(&h).ok_or_else(|| Error::domain("simulate", "zero channel draw"))?;
        let q = if cell {
            quantize_cell_approx(&dir, bits, rng)?
        } else {
            quantize_fresh_rvq(&dir, bits, rng)
        };
        Ok(TrialOutput {
            value: q.sin_sq,
            components: Vec::new(),
            redraws: 0,
        })
    })?;
    Ok(Estimate {
        mean: m.mean,
        std_error: m.std_error(),
        n_trials: m.n,
    })
}
