//! Beamforming, zero-forcing and MMSE precoders and the SINR they deliver.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelState;
use crate::codebook::{quantize, Codebook};
use crate::error::{Error, Result};
use crate::linalg::{inner, normalized, CVec, SquareMatrix};

/// Condition-number limit of the Gram system behind ZF.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecoderKind {
    Bf,
    Zf,
    Mmse,
}

/// What the transmitter knows when it designs the precoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CsitKind {
    Perfect,
    Delayed,
    Quantized,
    QuantizedDelayed,
}

impl CsitKind {
    pub fn is_quantized(self) -> bool {
        matches!(self, Self::Quantized | Self::QuantizedDelayed)
    }

    pub fn is_delayed(self) -> bool {
        matches!(self, Self::Delayed | Self::QuantizedDelayed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrecoderSet {
    pub vectors: Vec<CVec>,
    pub kind: PrecoderKind,
    pub csit: CsitKind,
}

fn unit(v: &[Complex64], what: &str) -> Result<CVec> {
    normalized(v).ok_or_else(|| Error::domain("precoding", format!("{what} must be non-zero")))
}

/// Single-user beamformer: the channel direction the transmitter sees.
pub fn bf_vector(state: &ChannelState, cb: Option<&Codebook>, csit: CsitKind) -> Result<CVec> {
    let seen = if csit.is_delayed() { &state.h_prev } else { &state.h_now };
    if csit.is_quantized() {
        let cb = cb.ok_or_else(|| Error::Config(format!("csit {csit:?} needs a codebook")))?;
        Ok(quantize(seen, cb)?.quantized_dir)
    } else {
        unit(seen, "channel")
    }
}

// Columns of D (D^* D + λI)^{-1} for D with columns `dirs`, each normalized.
fn regularized_inverse(dirs: &[CVec], ridge: f64) -> Result<Vec<CVec>> {
    let n_users = dirs.len();
    if n_users == 0 {
        return Err(Error::domain("precoding", "at least one direction is required"));
    }
    let n_tx = dirs[0].len();
    if n_users > n_tx || dirs.iter().any(|d| d.len() != n_tx) {
        return Err(Error::domain(
            "precoding",
            format!("need {n_users} directions of length >= {n_users}, all of equal length"),
        ));
    }
    let mut gram = SquareMatrix::gram(dirs);
    gram.add_diagonal(ridge);
    let inv = gram.inverse().ok_or(Error::NumericalRank {
        condition: f64::INFINITY,
    })?;
    let condition = gram.norm1() * inv.norm1();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::NumericalRank { condition });
    }
    (0..n_users)
        .map(|v| {
            let col: CVec = (0..n_tx)
                .map(|k| (0..n_users).map(|u| dirs[u][k] * inv[(u, v)]).sum())
                .collect();
            unit(&col, "precoder column")
        })
        .collect()
}

/// Normalized columns of the pseudo-inverse of the stacked directions.
pub fn zf_precoders(dirs: &[CVec]) -> Result<PrecoderSet> {
    Ok(PrecoderSet {
        vectors: regularized_inverse(dirs, 0.0)?,
        kind: PrecoderKind::Zf,
        csit: CsitKind::Perfect,
    })
}

/// Normalized columns of the `U/P`-regularized inverse.
///
/// Unlike ZF, the result depends on the scale of `dirs`: pass channel
/// estimates, not unit directions, when their norms are known.
pub fn mmse_precoders(dirs: &[CVec], snr_linear: f64, n_users: usize) -> Result<PrecoderSet> {
    if !(snr_linear > 0.0) {
        return Err(Error::domain(
            "mmse_precoders",
            format!("snr must be positive, got {snr_linear}"),
        ));
    }
    Ok(PrecoderSet {
        vectors: regularized_inverse(dirs, n_users as f64 / snr_linear)?,
        kind: PrecoderKind::Mmse,
        csit: CsitKind::Perfect,
    })
}

/// `|h^* f_v|²` for every precoder in the set.
pub fn beam_gains(h_true: &[Complex64], precoders: &PrecoderSet) -> Vec<f64> {
    precoders.vectors.iter().map(|f| inner(h_true, f).norm_sqr()).collect()
}

/// SINR of user `u` with equal power `P/U` per stream.
pub fn sinr_from_gains(gains: &[f64], u: usize, snr_linear: f64, n_users: usize) -> f64 {
    let p = snr_linear / n_users as f64;
    let leak: f64 = gains.iter().enumerate().filter(|&(v, _)| v != u).map(|(_, g)| g).sum();
    p * gains[u] / (1.0 + p * leak)
}

pub fn sinr_mu(
    h_true: &[Complex64],
    precoders: &PrecoderSet,
    u: usize,
    snr_linear: f64,
    n_users: usize,
) -> Result<f64> {
    if u >= precoders.vectors.len() {
        return Err(Error::domain("sinr_mu", format!("user {u} has no precoder")));
    }
    Ok(sinr_from_gains(&beam_gains(h_true, precoders), u, snr_linear, n_users))
}
