//! Reproducible random streams and the samplers built on them.
//!
//! A stream is keyed by `(master_seed, stream_id)`: the ChaCha8 key comes
//! from the master seed and the stream id selects one of its 2^64 disjoint
//! streams. A Monte Carlo trial with index `t` always draws from stream `t`,
//! so results do not depend on how trials are scheduled across threads.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }

    /// A stream keyed by a different master seed per `lane`, with the same
    /// stream id. Lanes separate per-user draws that share one trial index.
    pub fn lane(&self, lane: u64) -> Self {
        let mix = 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(lane.wrapping_add(1));
        Self::new(self.master_seed ^ mix.rotate_left(17), self.stream_id)
    }
}

/// i.i.d. CN(0, `variance_per_entry`) entries.
pub fn sample_complex_gaussian_vec<R: Rng + ?Sized>(
    dim: usize,
    variance_per_entry: f64,
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    if dim == 0 {
        return Err(Error::domain("sample_complex_gaussian_vec", "dim must be >= 1"));
    }
    if !(variance_per_entry > 0.0) || !variance_per_entry.is_finite() {
        return Err(Error::domain(
            "sample_complex_gaussian_vec",
            format!("variance must be positive, got {variance_per_entry}"),
        ));
    }
    let sigma = (0.5 * variance_per_entry).sqrt();
    Ok((0..dim).map(|_| complex_normal(rng, sigma)).collect())
}

/// One CN(0, 2σ²) draw; real and imaginary parts are N(0, σ²).
#[inline]
pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Complex64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(sigma * re, sigma * im)
}

pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, scale: f64, rng: &mut R) -> Result<f64> {
    let dist = Gamma::new(shape, scale)
        .map_err(|e| Error::domain("sample_gamma", format!("shape={shape}, scale={scale}: {e}")))?;
    Ok(dist.sample(rng))
}

/// Beta(1, n) by inversion, `1 − U^{1/n}`; `n = 0` is the point mass at 1.
pub fn sample_beta_1_n<R: Rng + ?Sized>(n: u32, rng: &mut R) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let u: f64 = rng.random();
    1.0 - u.powf(1.0 / n as f64)
}

pub fn sample_exponential<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    // 1 − U lies in (0, 1], so the log is finite.
    let u: f64 = rng.random();
    -mean * (1.0 - u).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gaussian_moments() {
        let mut rng = RngStream::new(11, 0).rng();
        let n = 100_000;
        let (mut sum_re, mut sum_im, mut energy) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let v = sample_complex_gaussian_vec(4, 1.0, &mut rng).unwrap();
            sum_re += v[0].re;
            sum_im += v[0].im;
            energy += v.iter().map(|z| z.norm_sqr()).sum::<f64>();
        }
        let sigma = (0.5f64).sqrt();
        let bound = 3.0 * sigma / (n as f64).sqrt();
        assert!((sum_re / n as f64).abs() < bound);
        assert!((sum_im / n as f64).abs() < bound);
        assert!((energy / n as f64 - 4.0).abs() < 0.05);
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |s: RngStream| {
            let mut rng = s.rng();
            (0..100).map(|_| rng.random::<u64>()).collect::<Vec<_>>()
        };
        assert_eq!(draw(RngStream::new(7, 3)), draw(RngStream::new(7, 3)));
        assert_ne!(draw(RngStream::new(7, 3)), draw(RngStream::new(7, 4)));
        assert_ne!(draw(RngStream::new(7, 3)), draw(RngStream::new(8, 3)));
    }

    #[test]
    fn beta_and_gamma_moments() {
        let mut rng = RngStream::new(5, 1).rng();
        let n = 100_000;
        let mean_u = (0..n).map(|_| sample_beta_1_n(1, &mut rng)).sum::<f64>() / n as f64;
        assert!((mean_u - 0.5).abs() < 0.01);
        assert_eq!(sample_beta_1_n(0, &mut rng), 1.0);

        let xs: Vec<f64> = (0..n).map(|_| sample_gamma(3.0, 0.1, &mut rng).unwrap()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.3).abs() < 0.01);
        assert!((var - 0.03).abs() < 0.005);
        assert!(sample_gamma(0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn parameter_validation() {
        let mut rng = RngStream::new(0, 0).rng();
        assert!(sample_complex_gaussian_vec(0, 1.0, &mut rng).is_err());
        assert!(sample_complex_gaussian_vec(2, 0.0, &mut rng).is_err());
    }
}
