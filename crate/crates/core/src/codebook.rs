//! Random vector quantization and the quantization-cell approximation.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inner, norm_sqr, normalized, CVec};
use crate::numerics::random::{complex_normal, sample_beta_1_n, sample_exponential, sample_gamma};
use crate::numerics::{beta_fn, RngStream};

/// Largest codebook that is materialized explicitly.
pub const MAX_RVQ_BITS: u32 = 24;

/// Lane offset separating codebook streams from channel streams.
const CODEBOOK_LANE: u64 = 1 << 32;

/// Cell radius `δ = 2^{−B/(Nt−1)}`.
pub fn quantization_delta(n_tx: usize, bits: u32) -> Result<f64> {
    if n_tx < 2 {
        return Err(Error::domain(
            "quantization_delta",
            "n_tx must be >= 2 for the quantization angle to be defined",
        ));
    }
    Ok(2f64.powf(-(bits as f64) / (n_tx - 1) as f64))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    pub user: usize,
    pub bits: u32,
    pub vectors: Vec<CVec>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantizationResult {
    pub index: usize,
    pub quantized_dir: CVec,
    pub cos_sq: f64,
    pub sin_sq: f64,
}

fn isotropic_unit<R: Rng + ?Sized>(n_tx: usize, rng: &mut R) -> CVec {
    let sigma = 0.5f64.sqrt();
    loop {
        let v: CVec = (0..n_tx).map(|_| complex_normal(rng, sigma)).collect();
        if let Some(u) = normalized(&v) {
            return u;
        }
    }
}

/// RVQ codebook for `user`, drawn from that user's codebook lane of `stream`.
pub fn generate_rvq(n_tx: usize, bits: u32, user: usize, stream: RngStream) -> Result<Codebook> {
    if n_tx == 0 {
        return Err(Error::domain("generate_rvq", "n_tx must be >= 1"));
    }
    if bits > MAX_RVQ_BITS {
        return Err(Error::Capacity {
            bits,
            limit: MAX_RVQ_BITS,
        });
    }
    let mut rng = stream.lane(CODEBOOK_LANE + user as u64).rng();
    let vectors = (0..1usize << bits).map(|_| isotropic_unit(n_tx, &mut rng)).collect();
    Ok(Codebook { user, bits, vectors })
}

fn result_for(h_dir: &[Complex64], index: usize, codeword: CVec) -> QuantizationResult {
    let cos_sq = inner(h_dir, &codeword).norm_sqr().min(1.0);
    QuantizationResult {
        index,
        quantized_dir: codeword,
        cos_sq,
        sin_sq: 1.0 - cos_sq,
    }
}

/// Exhaustive nearest-codeword search on `|h̃^* c|`; ties go to the lowest index.
pub fn quantize(h: &[Complex64], cb: &Codebook) -> Result<QuantizationResult> {
    let h_dir = normalized(h).ok_or_else(|| Error::domain("quantize", "channel must be non-zero"))?;
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, c) in cb.vectors.iter().enumerate() {
        if c.len() != h_dir.len() {
            return Err(Error::domain("quantize", "codeword and channel dimensions differ"));
        }
        let g = inner(&h_dir, c).norm_sqr();
        if g > best.1 {
            best = (i, g);
        }
    }
    Ok(result_for(&h_dir, best.0, cb.vectors[best.0].clone()))
}

/// RVQ with codewords drawn on the fly from `rng` instead of stored.
///
/// Statistically identical to `quantize` against a fresh codebook, without
/// the 2^B·Nt allocation. `h_dir` must be unit norm.
pub fn quantize_fresh_rvq<R: Rng + ?Sized>(h_dir: &[Complex64], bits: u32, rng: &mut R) -> QuantizationResult {
    let n_tx = h_dir.len();
    let sigma = 0.5f64.sqrt();
    let mut raw: CVec = vec![Complex64::new(0.0, 0.0); n_tx];
    let mut best_raw = raw.clone();
    let mut best = (0usize, f64::NEG_INFINITY);
    for i in 0..1usize << bits {
        for z in raw.iter_mut() {
            *z = complex_normal(rng, sigma);
        }
        let n = norm_sqr(&raw);
        if !(n > 0.0) {
            continue;
        }
        let g = inner(h_dir, &raw).norm_sqr() / n;
        if g > best.1 {
            best = (i, g);
            best_raw.copy_from_slice(&raw);
        }
    }
    let codeword = normalized(&best_raw).unwrap_or_else(|| h_dir.to_vec());
    result_for(h_dir, best.0, codeword)
}

/// Quantization under the cell approximation: `sin²θ = δ·U^{1/(Nt−1)}` and
/// the error direction is isotropic in the complement of `h_dir`.
pub fn quantize_cell_approx<R: Rng + ?Sized>(
    h_dir: &[Complex64],
    bits: u32,
    rng: &mut R,
) -> Result<QuantizationResult> {
    let n_tx = h_dir.len();
    let delta = quantization_delta(n_tx, bits)?;
    let u: f64 = rng.random();
    let sin_sq = delta * u.powf(1.0 / (n_tx - 1) as f64);
    let w = loop {
        let mut w = isotropic_unit(n_tx, rng);
        let proj = inner(h_dir, &w);
        for (wi, hi) in w.iter_mut().zip(h_dir) {
            *wi -= proj * hi;
        }
        if let Some(w) = normalized(&w) {
            break w;
        }
    };
    let (c, s) = ((1.0 - sin_sq).sqrt(), sin_sq.sqrt());
    let dir: CVec = h_dir.iter().zip(&w).map(|(h, w)| c * h + s * w).collect();
    Ok(QuantizationResult {
        index: 0,
        quantized_dir: dir,
        cos_sq: 1.0 - sin_sq,
        sin_sq,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distortion {
    pub exact: f64,
    pub lower: f64,
    pub upper: f64,
}

/// `E[sin²θ] = 2^B·β(2^B, Nt/(Nt−1))` with its bracket
/// `((Nt−1)/Nt·δ, δ)`.
pub fn expected_sq_distortion(n_tx: usize, bits: u32) -> Result<Distortion> {
    let upper = quantization_delta(n_tx, bits)?;
    let nt = n_tx as f64;
    let size = 2f64.powi(bits as i32);
    Ok(Distortion {
        exact: size * beta_fn(size, nt / (nt - 1.0))?,
        lower: (nt - 1.0) / nt * upper,
        upper,
    })
}

/// One draw of the quantization interference under the cell approximation:
/// exponential with mean δ.
pub fn cell_approx_interference_sample(n_tx: usize, bits: u32, stream: RngStream) -> Result<f64> {
    let delta = quantization_delta(n_tx, bits)?;
    Ok(sample_exponential(delta, &mut stream.rng()))
}

/// The same law through its construction `Gamma(Nt−1, δ)·Beta(1, Nt−2)`.
pub fn cell_approx_interference_product<R: Rng + ?Sized>(n_tx: usize, bits: u32, rng: &mut R) -> Result<f64> {
    let delta = quantization_delta(n_tx, bits)?;
    let g = sample_gamma((n_tx - 1) as f64, delta, rng)?;
    Ok(g * sample_beta_1_n((n_tx - 2) as u32, rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::random::sample_complex_gaussian_vec;
    use crate::numerics::stats::{ks_statistic, ks_two_sample};

    #[test]
    fn rvq_codebooks() {
        let cb = generate_rvq(4, 0, 0, RngStream::new(1, 0)).unwrap();
        assert_eq!(cb.vectors.len(), 1);
        let cb = generate_rvq(4, 6, 2, RngStream::new(1, 0)).unwrap();
        assert_eq!(cb.vectors.len(), 64);
        for v in &cb.vectors {
            assert!((norm_sqr(v) - 1.0).abs() < 1e-12);
        }
        assert_eq!(cb, generate_rvq(4, 6, 2, RngStream::new(1, 0)).unwrap());
        assert_ne!(cb, generate_rvq(4, 6, 3, RngStream::new(1, 0)).unwrap());
        assert!(matches!(
            generate_rvq(4, 25, 0, RngStream::new(1, 0)),
            Err(Error::Capacity { .. })
        ));
    }

    #[test]
    fn isotropic_pairs() {
        let cb = generate_rvq(4, 15, 0, RngStream::new(9, 0)).unwrap();
        let n = 10_000;
        let mean = (0..n)
            .map(|i| inner(&cb.vectors[2 * i], &cb.vectors[2 * i + 1]).norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 0.25).abs() < 0.01);
    }

    #[test]
    fn quantize_exact_and_orthogonal() {
        let cb = generate_rvq(3, 4, 0, RngStream::new(2, 0)).unwrap();
        let h: CVec = cb.vectors[5].iter().map(|z| z * Complex64::new(0.0, 2.5)).collect();
        let q = quantize(&h, &cb).unwrap();
        assert_eq!(q.index, 5);
        assert!(q.sin_sq.abs() < 1e-12);
        assert!((q.cos_sq + q.sin_sq - 1.0).abs() < 1e-12);

        let one = Codebook {
            user: 0,
            bits: 0,
            vectors: vec![vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]],
        };
        let q = quantize(&[Complex64::new(0.0, 0.0), Complex64::new(0.3, 0.1)], &one).unwrap();
        assert_eq!(q.cos_sq, 0.0);
        assert!(quantize(&[Complex64::new(0.0, 0.0); 2], &one).is_err());
    }

    #[test]
    fn quantize_ignores_phase_and_breaks_ties_low() {
        let cb = generate_rvq(4, 6, 0, RngStream::new(4, 0)).unwrap();
        let mut rng = RngStream::new(4, 1).rng();
        for _ in 0..50 {
            let h = sample_complex_gaussian_vec(4, 1.0, &mut rng).unwrap();
            let rotated: CVec = h.iter().map(|z| z * Complex64::from_polar(1.0, 1.234)).collect();
            assert_eq!(quantize(&h, &cb).unwrap().index, quantize(&rotated, &cb).unwrap().index);
        }
        let dup = Codebook {
            user: 0,
            bits: 1,
            vectors: vec![cb.vectors[0].clone(), cb.vectors[0].clone()],
        };
        assert_eq!(quantize(&cb.vectors[0], &dup).unwrap().index, 0);
    }

    #[test]
    fn rvq_distortion_two_antennas_one_bit() {
        let mut rng = RngStream::new(12, 0).rng();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let h = sample_complex_gaussian_vec(2, 1.0, &mut rng).unwrap();
            let h = normalized(&h).unwrap();
            sum += quantize_fresh_rvq(&h, 1, &mut rng).sin_sq;
        }
        assert!((sum / n as f64 - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn distortion_values_and_bounds() {
        let d = expected_sq_distortion(2, 1).unwrap();
        assert!((d.exact - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!((d.lower, d.upper), (0.25, 0.5));
        let d = expected_sq_distortion(4, 0).unwrap();
        assert!((d.exact - 0.75).abs() < 1e-12);
        assert_eq!((d.lower, d.upper), (0.75, 1.0));
        let d = expected_sq_distortion(4, 18).unwrap();
        assert!(d.exact > 0.75 * 2f64.powi(-6) && d.exact < 2f64.powi(-6));
        assert!(expected_sq_distortion(1, 3).is_err());
    }

    #[test]
    fn cell_approx_is_exponential() {
        let delta = quantization_delta(4, 10).unwrap();
        let n = 100_000u64;
        let mut xs: Vec<f64> = (0..n)
            .map(|t| cell_approx_interference_sample(4, 10, RngStream::new(21, t)).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean / delta - 1.0).abs() < 0.02);
        let d = ks_statistic(&mut xs, |z| 1.0 - (-z / delta).exp());
        assert!(d < 0.01, "KS = {d}");

        let mut rng = RngStream::new(22, 0).rng();
        let mut ys: Vec<f64> = (0..n)
            .map(|_| cell_approx_interference_product(4, 10, &mut rng).unwrap())
            .collect();
        assert!(ks_two_sample(&mut xs, &mut ys) < 0.015);
    }

    #[test]
    fn cell_approx_quantizer_geometry() {
        let mut rng = RngStream::new(30, 0).rng();
        let delta = quantization_delta(4, 8).unwrap();
        for _ in 0..100 {
            let h = normalized(&sample_complex_gaussian_vec(4, 1.0, &mut rng).unwrap()).unwrap();
            let q = quantize_cell_approx(&h, 8, &mut rng).unwrap();
            assert!((norm_sqr(&q.quantized_dir) - 1.0).abs() < 1e-12);
            assert!(q.sin_sq <= delta);
            assert!((inner(&h, &q.quantized_dir).norm_sqr() - q.cos_sq).abs() < 1e-12);
        }
    }
}
