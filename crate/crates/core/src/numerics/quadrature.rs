//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Used as the independent oracle for the closed-form integrals and, at run
//! time, for the one-dimensional integral in the limited-feedback BF rate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) || self.max_subdivisions == 0 {
            return Err(Error::Config(format!(
                "quadrature tolerances must be positive and max_subdivisions >= 1: {self:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub subdivisions: usize,
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let mut error = ((kronrod - gauss) * half).abs();
    if !value.is_finite() {
        error = f64::INFINITY;
    }
    Segment { a, b, value, error }
}

/// Integrate `f` over the finite interval `[a, b]`, splitting first at any
/// interior `breakpoints`.
pub fn integrate_with_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    spec.validate()?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate", "interval ends must be finite"));
    }
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            subdivisions: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(lo);
    edges.extend(cuts);
    edges.push(hi);

    let mut heap = BinaryHeap::new();
    let mut value = 0.0;
    let mut error = 0.0;
    for w in edges.windows(2) {
        let seg = gk15(&f, w[0], w[1]);
        value += seg.value;
        error += seg.error;
        heap.push(seg);
    }
    let mut subdivisions = heap.len();
    while error > spec.abs_tol.max(spec.rel_tol * value.abs()) {
        if subdivisions >= spec.max_subdivisions {
            return Err(Error::Quadrature {
                value: sign * value,
                achieved: error,
                subdivisions,
            });
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval collapsed to machine resolution; keep what we have.
            heap.push(worst);
            break;
        }
        let left = gk15(&f, worst.a, mid);
        let right = gk15(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
        subdivisions += 1;
    }
    // Re-sum to shed the drift of incremental updates.
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    if !value.is_finite() {
        return Err(Error::Quadrature {
            value,
            achieved: error,
            subdivisions,
        });
    }
    Ok(QuadResult {
        value: sign * value,
        error,
        subdivisions,
    })
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    integrate_with_breakpoints(f, a, b, &[], spec)
}

/// Integrate over `[a, ∞)` through the map `x = a + t/(1−t)`.
///
/// `scale` sets where the map puts the bulk of the mass (`x − a = scale` at
/// t = 1/2); pass the natural length scale of the integrand.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<QuadResult> {
    if !(scale > 0.0) {
        return Err(Error::domain("integrate_semi_infinite", "scale must be positive"));
    }
    let g = |t: f64| {
        if t >= 1.0 {
            return 0.0;
        }
        let u = 1.0 - t;
        let x = a + scale * t / u;
        let v = f(x) * scale / (u * u);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    // Extra cuts near t = 1 help heavy tails.
    integrate_with_breakpoints(g, 0.0, 1.0, &[0.5, 0.9, 0.99], spec)
}

/// Integrate over `[lo, hi]` (both positive) in the variable `u = ln x`.
///
/// Suited to integrands whose mass spreads over many decades, such as
/// `e^{−x/a}/(1 + x)` with large `a`.
pub fn integrate_log_scale<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, spec: &QuadratureSpec) -> Result<QuadResult> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::domain(
            "integrate_log_scale",
            format!("need 0 < lo < hi, got [{lo}, {hi}]"),
        ));
    }
    let (a, b) = (lo.ln(), hi.ln());
    let pieces = ((b - a) / 2.5).ceil().max(1.0) as usize;
    let cuts: Vec<f64> = (1..pieces).map(|k| a + (b - a) * k as f64 / pieces as f64).collect();
    integrate_with_breakpoints(
        |u| {
            let x = u.exp();
            f(x) * x
        },
        a,
        b,
        &cuts,
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn polynomial_and_exponential() {
        let spec = QuadratureSpec::default();
        let r = integrate(|x| x * x, 0.0, 3.0, &spec).unwrap();
        assert_relative_eq!(r.value, 9.0, max_relative = 1e-14);
        let r = integrate(|x: f64| x.exp(), 1.0, 0.0, &spec).unwrap();
        assert_relative_eq!(r.value, 1.0 - std::f64::consts::E, max_relative = 1e-13);
    }

    #[test]
    fn semi_infinite_and_singular() {
        let spec = QuadratureSpec::default();
        let r = integrate_semi_infinite(|x: f64| (-x).exp() / (1.0 + x), 0.0, 1.0, &spec).unwrap();
        assert_relative_eq!(r.value, 0.596_347_362_323_194_1, max_relative = 1e-9);
        let r = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, &spec).unwrap();
        assert_relative_eq!(r.value, 2.0, max_relative = 1e-7);
    }

    #[test]
    fn log_scale_spans_decades() {
        let spec = QuadratureSpec::default();
        let a = 1e6;
        let r = integrate_log_scale(|x: f64| (-x / a).exp() / (1.0 + x), 1e-14, 50.0 * a, &spec).unwrap();
        // e^{1/a}E1(1/a) for a = 1e6.
        assert_relative_eq!(r.value, 13.238309131365003, max_relative = 1e-7);
    }

    #[test]
    fn breakpoints_resolve_a_step() {
        let spec = QuadratureSpec::default();
        let step = |x: f64| if x < 0.123 { 0.0 } else { 1.0 };
        let r = integrate_with_breakpoints(step, 0.0, 1.0, &[0.123], &spec).unwrap();
        assert_relative_eq!(r.value, 0.877, max_relative = 1e-12);
    }

    #[test]
    fn reports_non_convergence() {
        let spec = QuadratureSpec::new(1e-14, 1e-14, 3).unwrap();
        let err = integrate(|x: f64| (50.0 * x).sin().abs(), 0.0, 10.0, &spec).unwrap_err();
        assert!(matches!(err, Error::Quadrature { .. }));
    }

    #[test]
    fn spec_validation() {
        assert!(QuadratureSpec::new(0.0, 1e-8, 10).is_err());
        assert!(QuadratureSpec::new(1e-10, 1e-8, 0).is_err());
    }
}
