//! SU/MU switching points and operating regions.

use serde::{Deserialize, Serialize};

use crate::channel::ScenarioConfig;
use crate::closed_form::{r_bf_delay, r_bf_qd_approx, r_zf_delay, r_zf_qd_approx};
use crate::error::{Error, Result};
use crate::parallel::{map_indexed, map_slice, Execution};
use crate::precoding::CsitKind;
use crate::simulate::{simulate_bf, simulate_mmse, simulate_zf, MonteCarloSpec};

/// Spacing of the sign-change scan, in dB.
pub const SCAN_STEP_DB: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "SU")]
    Su,
    #[serde(rename = "MU")]
    Mu,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Su => "SU",
            Mode::Mu => "MU",
        }
    }

    fn from_gap(gap: f64) -> Self {
        if gap > 0.0 {
            Mode::Mu
        } else {
            Mode::Su
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClosedForm,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeInterval {
    pub lo_db: f64,
    pub hi_db: f64,
    pub mode: Mode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchReport {
    pub crossings_db: Vec<f64>,
    pub active_mode: Vec<ModeInterval>,
    pub method: Method,
    /// Largest MU-minus-SU rate seen on the scan grid.
    pub max_mu_advantage_bps_hz: f64,
}

impl SwitchReport {
    pub fn mu_active(&self) -> bool {
        self.active_mode.iter().any(|i| i.mode == Mode::Mu)
    }

    /// Whether both ends of the sweep are served in SU mode.
    pub fn su_at_extremes(&self) -> bool {
        matches!(
            (self.active_mode.first(), self.active_mode.last()),
            (Some(a), Some(b)) if a.mode == Mode::Su && b.mode == Mode::Su
        )
    }
}

fn su_and_mu(cfg: &ScenarioConfig) -> Result<(ScenarioConfig, ScenarioConfig)> {
    let mut mu = cfg.clone();
    mu.n_users = cfg.n_tx;
    let mut su = cfg.clone();
    su.n_users = 1;
    if let Some(rhos) = &cfg.per_user_rho {
        su.per_user_rho = Some(vec![rhos[0]]);
        if rhos.len() != mu.n_users {
            return Err(Error::Config("per_user_rho must list one value per MU user".into()));
        }
    }
    Ok((su, mu))
}

/// Closed-form SU and MU rates at one SNR. Delay-only curves are used when
/// the scenario has no feedback bits.
pub fn mode_rates(cfg: &ScenarioConfig, snr_db: f64) -> Result<(f64, f64)> {
    let (su, mu) = su_and_mu(cfg)?;
    let (su, mu) = (su.with_snr_db(snr_db), mu.with_snr_db(snr_db));
    let (bf, zf) = match cfg.feedback_bits {
        Some(_) => (r_bf_qd_approx(&su)?, r_zf_qd_approx(&mu)?.sum),
        None => (r_bf_delay(&su)?, r_zf_delay(&mu)?.sum),
    };
    if !bf.is_finite() || !zf.is_finite() {
        return Err(Error::NonFinite {
            snr_db,
            detail: format!("SU rate {bf}, MU rate {zf}"),
        });
    }
    Ok((bf, zf))
}

/// MU minus SU closed-form rate.
pub fn rate_gap(cfg: &ScenarioConfig, snr_db: f64) -> Result<f64> {
    let (bf, zf) = mode_rates(cfg, snr_db)?;
    Ok(zf - bf)
}

fn scan_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    let mut grid: Vec<f64> = (0..=n).map(|k| lo + k as f64 * step).filter(|x| *x < hi).collect();
    grid.push(hi);
    grid
}

fn check_range(lo: f64, hi: f64, tol_db: f64) -> Result<()> {
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() || !(tol_db > 0.0) {
        return Err(Error::Config(format!(
            "need lo < hi and tol_db > 0, got [{lo}, {hi}] and {tol_db}"
        )));
    }
    Ok(())
}

fn intervals(lo: f64, hi: f64, crossings: &[f64], first: Mode) -> Vec<ModeInterval> {
    let mut edges = vec![lo];
    edges.extend_from_slice(crossings);
    edges.push(hi);
    let mut mode = first;
    edges
        .windows(2)
        .map(|w| {
            let iv = ModeInterval {
                lo_db: w[0],
                hi_db: w[1],
                mode,
            };
            mode = if mode == Mode::Su { Mode::Mu } else { Mode::Su };
            iv
        })
        .collect()
}

/// All SU/MU crossings in `[lo, hi]` dB: a sign-change scan on a 0.25 dB
/// grid, each bracket refined by bisection to `tol_db`.
pub fn find_switching_points(cfg: &ScenarioConfig, snr_range_db: (f64, f64), tol_db: f64) -> Result<SwitchReport> {
    find_switching_points_with(cfg, snr_range_db, tol_db, Execution::Parallel)
}

pub fn find_switching_points_with(
    cfg: &ScenarioConfig,
    (lo, hi): (f64, f64),
    tol_db: f64,
    execution: Execution,
) -> Result<SwitchReport> {
    check_range(lo, hi, tol_db)?;
    cfg.validate()?;
    let grid = scan_grid(lo, hi, SCAN_STEP_DB);
    let gaps = map_slice(&grid, execution, |&x| rate_gap(cfg, x))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut crossings = Vec::new();
    for i in 0..grid.len() - 1 {
        if Mode::from_gap(gaps[i]) == Mode::from_gap(gaps[i + 1]) {
            continue;
        }
        let (mut a, mut b) = (grid[i], grid[i + 1]);
        let mode_a = Mode::from_gap(gaps[i]);
        while b - a > tol_db {
            let mid = 0.5 * (a + b);
            if Mode::from_gap(rate_gap(cfg, mid)?) == mode_a {
                a = mid;
            } else {
                b = mid;
            }
        }
        crossings.push(0.5 * (a + b));
    }
    let max_gap = gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if crossings.is_empty() && max_gap > -0.05 && max_gap <= 0.0 {
        log::info!("SU and MU curves nearly touch: closest approach {:.4} bps/Hz", -max_gap);
    }
    Ok(SwitchReport {
        active_mode: intervals(lo, hi, &crossings, Mode::from_gap(gaps[0])),
        crossings_db: crossings,
        method: Method::ClosedForm,
        max_mu_advantage_bps_hz: max_gap,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "snake_case")]
pub enum RegionAxis {
    Doppler(Vec<f64>),
    Bits(Vec<u32>),
    NTx(Vec<usize>),
}

impl RegionAxis {
    pub fn name(&self) -> &'static str {
        match self {
            RegionAxis::Doppler(_) => "doppler_ts",
            RegionAxis::Bits(_) => "feedback_bits",
            RegionAxis::NTx(_) => "n_tx",
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            RegionAxis::Doppler(v) => v.clone(),
            RegionAxis::Bits(v) => v.iter().map(|&b| b as f64).collect(),
            RegionAxis::NTx(v) => v.iter().map(|&n| n as f64).collect(),
        }
    }

    fn len(&self) -> usize {
        match self {
            RegionAxis::Doppler(v) => v.len(),
            RegionAxis::Bits(v) => v.len(),
            RegionAxis::NTx(v) => v.len(),
        }
    }

    fn apply(&self, base: &ScenarioConfig, k: usize) -> ScenarioConfig {
        let mut cfg = base.clone();
        match self {
            RegionAxis::Doppler(v) => cfg.doppler_ts = Some(v[k]),
            RegionAxis::Bits(v) => cfg.feedback_bits = Some(v[k]),
            RegionAxis::NTx(v) => {
                cfg.n_tx = v[k];
                cfg.n_users = v[k];
                cfg.per_user_rho = None;
            }
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionGrid {
    pub axis1_name: String,
    pub axis1: Vec<f64>,
    pub axis2_name: String,
    pub axis2: Vec<f64>,
    /// `cell_mode[j][i]` is the mode at `(axis1[i], axis2[j])`.
    pub cell_mode: Vec<Vec<Mode>>,
}

impl RegionGrid {
    /// Axis-2 rows with at least one MU cell.
    pub fn mu_rows(&self) -> Vec<usize> {
        (0..self.axis2.len())
            .filter(|&j| self.cell_mode[j].contains(&Mode::Mu))
            .collect()
    }

    /// Cells where MU is active at one axis-2 value but not at the next.
    pub fn monotonicity_violations(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for j in 0..self.axis2.len().saturating_sub(1) {
            for i in 0..self.axis1.len() {
                if self.cell_mode[j][i] == Mode::Mu && self.cell_mode[j + 1][i] == Mode::Su {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// SU/MU decision on every `(snr, axis2)` cell of a grid.
pub fn operating_region(base_cfg: &ScenarioConfig, axis2: &RegionAxis, snr_grid_db: &[f64]) -> Result<RegionGrid> {
    operating_region_with(base_cfg, axis2, snr_grid_db, Execution::Parallel)
}

pub fn operating_region_with(
    base_cfg: &ScenarioConfig,
    axis2: &RegionAxis,
    snr_grid_db: &[f64],
    execution: Execution,
) -> Result<RegionGrid> {
    if snr_grid_db.is_empty() || axis2.len() == 0 {
        return Err(Error::Config("region grids must be non-empty".into()));
    }
    let (n1, n2) = (snr_grid_db.len(), axis2.len());
    let configs: Vec<ScenarioConfig> = (0..n2).map(|k| axis2.apply(base_cfg, k)).collect();
    for cfg in &configs {
        cfg.validate()?;
    }
    let cells = map_indexed(n1 * n2, execution, |idx| {
        let (j, i) = (idx / n1, idx % n1);
        rate_gap(&configs[j], snr_grid_db[i]).map(Mode::from_gap)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let grid = RegionGrid {
        axis1_name: "snr_db".into(),
        axis1: snr_grid_db.to_vec(),
        axis2_name: axis2.name().into(),
        axis2: axis2.values(),
        cell_mode: cells.chunks(n1).map(|c| c.to_vec()).collect(),
    };
    if let RegionAxis::Bits(_) = axis2 {
        let bad = grid.monotonicity_violations();
        if !bad.is_empty() {
            log::warn!("MU region shrinks with more feedback bits at {} cells", bad.len());
        }
    }
    Ok(grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2Row {
    pub doppler_ts: f64,
    pub zf_calc_db: Option<f64>,
    pub zf_mc_db: Option<f64>,
    pub mmse_mc_db: Option<f64>,
}

/// MC crossing where the MU curve drops below SU, searched on a 1 dB grid
/// outward from `start_db` and linearly interpolated.
fn mc_upper_crossing<F>(start_db: f64, (lo, hi): (f64, f64), gap: F) -> Result<Option<f64>>
where
    F: Fn(f64) -> Result<f64>,
{
    let mut x = start_db.round().clamp(lo, hi);
    let mut g = gap(x)?;
    let step = if g > 0.0 { 1.0 } else { -1.0 };
    loop {
        let nx = x + step;
        if nx < lo || nx > hi {
            return Ok(None);
        }
        let ng = gap(nx)?;
        if (ng > 0.0) != (g > 0.0) {
            let (xa, ga, xb, gb) = if step > 0.0 { (x, g, nx, ng) } else { (nx, ng, x, g) };
            return Ok(Some(xa + ga / (ga - gb) * (xb - xa)));
        }
        x = nx;
        g = ng;
    }
}

/// Delay-only switching points at `Nt = U = 4`: the upper closed-form
/// crossing and the Monte Carlo ZF and MMSE crossings near it.
pub fn table2_report(fdts_list: &[f64], snr_range_db: (f64, f64), mc: &MonteCarloSpec) -> Result<Vec<Table2Row>> {
    fdts_list
        .iter()
        .map(|&fdts| {
            let cfg = ScenarioConfig::delay_only(4, 4, 0.0, fdts);
            let calc = find_switching_points(&cfg, snr_range_db, 0.01)?
                .crossings_db
                .last()
                .copied();
            let Some(start) = calc else {
                return Ok(Table2Row {
                    doppler_ts: fdts,
                    zf_calc_db: None,
                    zf_mc_db: None,
                    mmse_mc_db: None,
                });
            };
            let su = ScenarioConfig::delay_only(4, 1, 0.0, fdts);
            let bf = |db: f64| {
                Ok::<f64, Error>(simulate_bf(&su.clone().with_snr_db(db), CsitKind::Delayed, mc)?.mean_bps_hz)
            };
            let zf = mc_upper_crossing(start, snr_range_db, |db| {
                Ok(simulate_zf(&cfg.clone().with_snr_db(db), CsitKind::Delayed, mc)?.mean_bps_hz - bf(db)?)
            })?;
            let mmse = mc_upper_crossing(zf.unwrap_or(start), snr_range_db, |db| {
                Ok(simulate_mmse(&cfg.clone().with_snr_db(db), CsitKind::Delayed, mc)?.mean_bps_hz - bf(db)?)
            })?;
            Ok(Table2Row {
                doppler_ts: fdts,
                zf_calc_db: Some(start),
                zf_mc_db: zf,
                mmse_mc_db: mmse,
            })
        })
        .collect()
}
