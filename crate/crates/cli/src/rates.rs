use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use modesim::channel::ScenarioConfig;
use modesim::closed_form::{r_bf_delay, r_bf_qd_approx, r_zf_delay, r_zf_qd_approx};
use modesim::precoding::CsitKind;
use modesim::simulate::{simulate_bf, simulate_mmse, simulate_zf, MonteCarloSpec};

use crate::output::{emit, parse_grid, RunManifest};
use crate::{config, CellApprox, CliError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Scheme {
    Bf,
    Zf,
    Mmse,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RateMethod {
    Closed,
    Mc,
}

#[derive(Args, Debug)]
pub struct RatesArgs {
    /// Scenario JSON file.
    config: PathBuf,
    #[arg(long, value_enum)]
    mode: Scheme,
    #[arg(long, value_enum, default_value = "closed")]
    method: RateMethod,
    /// SNR grid in dB as lo:step:hi; defaults to the scenario's snr_db.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Exact RVQ codebooks or the cell approximation for quantized CSIT.
    #[arg(long, value_enum, default_value = "auto")]
    cell_approx: CellApprox,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Row {
    snr_db: f64,
    rate: f64,
    std_error: Option<f64>,
    per_user: Vec<f64>,
}

/// CSIT the scenario implies: quantized when it has feedback bits, delayed
/// when its channel error variance is positive.
fn csit_of(cfg: &ScenarioConfig) -> Result<CsitKind, CliError> {
    let delayed = (0..cfg.n_users).try_fold(false, |acc, u| Ok::<_, CliError>(acc || cfg.user_model(u)?.1 > 0.0))?;
    Ok(match (cfg.feedback_bits.is_some(), delayed) {
        (true, true) => CsitKind::QuantizedDelayed,
        (true, false) => CsitKind::Quantized,
        (false, true) => CsitKind::Delayed,
        (false, false) => CsitKind::Perfect,
    })
}

fn closed_row(cfg: &ScenarioConfig, mode: Scheme) -> Result<Row, CliError> {
    let (rate, per_user) = match mode {
        Scheme::Bf => {
            let r = if cfg.feedback_bits.is_some() {
                r_bf_qd_approx(cfg)?
            } else {
                r_bf_delay(cfg)?
            };
            (r, vec![r])
        }
        Scheme::Zf => {
            let r = if cfg.feedback_bits.is_some() {
                r_zf_qd_approx(cfg)?
            } else {
                r_zf_delay(cfg)?
            };
            (r.sum, r.per_user)
        }
        Scheme::Mmse => unreachable!("rejected before evaluation"),
    };
    Ok(Row {
        snr_db: cfg.snr_db,
        rate,
        std_error: None,
        per_user,
    })
}

fn mc_row(cfg: &ScenarioConfig, mode: Scheme, mc: &MonteCarloSpec) -> Result<Row, CliError> {
    let csit = csit_of(cfg)?;
    let est = match mode {
        Scheme::Bf => simulate_bf(cfg, csit, mc)?,
        Scheme::Zf => simulate_zf(cfg, csit, mc)?,
        Scheme::Mmse => simulate_mmse(cfg, csit, mc)?,
    };
    Ok(Row {
        snr_db: cfg.snr_db,
        rate: est.mean_bps_hz,
        std_error: Some(est.std_error),
        per_user: est.per_user,
    })
}

fn command_line(args: &RatesArgs, grid: &str) -> String {
    let mode = args.mode.to_possible_value().expect("named").get_name().to_string();
    let method = args.method.to_possible_value().expect("named").get_name().to_string();
    let mut s = format!("rates --mode {mode} --method {method} --snr-db {grid}");
    if args.method == RateMethod::Mc {
        let cell = args
            .cell_approx
            .to_possible_value()
            .expect("named")
            .get_name()
            .to_string();
        let _ = write!(s, " --trials {} --seed {} --cell-approx {cell}", args.trials, args.seed);
    }
    s
}

pub fn run(args: RatesArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if args.mode == Scheme::Mmse && args.method == RateMethod::Closed {
        return Err(CliError::Config("mmse has no closed form; use --method mc".into()));
    }
    let loaded = config::load(&args.config)?;
    let mut base = loaded.scenario.clone();
    if args.mode == Scheme::Bf {
        base.n_users = 1;
        base.per_user_rho = base.per_user_rho.map(|r| vec![r[0]]);
    } else if base.n_users != base.n_tx {
        return Err(CliError::Config(format!(
            "{:?} needs n_users = n_tx ({}), got {}",
            args.mode, base.n_tx, base.n_users
        )));
    }
    let grid_spec = args.snr_db.clone().unwrap_or_else(|| format!("{0}:1:{0}", base.snr_db));
    let grid = parse_grid(&grid_spec)?;
    let mc = MonteCarloSpec {
        use_cell_approx: args.cell_approx.setting(),
        ..MonteCarloSpec::new(args.trials, args.seed)
    };
    if args.method == RateMethod::Mc {
        mc.validate()?;
    }

    let rows = grid
        .iter()
        .map(|&snr| {
            let cfg = base.clone().with_snr_db(snr);
            match args.method {
                RateMethod::Closed => closed_row(&cfg, args.mode),
                RateMethod::Mc => mc_row(&cfg, args.mode, &mc),
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.with_scenario(&loaded.canonical))?;

    let manifest = RunManifest::new(command_line(&args, &grid_spec), &loaded, args.seed);
    let mut body = manifest.comment_lines();
    body.push_str("snr_db,rate_bps_hz,std_error");
    for u in 1..=base.n_users {
        let _ = write!(body, ",per_user_{u}");
    }
    body.push('\n');
    for row in &rows {
        let se = row.std_error.map(|s| s.to_string()).unwrap_or_default();
        let _ = write!(body, "{},{},{se}", row.snr_db, row.rate);
        for r in &row.per_user {
            let _ = write!(body, ",{r}");
        }
        body.push('\n');
    }
    emit(args.out.as_deref(), &body)?;
    log::info!(
        "rates: {} points, wall_time_s={:.3}",
        rows.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
