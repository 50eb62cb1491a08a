use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, ValueEnum};
use modesim::mode_switch::{find_switching_points, operating_region, RegionAxis, SwitchReport};
use serde::Serialize;

use crate::output::{emit, parse_grid, parse_range, RunManifest};
use crate::{config, CliError};

#[derive(Args, Debug)]
pub struct SwitchArgs {
    /// Scenario JSON file.
    config: PathBuf,
    /// SNR scan range in dB as lo:hi.
    #[arg(long, default_value = "-10:60", allow_hyphen_values = true)]
    snr_range: String,
    /// Bisection tolerance in dB.
    #[arg(long, default_value_t = 0.01)]
    tol_db: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize)]
struct SwitchDocument<'a> {
    manifest: &'a RunManifest,
    report: &'a SwitchReport,
}

pub fn run_switch(args: SwitchArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let loaded = config::load(&args.config)?;
    let range = parse_range(&args.snr_range)?;
    let report = find_switching_points(&loaded.scenario, range, args.tol_db)
        .map_err(|e| CliError::from(e).with_scenario(&loaded.canonical))?;
    let command = format!("switch --snr-range {}:{} --tol-db {}", range.0, range.1, args.tol_db);
    let manifest = RunManifest::new(command, &loaded, 0);
    let mut body = serde_json::to_string_pretty(&SwitchDocument {
        manifest: &manifest,
        report: &report,
    })
    .expect("report serializes");
    body.push('\n');
    emit(args.out.as_deref(), &body)?;
    log::info!(
        "switch: {} crossing(s), wall_time_s={:.3}",
        report.crossings_db.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Doppler,
    Bits,
    Ntx,
}

#[derive(Args, Debug)]
pub struct RegionArgs {
    /// Scenario JSON file; the swept field overrides its value.
    config: PathBuf,
    #[arg(long, value_enum)]
    axis: Axis,
    /// Values of the swept field as lo:step:hi.
    #[arg(long)]
    grid: String,
    /// SNR grid in dB as lo:step:hi.
    #[arg(long, default_value = "-10:1:60", allow_hyphen_values = true)]
    snr_db: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn integer_axis(values: &[f64], name: &str) -> Result<Vec<u32>, CliError> {
    values
        .iter()
        .map(|&v| {
            if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
                Ok(v as u32)
            } else {
                Err(CliError::Config(format!(
                    "{name} grid values must be non-negative integers, got {v}"
                )))
            }
        })
        .collect()
}

pub fn run_region(args: RegionArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let loaded = config::load(&args.config)?;
    let values = parse_grid(&args.grid)?;
    let axis = match args.axis {
        Axis::Doppler => RegionAxis::Doppler(values),
        Axis::Bits => RegionAxis::Bits(integer_axis(&values, "bits")?),
        Axis::Ntx => RegionAxis::NTx(integer_axis(&values, "ntx")?.into_iter().map(|n| n as usize).collect()),
    };
    let snr = parse_grid(&args.snr_db)?;
    let grid = operating_region(&loaded.scenario, &axis, &snr)
        .map_err(|e| CliError::from(e).with_scenario(&loaded.canonical))?;

    let axis_name = args.axis.to_possible_value().expect("named").get_name().to_string();
    let command = format!(
        "region --axis {axis_name} --grid {} --snr-db {}",
        args.grid, args.snr_db
    );
    let mut body = RunManifest::new(command, &loaded, 0).comment_lines();
    let _ = write!(body, "{}\\{}", grid.axis2_name, grid.axis1_name);
    for s in &grid.axis1 {
        let _ = write!(body, ",{s}");
    }
    body.push('\n');
    for (value, row) in grid.axis2.iter().zip(&grid.cell_mode) {
        let _ = write!(body, "{value}");
        for mode in row {
            let _ = write!(body, ",{}", mode.label());
        }
        body.push('\n');
    }
    emit(args.out.as_deref(), &body)?;
    log::info!(
        "region: {}x{} cells, {} MU row(s), wall_time_s={:.3}",
        grid.axis2.len(),
        grid.axis1.len(),
        grid.mu_rows().len(),
        started.elapsed().as_secs_f64()
    );
    Ok(())
}
