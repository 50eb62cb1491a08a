use std::time::Instant;

use clap::{Args, ValueEnum};
use modesim::channel::{doppler_ts_from_motion, ScenarioConfig};
use modesim::closed_form::{delta_zf_interference, r_bf_perfect, r_bf_quantized, r_zf_lower_bound};
use modesim::codebook::{
    cell_approx_interference_product, cell_approx_interference_sample, expected_sq_distortion, quantization_delta,
};
use modesim::mode_switch::find_switching_points;
use modesim::numerics::quadrature::integrate_semi_infinite;
use modesim::numerics::stats::{ks_statistic, ks_two_sample};
use modesim::numerics::{expint_en, integral_i1, integral_i2, integral_i3, QuadratureSpec, RngStream};
use modesim::precoding::CsitKind;
use modesim::simulate::{estimate_avg_interference, estimate_sq_distortion, simulate_zf, MonteCarloSpec};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Numerics,
    Distributions,
    Bounds,
    Paper,
    All,
}

#[derive(Args, Debug)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value = "all")]
    suite: Suite,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

struct Check {
    name: String,
    measured: String,
    expected: String,
    pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, measured: impl Into<String>, expected: impl Into<String>, pass: bool) -> Self {
        Self {
            name: name.into(),
            measured: measured.into(),
            expected: expected.into(),
            pass,
        }
    }
}

type Checks = Result<Vec<Check>, CliError>;

fn numerics() -> Checks {
    let spec = QuadratureSpec::new(1e-14, 1e-11, 20_000)?;
    let mut worst = [0.0f64; 3];
    for a in [0.1, 1.0, 10.0] {
        for b in [0.3, 2.0, 5.0] {
            for m in 1..=3u32 {
                let p = m as i32;
                let quad = |f: &dyn Fn(f64) -> f64| integrate_semi_infinite(f, 0.0, 1.0 / a, &spec).map(|r| r.value);
                let pairs = [
                    (integral_i1(a, b, m)?, quad(&|x| x.powi(p) * (-a * x).exp() / (x + b))?),
                    (integral_i2(a, b, m)?, quad(&|x| (-a * x).exp() / (x + b).powi(p))?),
                    (
                        integral_i3(a, b, m)?,
                        quad(&|x| (-a * x).exp() / ((x + b).powi(p) * (x + 1.0)))?,
                    ),
                ];
                for (k, (closed, q)) in pairs.into_iter().enumerate() {
                    worst[k] = worst[k].max(((closed - q) / q).abs());
                }
            }
        }
    }
    let mut checks: Vec<Check> = worst
        .iter()
        .enumerate()
        .map(|(k, &err)| {
            Check::new(
                format!("I{} vs quadrature, a∈{{0.1,1,10}} b∈{{0.3,2,5}} m∈{{1,2,3}}", k + 1),
                format!("max rel err {err:.2e}"),
                "< 1e-6",
                err < 1e-6,
            )
        })
        .collect();

    let mut recurrence = 0.0f64;
    for n in 1..=8u32 {
        for x in [0.1, 1.0, 10.0] {
            let lhs = n as f64 * expint_en(n + 1, x)?;
            let rhs = (-x).exp() - x * expint_en(n, x)?;
            recurrence = recurrence.max((lhs - rhs).abs() / expint_en(n, x)?);
        }
    }
    checks.push(Check::new(
        "E_n recurrence n·E_{n+1}(x) = e^{-x} − x·E_n(x)",
        format!("max rel err {recurrence:.2e}"),
        "< 1e-10",
        recurrence < 1e-10,
    ));
    Ok(checks)
}

fn distributions(trials: u64, seed: u64) -> Checks {
    let delta = quantization_delta(4, 10)?;
    let mut exp_draws = (0..trials)
        .map(|t| cell_approx_interference_sample(4, 10, RngStream::new(seed, t)))
        .collect::<modesim::Result<Vec<_>>>()?;
    let mut product_draws = (0..trials)
        .map(|t| cell_approx_interference_product(4, 10, &mut RngStream::new(seed ^ 0x5bd1_e995, t).rng()))
        .collect::<modesim::Result<Vec<_>>>()?;
    let ks = ks_statistic(&mut exp_draws, |z| 1.0 - (-z / delta).exp());
    let ks2 = ks_two_sample(&mut exp_draws, &mut product_draws);

    let est = estimate_sq_distortion(4, 8, &MonteCarloSpec::new(trials, seed).with_cell_approx(false))?;
    let exact = expected_sq_distortion(4, 8)?.exact;
    let z = (est.mean - exact) / est.std_error;
    Ok(vec![
        Check::new(
            "interference vs Exp(δ), Nt=4 B=10",
            format!("KS {ks:.5}"),
            "< 0.015",
            ks < 0.015,
        ),
        Check::new(
            "Gamma·Beta construction vs exponential sampler",
            format!("two-sample KS {ks2:.5}"),
            "< 0.015",
            ks2 < 0.015,
        ),
        Check::new(
            "RVQ E[sin²θ], Nt=4 B=8",
            format!("{:.5} ± {:.5}", est.mean, est.std_error),
            format!("{exact:.5} within 3 se ({z:+.2} se)"),
            z.abs() <= 3.0,
        ),
    ])
}

fn bounds(trials: u64, seed: u64) -> Checks {
    let mut sandwich = true;
    for nt in 2..=8 {
        for bits in 0..=20 {
            let d = expected_sq_distortion(nt, bits)?;
            let slack = 1e-12 * d.upper;
            sandwich &= d.lower - slack <= d.exact && d.exact <= d.upper + slack;
        }
    }

    let quad = QuadratureSpec::default();
    let perfect = r_bf_perfect(10.0, 4)?;
    let mut ordered = true;
    let mut last = 0.0;
    for bits in 0..=20 {
        let r = r_bf_quantized(10.0, 4, bits, &quad)?;
        ordered &= r >= last - 1e-9 && r <= perfect + 1e-9;
        last = r;
    }

    let cfg = ScenarioConfig::delay_only(4, 4, 10.0, 0.037).with_bits(10);
    let (rho, eps_sq) = cfg.csit_model()?;
    let formula = delta_zf_interference(&cfg, rho, eps_sq)?;
    let mc = MonteCarloSpec::new(trials, seed).with_cell_approx(false);
    let measured = estimate_avg_interference(&cfg, &mc)?;
    let ideal = estimate_avg_interference(
        &ScenarioConfig::delay_only(4, 4, 10.0, 0.0),
        &MonteCarloSpec::new(1_000, seed),
    )?;

    let lower = r_zf_lower_bound(&cfg)?;
    let zf = simulate_zf(
        &cfg,
        CsitKind::QuantizedDelayed,
        &MonteCarloSpec::new(trials.min(20_000), seed),
    )?;

    Ok(vec![
        Check::new(
            "distortion sandwich, Nt 2..8, B 0..20",
            sandwich.to_string(),
            "true",
            sandwich,
        ),
        Check::new(
            "BF rate nondecreasing in B and below perfect CSIT, Nt=4 10 dB",
            ordered.to_string(),
            "true",
            ordered,
        ),
        Check::new(
            "average interference bound, Nt=U=4 B=10 fdTs=0.037 10 dB",
            format!("MC {:.4} ± {:.4}", measured.mean, measured.std_error),
            format!("<= {formula:.4}"),
            measured.mean <= formula + 3.0 * measured.std_error,
        ),
        Check::new(
            "average interference with perfect CSIT",
            format!("{:.12}", ideal.mean),
            "1 to 1e-9",
            (ideal.mean - 1.0).abs() <= 1e-9,
        ),
        Check::new(
            "ZF rate lower bound, Nt=U=4 B=10 fdTs=0.037 10 dB",
            format!("{lower:.4}"),
            format!("<= MC {:.4} ± {:.4}", zf.mean_bps_hz, zf.std_error),
            lower <= zf.mean_bps_hz + 3.0 * zf.std_error,
        ),
    ])
}

fn mu_active(cfg: &ScenarioConfig) -> modesim::Result<bool> {
    Ok(find_switching_points(cfg, (-10.0, 60.0), 0.01)?.mu_active())
}

fn paper() -> Checks {
    let mut checks = Vec::new();
    for (f, want) in [(0.03, 41.6), (0.04, 32.9), (0.05, 26.1)] {
        let got = find_switching_points(&ScenarioConfig::delay_only(4, 4, 0.0, f), (-10.0, 60.0), 0.01)?
            .crossings_db
            .last()
            .copied();
        checks.push(Check::new(
            format!("upper switching point, delay only, Nt=U=4 fdTs={f}"),
            got.map_or("none".into(), |g| format!("{g:.2} dB")),
            format!("{want} ± 0.3 dB"),
            got.is_some_and(|g| (g - want).abs() <= 0.3),
        ));
    }

    let fdts = doppler_ts_from_motion(10.0, 2e9, 1e-3);
    for (nt, allowed) in [(4usize, [12u32, 13]), (6, [19, 20]), (8, [26, 27])] {
        let mut bits = 1;
        while bits < 40 && !mu_active(&ScenarioConfig::delay_only(nt, nt, 0.0, fdts).with_bits(bits))? {
            bits += 1;
        }
        checks.push(Check::new(
            format!("smallest MU-enabling B at 10 km/h, Nt={nt}"),
            bits.to_string(),
            format!("{allowed:?}"),
            allowed.contains(&bits),
        ));
    }

    for (bits, limit) in [(20u32, 0.055), (16, 0.046)] {
        let mut first_active = None;
        for k in 0..=29 {
            let f = limit + 0.005 * k as f64;
            if mu_active(&ScenarioConfig::delay_only(4, 4, 0.0, f).with_bits(bits))? {
                first_active = Some(f);
                break;
            }
        }
        checks.push(Check::new(
            format!("no MU region for fdTs >= {limit}, Nt=4 B={bits}"),
            first_active.map_or("empty".into(), |f| format!("MU active at fdTs={f:.3}")),
            "empty",
            first_active.is_none(),
        ));
    }
    Ok(checks)
}

pub fn run(args: ValidateArgs) -> Result<(), CliError> {
    if args.trials < 100 {
        return Err(CliError::Config("--trials must be >= 100".into()));
    }
    let started = Instant::now();
    let suites = match args.suite {
        Suite::All => vec![Suite::Numerics, Suite::Distributions, Suite::Bounds, Suite::Paper],
        one => vec![one],
    };
    let mut failed = 0;
    let mut total = 0;
    for suite in suites {
        let checks = match suite {
            Suite::Numerics => numerics(),
            Suite::Distributions => distributions(args.trials, args.seed),
            Suite::Bounds => bounds(args.trials, args.seed),
            Suite::Paper => paper(),
            Suite::All => unreachable!(),
        }?;
        let label = suite.to_possible_value().expect("named").get_name().to_string();
        for c in checks {
            total += 1;
            if !c.pass {
                failed += 1;
            }
            let tag = if c.pass { "PASS" } else { "FAIL" };
            println!(
                "{tag} [{label}] {}: measured {}, expected {}",
                c.name, c.measured, c.expected
            );
        }
    }
    log::info!(
        "validate: {total} checks, wall_time_s={:.3}",
        started.elapsed().as_secs_f64()
    );
    if failed > 0 {
        return Err(CliError::Validation { failed, total });
    }
    Ok(())
}
