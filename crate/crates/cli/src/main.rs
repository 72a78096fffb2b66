use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use spectral_control::experiment::{gamma_advantage_demo, run_experiment, ExperimentConfig, RunOptions};
use spectral_control::fastconv::{ConvMode, StreamConvolver};
use spectral_control::filters::{verify_tail_bound, FilterBank};
use spectral_control::lds::SystemBounds;
use spectral_control::learner::horizon_schedule;
use spectral_control::par::{with_threads, Execution};
use spectral_control::{verify, Error};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_CHECK_FAILED: u8 = 4;

#[derive(Parser)]
#[command(name = "bench", version, about = "Online spectral control experiments and checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Direct,
    Fast,
    Auto,
}

impl From<Mode> for ConvMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Direct => ConvMode::Direct,
            Mode::Fast => ConvMode::Fast,
            Mode::Auto => ConvMode::Auto,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment config and write traces and reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; 1 runs sequentially.
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Print the parameter schedule for a horizon as JSON.
    Schedule {
        #[arg(long = "T")]
        horizon: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 1.0)]
        kappa: f64,
        #[arg(long = "kappaB", default_value_t = 1.0)]
        kappa_b: f64,
        #[arg(long = "W", default_value_t = 1.0)]
        w: f64,
        #[arg(long = "G", default_value_t = 1.0)]
        g: f64,
    },
    /// Compute filters and print their eigenvalues.
    Filters {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        h: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Check the eigenvalue tail bound for this horizon.
        #[arg(long)]
        verify: Option<u64>,
    },
    /// Time streaming convolution per step.
    Convbench {
        #[arg(long = "T")]
        horizon: usize,
        #[arg(long)]
        m: usize,
        #[arg(long)]
        h: usize,
        #[arg(long, value_enum, default_value = "auto")]
        mode: Mode,
        #[arg(long, default_value_t = 0.05)]
        gamma: f64,
        #[arg(long, default_value_t = 1)]
        d: usize,
    },
    /// Compare best achievable costs for polynomial and polylog margins.
    GammaDemo {
        #[arg(long = "T")]
        horizon: usize,
        #[arg(long)]
        k: f64,
    },
    /// Run the filter invariant suite.
    Verify {
        /// Print the report as JSON instead of one line per check.
        #[arg(long)]
        json: bool,
    },
}

enum Failure {
    Lib(Error),
    Config(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Lib(e.into())
    }
}

fn print_json(v: &impl serde::Serialize) -> Result<(), Failure> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn percentile(sorted: &[u64], p: f64) -> u64 {
    if sorted.is_empty() {
        return 0;
    }
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

fn run(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run {
            config,
            out,
            parallel,
        } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| Failure::Config(format!("cannot read {}: {e}", config.display())))?;
            let cfg = ExperimentConfig::from_json(&text)?;
            let opts = RunOptions {
                exec: if parallel == Some(1) {
                    Execution::Sequential
                } else {
                    Execution::Parallel
                },
                record_timing: false,
            };
            let result = with_threads(parallel, || run_experiment(&cfg, opts))?;
            let dir = out
                .or_else(|| cfg.output_dir.clone().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
            result.write(&cfg, &dir)?;
            let runs: Vec<_> = result
                .reports
                .iter()
                .map(|r| {
                    json!({
                        "controller": r.controller,
                        "seed": r.seed,
                        "total_cost": r.total_cost,
                        "comparator": r.comparator,
                        "regret": r.regret,
                        "final_quarter_mean": r.final_quarter_mean,
                    })
                })
                .collect();
            print_json(&json!({
                "config_hash": result.config_hash,
                "output_dir": dir.display().to_string(),
                "runs": runs,
            }))
        }
        Cmd::Schedule {
            horizon,
            gamma,
            d,
            kappa,
            kappa_b,
            w,
            g,
        } => {
            let bounds = SystemBounds {
                kappa,
                kappa_b,
                w_bound: w,
                gamma,
            };
            print_json(&horizon_schedule(horizon, bounds, g, d)?)
        }
        Cmd::Filters {
            m,
            gamma,
            h,
            out,
            verify,
        } => {
            let bank = FilterBank::new(m, gamma, h)?;
            if let Some(path) = &out {
                fs::write(path, bank.to_json() + "\n").map_err(Error::from)?;
            }
            let mut report = json!({ "m": m, "gamma": gamma, "h": bank.h, "sigmas": bank.sigmas });
            let mut pass = true;
            if let Some(horizon) = verify {
                let tail = verify_tail_bound(&bank, horizon)?;
                pass = tail.all_pass();
                let rows: Vec<_> = tail
                    .rows
                    .iter()
                    .map(|r| json!({ "j": r.j, "sigma": r.sigma, "bound": r.bound, "pass": r.pass }))
                    .collect();
                report["tail_bound"] = json!({ "T": horizon, "pass": pass, "rows": rows });
            }
            print_json(&report)?;
            if pass {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
        Cmd::Convbench {
            horizon,
            m,
            h,
            mode,
            gamma,
            d,
        } => {
            let bank = FilterBank::new(m, gamma, h)?;
            let mut conv = StreamConvolver::new(&bank, d, mode.into())?;
            let mut w = vec![0.0; d];
            let mut ns = Vec::with_capacity(horizon);
            let mut sink = 0.0;
            for t in 0..horizon {
                for (k, x) in w.iter_mut().enumerate() {
                    *x = (0.37 * t as f64 + k as f64).sin();
                }
                let start = Instant::now();
                conv.push(&w)?;
                for i in 0..conv.h() {
                    sink += conv.query_slice(i)?[0];
                }
                ns.push(start.elapsed().as_nanos() as u64);
            }
            std::hint::black_box(sink);
            let mean = ns.iter().sum::<u64>() as f64 / horizon.max(1) as f64;
            ns.sort_unstable();
            print_json(&json!({
                "T": horizon,
                "m": m,
                "h": bank.h,
                "d": d,
                "mode": format!("{:?}", conv.mode()).to_lowercase(),
                "ops": conv.ops(),
                "ops_per_step": conv.ops() as f64 / horizon.max(1) as f64,
                "ns": {
                    "mean": mean,
                    "p50": percentile(&ns, 0.5),
                    "p90": percentile(&ns, 0.9),
                    "p99": percentile(&ns, 0.99),
                    "max": ns.last().copied().unwrap_or(0),
                },
            }))
        }
        Cmd::GammaDemo { horizon, k } => print_json(&gamma_advantage_demo(horizon, k)?),
        Cmd::Verify { json } => {
            let report = verify::run_suite()?;
            if json {
                print_json(&report)?;
            } else {
                for c in &report.checks {
                    println!(
                        "{} {:<20} {:<28} value={:.3e} limit={:.3e}",
                        if c.pass { "PASS" } else { "FAIL" },
                        c.name,
                        c.case,
                        c.value,
                        c.limit
                    );
                }
            }
            if report.all_pass() {
                Ok(())
            } else {
                Err(Failure::Check)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            if e.is_config() {
                ExitCode::from(EXIT_CONFIG)
            } else if e.is_numerical() {
                ExitCode::from(EXIT_NUMERICAL)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
