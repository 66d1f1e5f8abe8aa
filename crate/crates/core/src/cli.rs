//! Command-line front end.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid config or input
//! file, 3 training collapsed (artifacts are still written), 4 training
//! diverged or produced a non-finite loss, 5 `verify` found a failing check.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::buckets::BucketConfig;
use crate::compare::{compare, Baseline, CompareSettings, Matching};
use crate::curve::{evaluate, CurveRequest, Resolution};
use crate::error::{Error, Result};
use crate::io::{fmt_full, write_atomic};
use crate::learner::{train, Accountant, TrainConfig};
use crate::moments::LambdaSearch;
use crate::noise::{NoisePmf, NoiseSampler};
use crate::verify::verify;
use crate::worst_case::Scenario;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_COLLAPSE: u8 = 3;
pub const EXIT_DIVERGENCE: u8 = 4;
pub const EXIT_VERIFY_FAILED: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "trunc-noise", version, about = "Learn and audit truncated DP noise")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a noise distribution from a run config.
    Optimize {
        config: PathBuf,
    },
    /// δ(ε) curves of a noise file.
    Evaluate {
        #[arg(long)]
        noise: PathBuf,
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        n: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "0.3")]
        eps: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "adp,pdp,ma")]
        accountants: Vec<AccountantArg>,
        /// Buckets per side.
        #[arg(long, default_value_t = crate::buckets::REFERENCE_HALF_COUNT)]
        half_count: usize,
        /// Fixed bucket factor; by default it is chosen to cover the losses.
        #[arg(long)]
        factor: Option<f64>,
        /// Add exact columns for small supports.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Match a baseline to a noise file and report the KL divergence.
    Compare {
        #[arg(long)]
        noise: PathBuf,
        #[arg(long, value_enum)]
        baseline: BaselineArg,
        #[arg(long, value_enum, default_value = "delta")]
        matching: MatchingArg,
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1)]
        n: u32,
        #[arg(long, default_value_t = 2)]
        utility_order: u8,
        #[arg(long, default_value_t = 2000)]
        half_count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Structure, shift-invariance, normalization and soundness checks.
    Verify {
        #[arg(long)]
        noise: PathBuf,
        #[arg(long, value_parser = parse_scenario)]
        scenario: Scenario,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw samples from a noise file.
    Sample {
        #[arg(long)]
        noise: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 1)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AccountantArg {
    Adp,
    Pdp,
    Ma,
}

impl From<AccountantArg> for Accountant {
    fn from(a: AccountantArg) -> Self {
        match a {
            AccountantArg::Adp => Accountant::Adp,
            AccountantArg::Pdp => Accountant::Pdp,
            AccountantArg::Ma => Accountant::Ma,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineArg {
    Gaussian,
    Staircase,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MatchingArg {
    Delta,
    Utility,
}

/// `sensitivity:<s>` or `dpsgd:<q>:<clip>`.
pub fn parse_scenario(text: &str) -> std::result::Result<Scenario, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| f64::from_str(s).map_err(|e| format!("{s}: {e}"));
    match parts.as_slice() {
        ["sensitivity", s] => Ok(Scenario::Sensitivity { s: num(s)? }),
        ["dpsgd", q, clip] => Ok(Scenario::Dpsgd {
            q: num(q)?,
            clip: num(clip)?,
        }),
        _ => Err(format!(
            "expected `sensitivity:<s>` or `dpsgd:<q>:<clip>`, got `{text}`"
        )),
    }
}

/// Post-training curve settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportOptions {
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "default_accountants")]
    pub accountants: Vec<Accountant>,
}

fn default_eps_list() -> Vec<f64> {
    (0..=40).map(|i| i as f64 * 0.025).collect()
}

fn default_accountants() -> Vec<Accountant> {
    vec![Accountant::Adp, Accountant::Pdp]
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions {
            eps_list: default_eps_list(),
            accountants: default_accountants(),
        }
    }
}

/// Contents of an `optimize` config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub report: ReportOptions,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::schema("config", e.to_string()))?;
        cfg.train.validate()?;
        Ok(cfg)
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidArgument(_) | Error::Schema { .. } | Error::Json(_) => EXIT_INVALID,
        Error::NonFiniteLoss { .. } | Error::Divergence { .. } => EXIT_DIVERGENCE,
        _ => EXIT_FAILURE,
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Artifacts written by `optimize`.
pub struct OptimizeOutcome {
    pub noise_path: PathBuf,
    pub metrics_path: PathBuf,
    pub curve_path: PathBuf,
    pub collapsed: bool,
}

pub fn run_optimize(cfg: &RunConfig) -> Result<OptimizeOutcome> {
    let result = train(&cfg.train)?;
    std::fs::create_dir_all(&cfg.output_dir)?;
    let noise_path = cfg.output_dir.join("noise.json");
    let metrics_path = cfg.output_dir.join("metrics.csv");
    let curve_path = cfg.output_dir.join("curve.csv");
    result.noise.save(&noise_path)?;
    write_atomic(&metrics_path, result.metrics_csv().as_bytes())?;
    let pair = cfg.train.scenario.pair(&result.noise)?;
    let req = CurveRequest {
        accountants: &cfg.report.accountants,
        n_list: &[cfg.train.compositions],
        eps_list: &cfg.report.eps_list,
        resolution: Resolution::Reference {
            half_count: cfg.train.reference_half_count,
        },
        lambda_search: LambdaSearch::default(),
        oracle: false,
    };
    write_atomic(&curve_path, evaluate(&pair, &req)?.to_csv().as_bytes())?;
    Ok(OptimizeOutcome {
        noise_path,
        metrics_path,
        curve_path,
        collapsed: result.collapsed,
    })
}

fn sample_text(noise: &NoisePmf, count: usize, dim: usize, seed: u64) -> Result<String> {
    let mut sampler = NoiseSampler::new(noise, seed);
    let mut out = String::new();
    for _ in 0..count {
        if dim == 1 {
            out.push_str(&fmt_full(sampler.sample()));
        } else {
            let v = sampler.sample_radial(dim)?;
            let line: Vec<String> = v.into_iter().map(fmt_full).collect();
            out.push_str(&line.join(","));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Runs one command and returns its exit code.
pub fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Optimize { config } => {
            let cfg = RunConfig::load(&config)?;
            let outcome = run_optimize(&cfg)?;
            eprintln!(
                "wrote {}, {}, {}",
                outcome.noise_path.display(),
                outcome.metrics_path.display(),
                outcome.curve_path.display()
            );
            if outcome.collapsed {
                eprintln!("training collapsed: δ ≈ 1 with all mass at the centre");
                return Ok(EXIT_COLLAPSE);
            }
            Ok(EXIT_OK)
        }
        Command::Evaluate {
            noise,
            scenario,
            n,
            eps,
            accountants,
            half_count,
            factor,
            oracle,
            out,
        } => {
            let noise = NoisePmf::load(&noise)?;
            let pair = scenario.pair(&noise)?;
            let resolution = match factor {
                Some(f) => Resolution::Fixed {
                    config: BucketConfig::new(half_count, f)?,
                },
                None => Resolution::Reference { half_count },
            };
            let accountants: Vec<Accountant> = accountants.into_iter().map(Into::into).collect();
            let req = CurveRequest {
                accountants: &accountants,
                n_list: &n,
                eps_list: &eps,
                resolution,
                lambda_search: LambdaSearch::default(),
                oracle,
            };
            emit(out.as_deref(), &evaluate(&pair, &req)?.to_csv())?;
            Ok(EXIT_OK)
        }
        Command::Compare {
            noise,
            baseline,
            matching,
            scenario,
            eps,
            n,
            utility_order,
            half_count,
            out,
        } => {
            let noise = NoisePmf::load(&noise)?;
            let settings = CompareSettings {
                scenario,
                eps,
                n,
                utility_order,
                resolution: Resolution::Reference { half_count },
                scan_points: 60,
            };
            let baseline = match baseline {
                BaselineArg::Gaussian => Baseline::Gaussian,
                BaselineArg::Staircase => Baseline::Staircase,
            };
            let matching = match matching {
                MatchingArg::Delta => Matching::Delta,
                MatchingArg::Utility => Matching::Utility,
            };
            let report = compare(&noise, baseline, matching, &settings)?;
            emit(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
            Ok(EXIT_OK)
        }
        Command::Verify {
            noise,
            scenario,
            eps,
            out,
        } => {
            let noise = NoisePmf::load_unchecked(&noise)?;
            noise.grid.validate()?;
            if noise.pmf.len() != noise.grid.len() {
                return Err(Error::schema("pmf", "length does not match 2*half_points"));
            }
            let report = verify(&noise, &scenario, eps)?;
            emit(out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&report)?))?;
            Ok(if report.passes { EXIT_OK } else { EXIT_VERIFY_FAILED })
        }
        Command::Sample {
            noise,
            count,
            dim,
            seed,
            out,
        } => {
            let noise = NoisePmf::load(&noise)?;
            emit(out.as_deref(), &sample_text(&noise, count, dim, seed)?)?;
            Ok(EXIT_OK)
        }
    }
}

pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INVALID } else { EXIT_OK });
        }
    };
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
