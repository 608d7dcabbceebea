//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed certificate (`analyze`), 2 invalid
//! configuration or usage, 3 simulation or output error.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::{ConfigError, ScenarioFile};
use crate::convergence::{certify, Certificate};
use crate::export::{self, CampaignDocument, ExportError};
use crate::sim::{monte_carlo, run_campaign, Scenario, SimError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATE_FAILED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_SIMULATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "tilc-aar", version, about = "Probe-drogue docking with terminal iterative learning control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fly one learning campaign.
    Simulate {
        config: PathBuf,
        /// Master seed; defaults to `campaign.master_seed` from the file.
        #[arg(long)]
        seed: Option<u64>,
        /// Number of docking attempts.
        #[arg(long)]
        attempts: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Fly independent campaigns and report success statistics.
    Montecarlo {
        config: PathBuf,
        #[arg(long, default_value_t = 100)]
        runs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        attempts: Option<usize>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Print the convergence certificate for the file's M1 and learning gains.
    Analyze { config: PathBuf },
}

#[derive(Debug)]
enum Failure {
    Invalid(String),
    Simulation(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidScenario(m) => Failure::Invalid(m),
            other => Failure::Simulation(other.to_string()),
        }
    }
}

impl From<ExportError> for Failure {
    fn from(e: ExportError) -> Self {
        Failure::Simulation(e.to_string())
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Simulate { config, seed, attempts, out } => simulate(&config, seed, attempts, &out),
        Command::Montecarlo { config, runs, seed, attempts, out } => montecarlo(&config, runs, seed, attempts, &out),
        Command::Analyze { config } => analyze(&config),
    };
    match result {
        Ok(code) => code,
        Err(Failure::Invalid(m)) => {
            eprintln!("error: {m}");
            EXIT_INVALID
        }
        Err(Failure::Simulation(m)) => {
            eprintln!("simulation error: {m}");
            EXIT_SIMULATION
        }
    }
}

fn load(path: &Path, seed: Option<u64>, attempts: Option<usize>) -> Result<Scenario, Failure> {
    let mut scenario = ScenarioFile::load(path)?.into_scenario()?;
    if let Some(s) = seed {
        scenario.campaign.master_seed = s;
    }
    if let Some(n) = attempts {
        if n == 0 {
            return Err(Failure::Invalid("--attempts must be >= 1".into()));
        }
        scenario.campaign.n_attempts = n;
    }
    Ok(scenario)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Simulation(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| Failure::Simulation(format!("{}: {e}", path.display())))
}

fn simulate(config: &Path, seed: Option<u64>, attempts: Option<usize>, out: &Path) -> Result<i32, Failure> {
    let scenario = load(config, seed, attempts)?;
    let result = run_campaign(&scenario)?;
    let results = std::slice::from_ref(&result);
    export::write_json(create(out, "campaign.json")?, &CampaignDocument::new(&scenario, &result))?;
    export::write_attempts_csv(create(out, "attempts.csv")?, results)?;
    export::write_trajectories_csv(create(out, "trajectories.csv")?, results)?;
    for a in &result.attempts {
        match a.radial_error {
            Some(e) => {
                println!("attempt {}: radial error {:.4} m, {}", a.k, e, if a.success { "success" } else { "failure" })
            }
            None => println!("attempt {}: no contact (timeout)", a.k),
        }
    }
    Ok(EXIT_OK)
}

fn montecarlo(
    config: &Path,
    runs: usize,
    seed: Option<u64>,
    attempts: Option<usize>,
    out: &Path,
) -> Result<i32, Failure> {
    if runs == 0 {
        return Err(Failure::Invalid("--runs must be >= 1".into()));
    }
    let scenario = load(config, seed, attempts)?;
    let (report, results) = monte_carlo(&scenario, runs)?;
    export::write_report(create(out, "report.json")?, &report)?;
    export::write_attempts_csv(create(out, "attempts.csv")?, &results)?;
    println!(
        "{} runs: success rate {:.3}, steady-state {:.3} (95% CI {:.3} to {:.3})",
        report.n_runs,
        report.success_rate,
        report.steady_state_success_rate,
        report.steady_state_ci.0,
        report.steady_state_ci.1
    );
    Ok(EXIT_OK)
}

#[derive(Debug, Serialize)]
struct AnalyzeOutput {
    schema_version: u32,
    failures: Vec<String>,
    certificate: Certificate,
}

fn analyze(config: &Path) -> Result<i32, Failure> {
    let file = ScenarioFile::load(config)?;
    let m1 = file.disturbances.m1_matrix()?;
    let gains = file.tilc.gains();
    let (b_pr, b_dr) = (file.disturbances.b_pr, file.disturbances.b_dr);
    for (v, key) in [(b_pr, "disturbances.b_pr"), (b_dr, "disturbances.b_dr")] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Failure::Invalid(format!("{key}: must be >= 0")));
        }
    }
    if gains.k_alpha.iter().chain(gains.k_p.iter()).any(|v| !v.is_finite()) {
        return Err(Failure::Invalid("tilc: gains must be finite".into()));
    }
    let cert = certify(&m1, &gains, b_pr, b_dr);
    let mut failures = cert.gain_violations.clone();
    if !cert.m1_negative_definite {
        failures.push("NotNegativeDefinite: disturbances.m1 is not negative definite".into());
    }
    if let Some(e) = &cert.error {
        failures.push(e.clone());
    } else if !cert.spectral_radius_below_one {
        failures.push(format!("spectral radius {:?} is not below 1", cert.spectral_radius));
    }
    let pass = cert.pass;
    let output = AnalyzeOutput { schema_version: export::SCHEMA_VERSION, failures, certificate: cert };
    export::write_json(std::io::stdout().lock(), &output)?;
    Ok(if pass { EXIT_OK } else { EXIT_CERTIFICATE_FAILED })
}
