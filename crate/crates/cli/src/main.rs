//! `nplcm` command-line tool.

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($t:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use nplcm::simulation::ScenarioName;

use config::RunConfig;
use error::{CliError, Context};

#[derive(Parser, Debug)]
#[command(name = "nplcm", version, about = "Nested partially-latent class models for case-control data")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; defaults to the available cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Update false positive rates from controls only.
    #[arg(long, global = true)]
    cut_feedback: bool,
    /// Truncation level of the subclass weights.
    #[arg(long, global = true)]
    k_star: Option<usize>,
    /// Add a class for causes outside the measured pathogens.
    #[arg(long, global = true)]
    other_cause: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a case-control dataset from a scenario.
    Simulate(ScenarioArgs),
    /// Fit the model and write posterior draws and diagnostics.
    Fit(DataArgs),
    /// Posterior predictive model checks on a fitted posterior.
    Check(DataArgs),
    /// Etiology probabilities for cases sharing one measurement pattern.
    Predict {
        #[command(flatten)]
        data: DataArgs,
        /// Pattern as a 0/1 string in column order, e.g. 10110.
        #[arg(long)]
        pattern: String,
    },
    /// Asymptotic bias of the locally independent working model.
    Asymp {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Hold the marginal false positive rates at their true values.
        #[arg(long)]
        fix_psi: bool,
    },
    /// Repeated-sampling comparison of nested and locally independent fits.
    Replicate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        replicates: Option<usize>,
    },
}

#[derive(Args, Debug)]
struct ScenarioArgs {
    /// Built-in scenario: I, II or custom.
    #[arg(long)]
    scenario: Option<ScenarioName>,
    #[arg(long)]
    eta_o: Option<f64>,
    #[arg(long)]
    n_cases: Option<usize>,
    #[arg(long)]
    n_controls: Option<usize>,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Dataset CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Posterior directory written by `fit`.
    #[arg(long)]
    posterior: Option<PathBuf>,
}

impl ScenarioArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(s) = self.scenario {
            c.scenario.name = s;
        }
        if let Some(e) = self.eta_o {
            c.scenario.eta_o = e;
        }
        if let Some(n) = self.n_cases {
            c.scenario.n_cases = n;
        }
        if let Some(n) = self.n_controls {
            c.scenario.n_controls = n;
        }
    }
}

impl DataArgs {
    fn apply(&self, c: &mut RunConfig) {
        if let Some(p) = &self.data {
            c.data.path = Some(p.clone());
        }
        if let Some(p) = &self.posterior {
            c.check.posterior = Some(p.clone());
        }
    }
}

fn resolve(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut c = match &cli.common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let a = &cli.common;
    if a.seed.is_some() {
        c.seed = a.seed;
    }
    if a.out.is_some() {
        c.out = a.out.clone();
    }
    if a.jobs.is_some() {
        c.jobs = a.jobs;
    }
    if a.cut_feedback {
        c.sampler.cut_feedback = Some(true);
    }
    if let Some(k) = a.k_star {
        c.sampler.truncation_k = Some(k);
        c.replicate.k_star = k;
    }
    if a.other_cause {
        c.data.other_cause = true;
    }
    match &cli.command {
        Command::Simulate(s) => s.apply(&mut c),
        Command::Fit(d) | Command::Check(d) => d.apply(&mut c),
        Command::Predict { data, .. } => data.apply(&mut c),
        Command::Asymp { scenario, fix_psi } => {
            scenario.apply(&mut c);
            if *fix_psi {
                c.asymptotics.fix_psi = true;
            }
        }
        Command::Replicate { scenario, replicates } => {
            scenario.apply(&mut c);
            if let Some(r) = replicates {
                c.replicate.replicates = *r;
            }
        }
    }
    c.validate()?;
    Ok(c)
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = resolve(cli)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = config.jobs {
        if j == 0 {
            return Err(CliError::new("cli", "thread-pool", "--jobs must be at least 1"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("cli", "thread-pool")?;
    pool.install(|| match &cli.command {
        Command::Simulate(_) => commands::simulate(&config),
        Command::Fit(_) => commands::fit(&config),
        Command::Check(_) => commands::check(&config),
        Command::Predict { pattern, .. } => commands::predict(&config, pattern),
        Command::Asymp { .. } => commands::asymp(&config),
        Command::Replicate { .. } => commands::replicate(&config),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(1)
        }
    }
}
