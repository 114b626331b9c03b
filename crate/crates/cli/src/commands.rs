//! One function per subcommand. Each delegates to a single library module
//! and records its outputs in the manifest.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nplcm::asymptotics::{prab_curve, write_prab_csv};
use nplcm::checking::{individual_etiology, ld_interval_null, model_check, observed_lor, write_json};
use nplcm::diagnostics::{default_functionals, report, write_report, write_traces};
use nplcm::io::{read_dataset, read_posterior, write_dataset, write_posterior};
use nplcm::model::parse_pattern;
use nplcm::simulation::{generate_from_params, FitSpec};
use nplcm::{Dataset, Population};
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::{CliError, Context};
use crate::manifest::OutputDir;

pub const POSTERIOR_DIR: &str = "posterior";

#[derive(Serialize)]
struct Truth<'a> {
    scenario: &'a nplcm::ScenarioSpec,
    latent: &'a nplcm::LatentState,
}

pub fn simulate(config: &RunConfig) -> Result<(), CliError> {
    let spec = config.scenario_spec()?;
    let params = spec.to_params().context("simulation", "scenario")?;
    let sc = &config.scenario;
    let sim = generate_from_params(&params, sc.n_cases, sc.n_controls, spec.pathogen_names(), config.seed())
        .context("simulation", "generate")?;
    let mut out = OutputDir::create(config)?;
    write_dataset(&sim.dataset, &out.file("data.csv")).context("io", "write_dataset")?;
    let truth = Truth {
        scenario: &spec,
        latent: &sim.latent,
    };
    write_json(&truth, &out.file("truth.json")).context("io", "write_truth")?;
    out.finish("simulate", config)?;
    say!(
        "simulated {} cases and {} controls into {}",
        sc.n_cases,
        sc.n_controls,
        config.out_dir().display()
    );
    Ok(())
}

fn load_dataset(config: &RunConfig) -> Result<Dataset, CliError> {
    let path = config
        .data
        .path
        .as_ref()
        .ok_or_else(|| CliError::new("config", "validate", "no dataset given (--data or [data] path)"))?;
    read_dataset(path, config.data.other_cause).context("io", "read_dataset")
}

fn posterior_dir(config: &RunConfig) -> PathBuf {
    config
        .check
        .posterior
        .clone()
        .unwrap_or_else(|| config.out_dir().join(POSTERIOR_DIR))
}

pub fn fit(config: &RunConfig) -> Result<(), CliError> {
    let data = load_dataset(config)?;
    let sampler = config.sampler_config();
    let hyper = config.hyper_priors(&data, sampler.truncation_k)?;
    let post = nplcm::run(&data, &hyper, &sampler).context("gibbs", "run")?;
    let mut out = OutputDir::create(config)?;
    let mut provenance = BTreeMap::new();
    provenance.insert("config_hash".into(), serde_json::json!(config.hash()));
    provenance.insert("seed".into(), serde_json::json!(config.seed()));
    provenance.insert("sampler".into(), serde_json::to_value(&sampler).context("io", "write_posterior")?);
    write_posterior(&post, &out.file(POSTERIOR_DIR), provenance).context("io", "write_posterior")?;
    let diag = report(&post).context("diagnostics", "report")?;
    write_report(&diag, &out.file("diagnostics.json")).context("diagnostics", "write_report")?;
    let functionals = default_functionals(post.class_names());
    write_traces(&post, &functionals, &out.file("traces.csv")).context("diagnostics", "write_traces")?;
    out.finish("fit", config)?;
    let means = post.pi_mean();
    for (name, m) in post.class_names().iter().zip(&means) {
        let r = diag.get(&format!("pi[{name}]")).and_then(|s| s.psrf);
        say!("pi[{name}] = {m:.4}  psrf = {}", r.map_or("-".into(), |r| format!("{r:.3}")));
    }
    Ok(())
}

pub fn check(config: &RunConfig) -> Result<(), CliError> {
    let data = load_dataset(config)?;
    let post = read_posterior(&posterior_dir(config)).context("io", "read_posterior")?;
    let mut out = OutputDir::create(config)?;
    for (pop, name) in [(Population::Case, "lor_cases.csv"), (Population::Control, "lor_controls.csv")] {
        let table = observed_lor(data.matrix(pop)).context("checking", "observed_lor")?;
        table
            .write_csv(&out.file(name), data.pathogens(), pop)
            .context("checking", "observed_lor")?;
    }
    let (ppd, slord) = model_check(&post, &data, config.check.top_n, config.seed()).context("checking", "model_check")?;
    write_json(&ppd, &out.file("ppd.json")).context("checking", "ppd_pattern_freq")?;
    slord.write_csv(&out.file("slord.csv"), data.pathogens()).context("checking", "slord")?;
    let null = ld_interval_null(&post, config.check.epsilon).context("checking", "ld_interval_null")?;
    write_json(&null, &out.file("interval_null.json")).context("checking", "ld_interval_null")?;
    out.finish("check", config)?;
    say!(
        "flagged SLORD cells: {} case, {} control; patterns inside 95% PPD band: {}/{}",
        slord.flagged_count(Population::Case),
        slord.flagged_count(Population::Control),
        ppd.iter().filter(|p| p.inside_95).count(),
        ppd.len()
    );
    Ok(())
}

pub fn predict(config: &RunConfig, pattern: &str) -> Result<(), CliError> {
    let data = load_dataset(config)?;
    let post = read_posterior(&posterior_dir(config)).context("io", "read_posterior")?;
    let m = parse_pattern(pattern).context("checking", "individual_etiology")?;
    let pred = individual_etiology(&post, &data, &m).context("checking", "individual_etiology")?;
    let mut out = OutputDir::create(config)?;
    write_json(&pred, &out.file(&format!("etiology_{pattern}.json"))).context("checking", "individual_etiology")?;
    out.finish("predict", config)?;
    say!("{}", serde_json::to_string_pretty(&pred).context("checking", "individual_etiology")?);
    Ok(())
}

pub fn asymp(config: &RunConfig) -> Result<(), CliError> {
    let spec = config.scenario_spec()?;
    let a = &config.asymptotics;
    let points = prab_curve(&spec, &a.eta_grid, a.fix_psi).context("asymptotics", "prab_curve")?;
    let mut out = OutputDir::create(config)?;
    write_prab_csv(&points, &out.file("prab.csv")).context("asymptotics", "write_prab_csv")?;
    out.finish("asymp", config)?;
    for p in &points {
        say!(
            "eta_o = {:.2}  {}  PRAB = {:8.2}%  sqrt(VM/VR) = {:.4}",
            p.eta_o, p.class, p.prab, p.variance_ratio
        );
    }
    Ok(())
}

pub fn replicate(config: &RunConfig) -> Result<(), CliError> {
    let spec = config.scenario_spec()?;
    let s = &config.sampler;
    let fit_spec = |mut f: FitSpec| {
        f.tpr_range = config.priors.tpr;
        let d = f.sampler.clone();
        f.sampler.n_burn = s.n_burn.unwrap_or(d.n_burn);
        f.sampler.n_keep = s.n_keep.unwrap_or(d.n_keep);
        f.sampler.thin = s.thin.unwrap_or(d.thin);
        f.sampler.n_chains = s.n_chains.unwrap_or(d.n_chains);
        f.sampler.cut_feedback = s.cut_feedback.unwrap_or(d.cut_feedback);
        f
    };
    let fits = [
        fit_spec(FitSpec::plcm().context("simulation", "replicate")?),
        fit_spec(FitSpec::nplcm(config.replicate.k_star).context("simulation", "replicate")?),
    ];
    let sc = &config.scenario;
    let rep = nplcm::simulation::replicate(
        &spec,
        sc.n_cases,
        sc.n_controls,
        config.replicate.replicates,
        &fits,
        config.seed(),
    )
    .context("simulation", "replicate")?;
    let mut out = OutputDir::create(config)?;
    rep.write_csv(&out.file("replication.csv")).context("simulation", "write_csv")?;
    let json = rep.to_json().context("simulation", "to_json")?;
    std::fs::write(out.file("replication.json"), json).context("simulation", "to_json")?;
    out.finish("replicate", config)?;
    for r in &rep.rows {
        say!(
            "{:6} {:6} bias = {:+.3} ({:.3})  coverage = {:.2}  n = {}",
            r.fit, r.class, r.bias, r.bias_se, r.coverage, r.n_ok
        );
    }
    if !rep.failures.is_empty() {
        log::warn!("{} fits failed and were excluded", rep.failures.len());
    }
    Ok(())
}
