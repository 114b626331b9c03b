//! Synthetic data from the nested model, the two built-in scenarios, and a
//! repeated-sampling harness for bias, MSE and interval coverage.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::{self, SamplerConfig};
use crate::math::{mean, sample_variance};
use crate::model::{BinaryMatrix, Dataset, HyperPriors, LatentState, ModelParams, RateMatrix};
use crate::prior::ElicitedRange;
use crate::rng::{mix_seed, step, stream};

pub const SCENARIO_PI: [f64; 5] = [0.5, 0.2, 0.15, 0.1, 0.05];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioName {
    I,
    II,
    #[serde(rename = "custom")]
    Custom,
}

impl ScenarioName {
    pub fn as_str(self) -> &'static str {
        match self {
            ScenarioName::I => "I",
            ScenarioName::II => "II",
            ScenarioName::Custom => "custom",
        }
    }
}

impl std::str::FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" | "i" => Ok(ScenarioName::I),
            "II" | "2" | "ii" => Ok(ScenarioName::II),
            "custom" => Ok(ScenarioName::Custom),
            other => Err(Error::Argument(format!("unknown scenario '{other}'"))),
        }
    }
}

/// A true data-generating mechanism. Rate profiles are listed per subclass
/// (`K_true` rows of length `J`); case subclass weights are `(eta_o, 1 - eta_o)`
/// when `K_true = 2`, or `eta` when given explicitly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub pi: Vec<f64>,
    pub theta: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    pub nu: Vec<f64>,
    pub eta: Vec<f64>,
    #[serde(default)]
    pub pathogens: Option<Vec<String>>,
}

impl ScenarioSpec {
    /// Weak local dependence: small between-subclass differences.
    pub fn scenario_i(eta_o: f64) -> Self {
        ScenarioSpec {
            name: ScenarioName::I,
            pi: SCENARIO_PI.to_vec(),
            theta: vec![vec![0.95, 0.9, 0.9, 0.9, 0.9], vec![0.95, 0.9, 0.9, 0.9, 0.9]],
            psi: vec![vec![0.25, 0.25, 0.2, 0.15, 0.15], vec![0.2, 0.2, 0.25, 0.1, 0.1]],
            nu: vec![0.5, 0.5],
            eta: vec![eta_o, 1.0 - eta_o],
            pathogens: None,
        }
    }

    /// Strong local dependence: large between-subclass differences.
    pub fn scenario_ii(eta_o: f64) -> Self {
        ScenarioSpec {
            name: ScenarioName::II,
            pi: SCENARIO_PI.to_vec(),
            theta: vec![vec![0.95, 0.95, 0.55, 0.95, 0.95], vec![0.95, 0.55, 0.95, 0.55, 0.55]],
            psi: vec![vec![0.4, 0.4, 0.05, 0.2, 0.2], vec![0.05, 0.05, 0.4, 0.05, 0.05]],
            nu: vec![0.5, 0.5],
            eta: vec![eta_o, 1.0 - eta_o],
            pathogens: None,
        }
    }

    pub fn builtin(name: ScenarioName, eta_o: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta_o) {
            return Err(Error::Argument(format!("eta_o = {eta_o} is outside [0, 1]")));
        }
        match name {
            ScenarioName::I => Ok(Self::scenario_i(eta_o)),
            ScenarioName::II => Ok(Self::scenario_ii(eta_o)),
            ScenarioName::Custom => Err(Error::Argument(
                "a custom scenario needs explicit parameters".into(),
            )),
        }
    }

    /// Same scenario with case weights `(eta_o, 1 - eta_o)`.
    pub fn with_eta_o(&self, eta_o: f64) -> Result<Self> {
        if self.eta.len() != 2 {
            return Err(Error::Argument("eta_o needs exactly two subclasses".into()));
        }
        if !(0.0..=1.0).contains(&eta_o) {
            return Err(Error::Argument(format!("eta_o = {eta_o} is outside [0, 1]")));
        }
        Ok(ScenarioSpec {
            eta: vec![eta_o, 1.0 - eta_o],
            ..self.clone()
        })
    }

    pub fn eta_o(&self) -> Option<f64> {
        (self.eta.len() == 2).then(|| self.eta[0])
    }

    pub fn n_dims(&self) -> usize {
        self.pi.len()
    }

    pub fn include_other_cause(&self) -> bool {
        self.theta.first().is_some_and(|r| self.pi.len() == r.len() + 1)
    }

    pub fn pathogen_names(&self) -> Vec<String> {
        let j = self.theta.first().map_or(0, Vec::len);
        self.pathogens.clone().unwrap_or_else(|| Dataset::default_names(j))
    }

    /// The truth as model parameters. Concentrations are set to 1 and play no
    /// role in data generation.
    pub fn to_params(&self) -> Result<ModelParams> {
        if self.theta.len() != self.psi.len()
            || self.theta.len() != self.nu.len()
            || self.theta.len() != self.eta.len()
        {
            return Err(Error::Argument(
                "scenario theta, psi, nu and eta disagree on the number of subclasses".into(),
            ));
        }
        ModelParams::new(
            self.pi.clone(),
            RateMatrix::from_subclass_profiles(&self.theta)?,
            RateMatrix::from_subclass_profiles(&self.psi)?,
            self.eta.clone(),
            self.nu.clone(),
            1.0,
            1.0,
        )
    }
}

fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random::<f64>() * weights.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    last
}

fn fill_row<R: Rng + ?Sized>(row: &mut [u8], params: &ModelParams, class: Option<usize>, z: usize, rng: &mut R) {
    for (j, m) in row.iter_mut().enumerate() {
        let rate = if class == Some(j) {
            params.theta.get(j, z)
        } else {
            params.psi.get(j, z)
        };
        *m = u8::from(rng.random::<f64>() < rate);
    }
}

/// A dataset together with the latent indicators that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulated {
    pub dataset: Dataset,
    pub latent: LatentState,
}

/// Simulate `n_cases` and `n_controls` subjects from `params`. Subject `i`
/// draws from its own stream, so the first rows do not depend on the sample
/// size.
pub fn generate_from_params(
    params: &ModelParams,
    n_cases: usize,
    n_controls: usize,
    pathogens: Vec<String>,
    seed: u64,
) -> Result<Simulated> {
    params.validate()?;
    let jd = params.n_dims();
    let other = params.has_other_cause();
    let mut cases = BinaryMatrix::new(n_cases, jd, vec![0; n_cases * jd])?;
    let mut controls = BinaryMatrix::new(n_controls, jd, vec![0; n_controls * jd])?;
    let mut latent = LatentState {
        case_class: Vec::with_capacity(n_cases),
        case_subclass: Vec::with_capacity(n_cases),
        control_subclass: Vec::with_capacity(n_controls),
    };
    for i in 0..n_cases {
        let mut rng = stream(seed, 0, step::SIMULATE_CASE, 0, i as u64);
        let c = draw_index(&params.pi, &mut rng);
        let z = draw_index(&params.eta, &mut rng);
        fill_row(cases.row_mut(i), params, (c < jd).then_some(c), z, &mut rng);
        latent.case_class.push(c);
        latent.case_subclass.push(z);
    }
    for i in 0..n_controls {
        let mut rng = stream(seed, 0, step::SIMULATE_CONTROL, 0, i as u64);
        let z = draw_index(&params.nu, &mut rng);
        fill_row(controls.row_mut(i), params, None, z, &mut rng);
        latent.control_subclass.push(z);
    }
    Ok(Simulated {
        dataset: Dataset::new(cases, controls, pathogens, other)?,
        latent,
    })
}

/// Simulate a dataset from a scenario truth.
pub fn generate(scenario: &ScenarioSpec, n_cases: usize, n_controls: usize, seed: u64) -> Result<Dataset> {
    let params = scenario.to_params()?;
    Ok(generate_from_params(&params, n_cases, n_controls, scenario.pathogen_names(), seed)?.dataset)
}

/// Fresh measurements for the given latent indicators, keeping the dataset
/// shape. Used by joint-distribution tests of the sampler.
pub fn redraw_measurements<R: Rng + ?Sized>(
    params: &ModelParams,
    latent: &LatentState,
    template: &Dataset,
    rng: &mut R,
) -> Result<Dataset> {
    let jd = params.n_dims();
    let mut cases = template.cases().clone();
    let mut controls = template.controls().clone();
    for i in 0..cases.nrows() {
        let c = latent.case_class[i];
        fill_row(cases.row_mut(i), params, (c < jd).then_some(c), latent.case_subclass[i], rng);
    }
    for i in 0..controls.nrows() {
        fill_row(controls.row_mut(i), params, None, latent.control_subclass[i], rng);
    }
    Dataset::new(
        cases,
        controls,
        template.pathogens().to_vec(),
        template.include_other_cause(),
    )
}

// ---------------------------------------------------------------------------
// Replication harness

/// One model fitted to every replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub name: String,
    pub sampler: SamplerConfig,
    pub tpr_range: ElicitedRange,
}

impl FitSpec {
    /// Nested model with truncation `k_star` and shortened chains.
    pub fn nplcm(k_star: usize) -> Result<Self> {
        Ok(FitSpec {
            name: "npLCM".into(),
            sampler: SamplerConfig::desk(k_star, 0),
            tpr_range: ElicitedRange::new(0.5, 0.99)?,
        })
    }

    /// Locally independent model (`K = 1`).
    pub fn plcm() -> Result<Self> {
        Ok(FitSpec {
            name: "pLCM".into(),
            sampler: SamplerConfig::desk(1, 0),
            tpr_range: ElicitedRange::new(0.5, 0.99)?,
        })
    }

    pub fn hyper_priors(&self, dataset: &Dataset) -> Result<HyperPriors> {
        let beta = self.tpr_range.to_beta()?;
        Ok(HyperPriors::default_for(
            dataset.n_dims(),
            self.sampler.truncation_k,
            dataset.include_other_cause(),
        )
        .with_tpr_prior(beta))
    }
}

/// Posterior summary of one fit to one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub replicate: usize,
    pub fit: String,
    pub pi_mean: Vec<f64>,
    pub pi_lower: Vec<f64>,
    pub pi_upper: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FailedFit {
    pub replicate: usize,
    pub fit: String,
    pub error: String,
}

/// Per fit and class repeated-sampling summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRow {
    pub fit: String,
    pub class: String,
    pub truth: f64,
    pub bias: f64,
    pub bias_se: f64,
    pub mse: f64,
    pub coverage: f64,
    pub coverage_se: f64,
    pub n_ok: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MseRatio {
    pub numerator: String,
    pub denominator: String,
    pub class: String,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub scenario: String,
    pub eta_o: Option<f64>,
    pub n_cases: usize,
    pub n_controls: usize,
    pub n_replicates: usize,
    pub seed: u64,
    pub rows: Vec<ReplicationRow>,
    /// First fit's MSE over each later fit's MSE.
    pub mse_ratios: Vec<MseRatio>,
    pub failures: Vec<FailedFit>,
    pub outcomes: Vec<FitOutcome>,
}

impl ReplicationReport {
    pub fn row(&self, fit: &str, class: &str) -> Option<&ReplicationRow> {
        self.rows.iter().find(|r| r.fit == fit && r.class == class)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Rows of `class x eta_o x model`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "scenario", "eta_o", "model", "class", "truth", "bias", "bias_se", "mse", "mse_ratio",
            "coverage", "coverage_se", "n_ok",
        ])?;
        let eta = self.eta_o.map_or(String::new(), |e| e.to_string());
        for r in &self.rows {
            let ratio = self
                .mse_ratios
                .iter()
                .find(|m| m.denominator == r.fit && m.class == r.class)
                .map_or(String::new(), |m| m.ratio.to_string());
            w.write_record([
                self.scenario.clone(),
                eta.clone(),
                r.fit.clone(),
                r.class.clone(),
                r.truth.to_string(),
                r.bias.to_string(),
                r.bias_se.to_string(),
                r.mse.to_string(),
                ratio,
                r.coverage.to_string(),
                r.coverage_se.to_string(),
                r.n_ok.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fit_once(dataset: &Dataset, fit: &FitSpec, seed: u64, replicate: usize) -> Result<FitOutcome> {
    let hyper = fit.hyper_priors(dataset)?;
    let config = SamplerConfig {
        seed,
        include_other_cause: dataset.include_other_cause(),
        ..fit.sampler.clone()
    };
    let post = gibbs::run(dataset, &hyper, &config)?;
    let ci = post.pi_interval(0.95);
    Ok(FitOutcome {
        replicate,
        fit: fit.name.clone(),
        pi_mean: post.pi_mean(),
        pi_lower: ci.iter().map(|c| c.0).collect(),
        pi_upper: ci.iter().map(|c| c.1).collect(),
    })
}

/// Data seed of replicate `t`.
pub fn replicate_seed(seed: u64, t: usize) -> u64 {
    mix_seed(mix_seed(seed, step::REPLICATE as u64), t as u64)
}

/// Generate `n_replicates` datasets and fit every model to each. Replicate
/// `t` uses data seed [`replicate_seed`]; fits reuse that seed for their
/// chains. Failed fits are counted in `failures` and excluded from summaries.
pub fn replicate(
    scenario: &ScenarioSpec,
    n_cases: usize,
    n_controls: usize,
    n_replicates: usize,
    fits: &[FitSpec],
    seed: u64,
) -> Result<ReplicationReport> {
    if n_replicates < 2 {
        return Err(Error::Argument("replication needs at least 2 replicates".into()));
    }
    if fits.is_empty() {
        return Err(Error::Argument("replication needs at least one fit".into()));
    }
    let truth = scenario.to_params()?;
    let results: Vec<Vec<std::result::Result<FitOutcome, FailedFit>>> = (0..n_replicates)
        .into_par_iter()
        .map(|t| {
            let data_seed = replicate_seed(seed, t);
            let data = match generate(scenario, n_cases, n_controls, data_seed) {
                Ok(d) => d,
                Err(e) => {
                    return fits
                        .iter()
                        .map(|f| Err(FailedFit { replicate: t, fit: f.name.clone(), error: e.to_string() }))
                        .collect()
                }
            };
            fits.iter()
                .map(|f| {
                    fit_once(&data, f, data_seed, t).map_err(|e| {
                        log::warn!("replicate {t}, fit {}: {e}", f.name);
                        FailedFit {
                            replicate: t,
                            fit: f.name.clone(),
                            error: e.to_string(),
                        }
                    })
                })
                .collect()
        })
        .collect();

    let mut outcomes = Vec::new();
    let mut failures = Vec::new();
    for r in results.into_iter().flatten() {
        match r {
            Ok(o) => outcomes.push(o),
            Err(f) => failures.push(f),
        }
    }
    let class_names = {
        let mut n = scenario.pathogen_names();
        if scenario.include_other_cause() {
            n.push("other".into());
        }
        n
    };
    let mut rows = Vec::new();
    for f in fits {
        let mine: Vec<&FitOutcome> = outcomes.iter().filter(|o| o.fit == f.name).collect();
        for (c, name) in class_names.iter().enumerate() {
            let err: Vec<f64> = mine.iter().map(|o| o.pi_mean[c] - truth.pi[c]).collect();
            let covered: Vec<f64> = mine
                .iter()
                .map(|o| f64::from(u8::from(o.pi_lower[c] <= truth.pi[c] && truth.pi[c] <= o.pi_upper[c])))
                .collect();
            let n = err.len() as f64;
            let (bias, bias_se, mse, coverage) = if err.is_empty() {
                (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
            } else {
                (
                    mean(&err),
                    (sample_variance(&err) / n).sqrt(),
                    err.iter().map(|e| e * e).sum::<f64>() / n,
                    mean(&covered),
                )
            };
            rows.push(ReplicationRow {
                fit: f.name.clone(),
                class: name.clone(),
                truth: truth.pi[c],
                bias,
                bias_se,
                mse,
                coverage,
                coverage_se: (coverage * (1.0 - coverage) / n).sqrt(),
                n_ok: err.len(),
            });
        }
    }
    let mut mse_ratios = Vec::new();
    for other in &fits[1..] {
        for name in &class_names {
            let find = |fit: &str| rows.iter().find(|r: &&ReplicationRow| r.fit == fit && &r.class == name);
            if let (Some(a), Some(b)) = (find(&fits[0].name), find(&other.name)) {
                mse_ratios.push(MseRatio {
                    numerator: a.fit.clone(),
                    denominator: b.fit.clone(),
                    class: name.clone(),
                    ratio: a.mse / b.mse,
                });
            }
        }
    }
    Ok(ReplicationReport {
        scenario: scenario.name.as_str().to_string(),
        eta_o: scenario.eta_o(),
        n_cases,
        n_controls,
        n_replicates,
        seed,
        rows,
        mse_ratios,
        failures,
        outcomes,
    })
}
