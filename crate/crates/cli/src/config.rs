//! Run configuration read from a TOML file and overridden by flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nplcm::simulation::{ScenarioName, ScenarioSpec};
use nplcm::{BetaPrior, Dataset, ElicitedRange, HyperPriors, SamplerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Context};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub priors: PriorConfig,
    #[serde(default)]
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub check: CheckConfig,
    #[serde(default)]
    pub asymptotics: AsymptoticsConfig,
    #[serde(default)]
    pub replicate: ReplicateConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub other_cause: bool,
}

/// Every field optional; unset fields keep the library defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    pub truncation_k: Option<usize>,
    pub n_burn: Option<usize>,
    pub n_keep: Option<usize>,
    pub thin: Option<usize>,
    pub n_chains: Option<usize>,
    pub cut_feedback: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    /// TPR range applied to every pathogen without its own entry.
    #[serde(default = "default_tpr")]
    pub tpr: ElicitedRange,
    #[serde(default)]
    pub pathogens: BTreeMap<String, ElicitedRange>,
}

fn default_tpr() -> ElicitedRange {
    ElicitedRange::new(0.5, 0.99).expect("valid default range")
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            tpr: default_tpr(),
            pathogens: BTreeMap::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    pub eta_o: f64,
    pub n_cases: usize,
    pub n_controls: usize,
    /// Full parameter set for `name = "custom"`.
    pub custom: Option<ScenarioSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: ScenarioName::I,
            eta_o: 0.5,
            n_cases: 500,
            n_controls: 500,
            custom: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    /// Posterior directory; defaults to `<out>/posterior`.
    pub posterior: Option<PathBuf>,
    pub top_n: usize,
    pub epsilon: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            posterior: None,
            top_n: 10,
            epsilon: nplcm::checking::DEFAULT_EPSILON,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticsConfig {
    pub eta_grid: Vec<f64>,
    pub fix_psi: bool,
}

impl Default for AsymptoticsConfig {
    fn default() -> Self {
        AsymptoticsConfig {
            eta_grid: nplcm::asymptotics::DEFAULT_ETA_GRID.to_vec(),
            fix_psi: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicateConfig {
    pub replicates: usize,
    pub k_star: usize,
}

impl Default for ReplicateConfig {
    fn default() -> Self {
        ReplicateConfig {
            replicates: 50,
            k_star: 5,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).context("config", "read")?;
        toml::from_str(&text).map_err(|e| CliError::new("config", "parse", e))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("nplcm-out"))
    }

    /// Referenced input paths must exist.
    pub fn validate(&self) -> Result<(), CliError> {
        if let Some(p) = &self.data.path {
            if !p.exists() {
                return Err(CliError::new("config", "validate", format!("dataset {} does not exist", p.display())));
            }
        }
        if let Some(p) = &self.check.posterior {
            if !p.is_dir() {
                return Err(CliError::new(
                    "config",
                    "validate",
                    format!("posterior directory {} does not exist", p.display()),
                ));
            }
        }
        for range in std::iter::once(&self.priors.tpr).chain(self.priors.pathogens.values()) {
            range.validate().context("config", "validate")?;
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the resolved configuration, flags included.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let d = SamplerConfig::default();
        let s = &self.sampler;
        SamplerConfig {
            truncation_k: s.truncation_k.unwrap_or(d.truncation_k),
            n_burn: s.n_burn.unwrap_or(d.n_burn),
            n_keep: s.n_keep.unwrap_or(d.n_keep),
            thin: s.thin.unwrap_or(d.thin),
            n_chains: s.n_chains.unwrap_or(d.n_chains),
            seed: self.seed(),
            cut_feedback: s.cut_feedback.unwrap_or(d.cut_feedback),
            include_other_cause: self.data.other_cause,
        }
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec, CliError> {
        match (&self.scenario.name, &self.scenario.custom) {
            (ScenarioName::Custom, Some(spec)) => Ok(spec.clone()),
            (name, _) => ScenarioSpec::builtin(*name, self.scenario.eta_o).context("simulation", "scenario"),
        }
    }

    /// Hyperpriors for `dataset`: uniform everywhere except the elicited TPR
    /// priors, looked up per pathogen by column name.
    pub fn hyper_priors(&self, dataset: &Dataset, k: usize) -> Result<HyperPriors, CliError> {
        let names = dataset.pathogens();
        for name in self.priors.pathogens.keys() {
            if !names.contains(name) {
                return Err(CliError::new(
                    "prior-elicitation",
                    "lookup",
                    format!("prior given for unknown pathogen '{name}'"),
                ));
            }
        }
        let mut hyper = HyperPriors::default_for(dataset.n_dims(), k, dataset.include_other_cause());
        for (j, name) in names.iter().enumerate() {
            let range = self.priors.pathogens.get(name).unwrap_or(&self.priors.tpr);
            let beta: BetaPrior = range.to_beta().context("prior-elicitation", "beta_from_quantiles")?;
            hyper.tpr.set_dim(j, beta);
        }
        Ok(hyper)
    }
}
