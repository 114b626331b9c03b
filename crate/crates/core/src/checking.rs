//! Posterior predictive model checking and individual etiology.
//!
//! Every predictive quantity comes from one replicate dataset per retained
//! draw, simulated at the observed sample sizes with
//! [`generate_from_params`](crate::simulation::generate_from_params).

use std::collections::HashMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorSamples;
use crate::math::{mean, quantiles, sample_variance};
use crate::model::{format_pattern, BinaryMatrix, Dataset, Population};
use crate::rng::mix_seed;
use crate::simulation::generate_from_params;

/// `|slord|` above this is flagged.
pub const SLORD_THRESHOLD: f64 = 2.0;
pub const DEFAULT_EPSILON: f64 = 0.05;

/// Cell counts `n_ab` of a 2x2 table, `a` on the first dimension.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cells {
    pub n11: f64,
    pub n10: f64,
    pub n01: f64,
    pub n00: f64,
}

impl Cells {
    pub fn count(matrix: &BinaryMatrix, j: usize, l: usize) -> Self {
        let mut c = [0usize; 4];
        for r in matrix.rows() {
            c[(r[j] as usize) * 2 + r[l] as usize] += 1;
        }
        Cells {
            n11: c[3] as f64,
            n10: c[2] as f64,
            n01: c[1] as f64,
            n00: c[0] as f64,
        }
    }

    /// Log odds ratio and standard error, adding 0.5 to every cell when any
    /// cell is empty.
    pub fn log_or(&self) -> (f64, f64) {
        let mut c = [self.n11, self.n10, self.n01, self.n00];
        if c.contains(&0.0) {
            c.iter_mut().for_each(|x| *x += 0.5);
        }
        let lor = (c[0] * c[3] / (c[1] * c[2])).ln();
        let se = c.iter().map(|x| 1.0 / x).sum::<f64>().sqrt();
        (lor, se)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorEntry {
    pub j: usize,
    pub l: usize,
    /// `None` when either column is constant.
    pub log_or: Option<f64>,
    pub se: Option<f64>,
    pub z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorTable {
    pub n_dims: usize,
    /// Pairs `j < l` in lexicographic order.
    pub entries: Vec<LorEntry>,
}

impl LorTable {
    pub fn get(&self, j: usize, l: usize) -> Option<&LorEntry> {
        let (a, b) = if j < l { (j, l) } else { (l, j) };
        self.entries.iter().find(|e| e.j == a && e.l == b)
    }

    pub fn write_csv(&self, path: &Path, names: &[String], population: Population) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["population", "pathogen_j", "pathogen_l", "log_or", "se", "z"])?;
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for e in &self.entries {
            w.write_record([
                population.as_str().to_string(),
                names[e.j].clone(),
                names[e.l].clone(),
                fmt(e.log_or),
                fmt(e.se),
                fmt(e.z),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn column_constant(matrix: &BinaryMatrix, j: usize) -> bool {
    let mut rows = matrix.rows();
    match rows.next() {
        Some(first) => rows.all(|r| r[j] == first[j]),
        None => true,
    }
}

/// Pairwise observed log odds ratios with standard errors.
pub fn observed_lor(matrix: &BinaryMatrix) -> Result<LorTable> {
    let jd = matrix.ncols();
    if jd < 2 {
        return Err(Error::Argument("log odds ratios need at least 2 columns".into()));
    }
    let constant: Vec<bool> = (0..jd).map(|j| column_constant(matrix, j)).collect();
    let mut entries = Vec::with_capacity(jd * (jd - 1) / 2);
    for j in 0..jd {
        for l in j + 1..jd {
            if constant[j] || constant[l] {
                entries.push(LorEntry { j, l, log_or: None, se: None, z: None });
            } else {
                let (lor, se) = Cells::count(matrix, j, l).log_or();
                entries.push(LorEntry {
                    j,
                    l,
                    log_or: Some(lor),
                    se: Some(se),
                    z: Some(lor / se),
                });
            }
        }
    }
    Ok(LorTable { n_dims: jd, entries })
}

/// One simulated dataset per retained draw, in chain-major order.
pub fn predictive_replicates(posterior: &PosteriorSamples, dataset: &Dataset, seed: u64) -> Result<Vec<Dataset>> {
    if posterior.n_draws() == 0 {
        return Err(Error::Argument("posterior has no draws".into()));
    }
    let draws: Vec<_> = posterior.draws().collect();
    draws
        .par_iter()
        .enumerate()
        .map(|(g, d)| {
            generate_from_params(
                &d.params,
                dataset.n_cases(),
                dataset.n_controls(),
                dataset.pathogens().to_vec(),
                mix_seed(seed, g as u64),
            )
            .map(|s| s.dataset)
        })
        .collect()
}

fn pattern_counts(matrix: &BinaryMatrix) -> HashMap<Vec<u8>, usize> {
    let mut counts = HashMap::new();
    for r in matrix.rows() {
        *counts.entry(r.to_vec()).or_insert(0) += 1;
    }
    counts
}

/// The `top_n` most frequent observed patterns, ties broken by pattern string.
pub fn top_patterns(matrix: &BinaryMatrix, top_n: usize) -> Vec<(Vec<u8>, usize)> {
    let mut v: Vec<(Vec<u8>, usize)> = pattern_counts(matrix).into_iter().collect();
    v.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    v.truncate(top_n);
    v
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PatternPpd {
    pub population: Population,
    pub pattern: String,
    pub observed: f64,
    pub predictive_mean: f64,
    /// 2.5%, 25%, 50%, 75%, 97.5% predictive quantiles.
    pub quantiles: [f64; 5],
    pub inside_95: bool,
    #[serde(skip)]
    pub draws: Vec<f64>,
}

fn pattern_ppd_from(
    replicates: &[Dataset],
    dataset: &Dataset,
    top_n: usize,
) -> Vec<PatternPpd> {
    let mut out = Vec::new();
    for pop in Population::BOTH {
        let obs = dataset.matrix(pop);
        let n = obs.nrows() as f64;
        for (pattern, count) in top_patterns(obs, top_n) {
            let draws: Vec<f64> = replicates
                .iter()
                .map(|r| r.matrix(pop).rows().filter(|row| *row == pattern.as_slice()).count() as f64 / n)
                .collect();
            let q = quantiles(&draws, &crate::diagnostics::SUMMARY_QUANTILES);
            let observed = count as f64 / n;
            out.push(PatternPpd {
                population: pop,
                pattern: format_pattern(&pattern),
                observed,
                predictive_mean: mean(&draws),
                quantiles: [q[0], q[1], q[2], q[3], q[4]],
                inside_95: q[0] <= observed && observed <= q[4],
                draws,
            });
        }
    }
    out
}

/// Predictive distribution of the frequencies of the `top_n` most frequent
/// observed patterns in each population.
pub fn ppd_pattern_freq(
    posterior: &PosteriorSamples,
    dataset: &Dataset,
    top_n: usize,
    seed: u64,
) -> Result<Vec<PatternPpd>> {
    let reps = predictive_replicates(posterior, dataset, seed)?;
    Ok(pattern_ppd_from(&reps, dataset, top_n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlordCell {
    pub population: Population,
    pub j: usize,
    pub l: usize,
    pub observed: Option<f64>,
    pub predictive_mean: Option<f64>,
    pub predictive_sd: Option<f64>,
    /// `None` when the observed LOR is undefined or the predictive sd is 0.
    pub slord: Option<f64>,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlordMatrix {
    pub n_dims: usize,
    pub cells: Vec<SlordCell>,
}

impl SlordMatrix {
    pub fn flagged_count(&self, population: Population) -> usize {
        self.cells
            .iter()
            .filter(|c| c.population == population && c.flagged)
            .count()
    }

    pub fn get(&self, population: Population, j: usize, l: usize) -> Option<&SlordCell> {
        let (a, b) = if j < l { (j, l) } else { (l, j) };
        self.cells
            .iter()
            .find(|c| c.population == population && c.j == a && c.l == b)
    }

    pub fn write_csv(&self, path: &Path, names: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "population", "pathogen_j", "pathogen_l", "observed_lor", "predictive_mean",
            "predictive_sd", "slord", "flagged",
        ])?;
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for c in &self.cells {
            w.write_record([
                c.population.as_str().to_string(),
                names[c.j].clone(),
                names[c.l].clone(),
                fmt(c.observed),
                fmt(c.predictive_mean),
                fmt(c.predictive_sd),
                fmt(c.slord),
                c.flagged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Standardized LOR difference from precomputed replicates.
pub fn slord_from_replicates(replicates: &[Dataset], dataset: &Dataset) -> Result<SlordMatrix> {
    let jd = dataset.n_dims();
    let mut cells = Vec::new();
    for pop in Population::BOTH {
        let observed = observed_lor(dataset.matrix(pop))?;
        let predicted: Vec<LorTable> = replicates
            .iter()
            .map(|r| observed_lor(r.matrix(pop)))
            .collect::<Result<_>>()?;
        for (e_idx, e) in observed.entries.iter().enumerate() {
            let draws: Vec<f64> = predicted.iter().filter_map(|t| t.entries[e_idx].log_or).collect();
            let (pm, psd) = if draws.len() >= 2 {
                (Some(mean(&draws)), Some(sample_variance(&draws).sqrt()))
            } else {
                (None, None)
            };
            let slord = match (e.log_or, pm, psd) {
                (Some(o), Some(m), Some(s)) if s > 0.0 => Some((o - m) / s),
                _ => None,
            };
            cells.push(SlordCell {
                population: pop,
                j: e.j,
                l: e.l,
                observed: e.log_or,
                predictive_mean: pm,
                predictive_sd: psd,
                slord,
                flagged: slord.is_some_and(|s| s.abs() > SLORD_THRESHOLD),
            });
        }
    }
    Ok(SlordMatrix { n_dims: jd, cells })
}

pub fn slord(posterior: &PosteriorSamples, dataset: &Dataset, seed: u64) -> Result<SlordMatrix> {
    slord_from_replicates(&predictive_replicates(posterior, dataset, seed)?, dataset)
}

/// Both checks from one set of replicates.
pub fn model_check(
    posterior: &PosteriorSamples,
    dataset: &Dataset,
    top_n: usize,
    seed: u64,
) -> Result<(Vec<PatternPpd>, SlordMatrix)> {
    let reps = predictive_replicates(posterior, dataset, seed)?;
    Ok((pattern_ppd_from(&reps, dataset, top_n), slord_from_replicates(&reps, dataset)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalNull {
    pub population: Population,
    pub epsilon: f64,
    /// Posterior probability that the largest subclass weight exceeds `1 - epsilon`.
    pub probability: f64,
    pub max_weight_ci: (f64, f64),
}

/// Interval-null test of local independence for cases (`eta`) and controls (`nu`).
pub fn ld_interval_null(posterior: &PosteriorSamples, epsilon: f64) -> Result<[IntervalNull; 2]> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Argument(format!("epsilon = {epsilon} is outside (0, 1)")));
    }
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let one = |pop: Population| {
        let w = posterior.pooled(|p| match pop {
            Population::Case => max(&p.eta),
            Population::Control => max(&p.nu),
        });
        let q = quantiles(&w, &[0.025, 0.975]);
        IntervalNull {
            population: pop,
            epsilon,
            probability: w.iter().filter(|&&x| x > 1.0 - epsilon).count() as f64 / w.len() as f64,
            max_weight_ci: (q[0], q[1]),
        }
    };
    Ok([one(Population::Case), one(Population::Control)])
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EtiologyPrediction {
    pub pattern: String,
    pub n_cases: usize,
    pub classes: Vec<String>,
    pub probabilities: Vec<f64>,
}

/// Pooled distribution of the sampled class indicators of every case whose
/// pattern equals `pattern`.
pub fn individual_etiology(
    posterior: &PosteriorSamples,
    dataset: &Dataset,
    pattern: &[u8],
) -> Result<EtiologyPrediction> {
    let members: Vec<usize> = dataset
        .cases()
        .rows()
        .enumerate()
        .filter(|(_, r)| *r == pattern)
        .map(|(i, _)| i)
        .collect();
    if members.is_empty() {
        return Err(Error::PatternNotFound(format_pattern(pattern)));
    }
    let mut counts = vec![0usize; posterior.n_classes()];
    let mut total = 0usize;
    for d in posterior.draws() {
        if d.case_class.len() != dataset.n_cases() {
            return Err(Error::Dimension {
                what: "case indicators per draw",
                expected: dataset.n_cases(),
                actual: d.case_class.len(),
            });
        }
        for &i in &members {
            counts[d.case_class[i] as usize] += 1;
            total += 1;
        }
    }
    Ok(EtiologyPrediction {
        pattern: format_pattern(pattern),
        n_cases: members.len(),
        classes: posterior.class_names().to_vec(),
        probabilities: counts.into_iter().map(|c| c as f64 / total as f64).collect(),
    })
}

pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}
