//! Blocked Gibbs sampler for the truncated stick-breaking model.
//!
//! One sweep runs eight conditional updates in a fixed order: case classes,
//! subclasses, case weights, control weights, concentrations, TPRs, FPRs and
//! etiologic fractions. Each conditional is exposed twice: as a pure function
//! returning the full-conditional parameters (handy for exact tests), and as a
//! `step_*` function that draws from it.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::{log_bernoulli, sample_log_categorical};
use crate::model::{
    BetaGrid, BetaPrior, Dataset, GammaPrior, HyperPriors, LatentState, ModelParams, RateMatrix,
    RATE_FLOOR,
};
use crate::prior::{stick_break, sticks_from_weights};
use crate::rng::{step, StreamKey};

/// Largest stick fraction fed to `log(1 - u)`.
pub const STICK_CEILING: f64 = 1.0 - 1e-12;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    /// Truncation level `K*` of the stick-breaking priors.
    pub truncation_k: usize,
    pub n_burn: usize,
    pub n_keep: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub seed: u64,
    /// Update FPRs from control data only.
    pub cut_feedback: bool,
    pub include_other_cause: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            truncation_k: 10,
            n_burn: 10_000,
            n_keep: 50_000,
            thin: 50,
            n_chains: 3,
            seed: 0,
            cut_feedback: false,
            include_other_cause: false,
        }
    }
}

impl SamplerConfig {
    /// Short chains for tests and replication studies.
    pub fn desk(truncation_k: usize, seed: u64) -> Self {
        SamplerConfig {
            truncation_k,
            n_burn: 2_000,
            n_keep: 4_000,
            thin: 10,
            n_chains: 3,
            seed,
            ..SamplerConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncation_k == 0 || self.thin == 0 || self.n_keep == 0 || self.n_chains == 0 {
            return Err(Error::Argument(
                "truncation_k, thin, n_keep and n_chains must all be at least 1".into(),
            ));
        }
        if self.n_keep < self.thin {
            return Err(Error::Argument(format!(
                "n_keep = {} retains no draws at thin = {}",
                self.n_keep, self.thin
            )));
        }
        Ok(())
    }

    pub fn draws_per_chain(&self) -> usize {
        self.n_keep / self.thin
    }
}

/// Where a step's randomness comes from: one keyed stream per subject or
/// parameter component.
#[derive(Clone, Copy, Debug)]
pub struct Streams {
    pub seed: u64,
    pub chain: u32,
    pub iteration: u64,
}

impl Streams {
    pub fn new(seed: u64, chain: u32, iteration: u64) -> Self {
        Streams {
            seed,
            chain,
            iteration,
        }
    }

    pub fn rng(&self, step_id: u32, index: u64) -> ChaCha8Rng {
        StreamKey::new(self.seed, self.chain, step_id, self.iteration, index).rng()
    }
}

/// Parameters, latent indicators and the stick fractions behind `eta`/`nu`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub params: ModelParams,
    pub latent: LatentState,
    pub eta_sticks: Vec<f64>,
    pub nu_sticks: Vec<f64>,
}

// ---------------------------------------------------------------------------
// Draw helpers

pub(crate) fn draw_beta<R: Rng + ?Sized>(p: BetaPrior, rng: &mut R) -> Result<f64> {
    let d = Beta::new(p.a, p.b)
        .map_err(|e| Error::numeric("beta draw", format!("Beta({}, {}): {e}", p.a, p.b)))?;
    Ok(d.sample(rng))
}

pub(crate) fn draw_rate<R: Rng + ?Sized>(p: BetaPrior, rng: &mut R) -> Result<f64> {
    Ok(draw_beta(p, rng)?.clamp(RATE_FLOOR, 1.0 - RATE_FLOOR))
}

pub(crate) fn draw_gamma<R: Rng + ?Sized>(g: GammaPrior, rng: &mut R) -> Result<f64> {
    let d = Gamma::new(g.shape, 1.0 / g.rate).map_err(|e| {
        Error::numeric("gamma draw", format!("Gamma({}, {}): {e}", g.shape, g.rate))
    })?;
    Ok(d.sample(rng).max(f64::MIN_POSITIVE))
}

pub(crate) fn draw_dirichlet<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let g: Vec<f64> = weights
        .iter()
        .map(|&a| draw_gamma(GammaPrior { shape: a, rate: 1.0 }, rng))
        .collect::<Result<_>>()?;
    let total: f64 = g.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::numeric("dirichlet draw", "gamma variates sum to zero"));
    }
    Ok(g.into_iter().map(|x| x / total).collect())
}

/// Log rate tables used by the indicator steps: `[j * K + k]`.
struct LogRates {
    k: usize,
    tp1: Vec<f64>,
    tp0: Vec<f64>,
    fp1: Vec<f64>,
    fp0: Vec<f64>,
}

impl LogRates {
    fn new(params: &ModelParams) -> Self {
        let logs = |m: &RateMatrix| -> (Vec<f64>, Vec<f64>) {
            (
                m.values().iter().map(|p| p.ln()).collect(),
                m.values().iter().map(|p| (-p).ln_1p()).collect(),
            )
        };
        let (tp1, tp0) = logs(&params.theta);
        let (fp1, fp0) = logs(&params.psi);
        LogRates {
            k: params.n_subclasses(),
            tp1,
            tp0,
            fp1,
            fp0,
        }
    }

    #[inline]
    fn tp(&self, j: usize, k: usize, m: u8) -> f64 {
        if m == 1 {
            self.tp1[j * self.k + k]
        } else {
            self.tp0[j * self.k + k]
        }
    }

    #[inline]
    fn fp(&self, j: usize, k: usize, m: u8) -> f64 {
        if m == 1 {
            self.fp1[j * self.k + k]
        } else {
            self.fp0[j * self.k + k]
        }
    }

    /// Sum of FPR log terms over all dimensions for subclass `k`.
    #[inline]
    fn fp_all(&self, m: &[u8], k: usize) -> f64 {
        m.iter().enumerate().map(|(j, &v)| self.fp(j, k, v)).sum()
    }
}

// ---------------------------------------------------------------------------
// Step 1: case class indicators

fn class_log_weights_with(m: &[u8], z: usize, params: &ModelParams, lr: &LogRates) -> Vec<f64> {
    let base = lr.fp_all(m, z);
    (0..params.n_classes())
        .map(|c| {
            let lik = if c < m.len() {
                base - lr.fp(c, z, m[c]) + lr.tp(c, z, m[c])
            } else {
                base
            };
            lik + params.pi[c].ln()
        })
        .collect()
}

/// Unnormalized log probabilities of each class for a case with pattern `m`
/// in subclass `z`. The `eta_z` factor is common to all classes and omitted.
pub fn case_class_log_weights(m: &[u8], z: usize, params: &ModelParams) -> Vec<f64> {
    class_log_weights_with(m, z, params, &LogRates::new(params))
}

/// Normalized full-conditional class probabilities.
pub fn case_class_probs(m: &[u8], z: usize, params: &ModelParams) -> Result<Vec<f64>> {
    crate::math::normalize_log_weights(&case_class_log_weights(m, z, params))
        .ok_or_else(|| Error::numeric("step_case_class", "all class weights are zero"))
}

pub fn step_case_class(
    latent: &mut LatentState,
    params: &ModelParams,
    dataset: &Dataset,
    streams: &Streams,
) -> Result<()> {
    let lr = LogRates::new(params);
    for (i, m) in dataset.cases().rows().enumerate() {
        let w = class_log_weights_with(m, latent.case_subclass[i], params, &lr);
        let mut rng = streams.rng(step::CASE_CLASS, i as u64);
        latent.case_class[i] = sample_log_categorical(&w, &mut rng).ok_or_else(|| {
            Error::numeric("step_case_class", format!("case {i}: all class weights are zero"))
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Step 2: subclass indicators

fn case_subclass_log_weights_with(m: &[u8], class: usize, params: &ModelParams, lr: &LogRates) -> Vec<f64> {
    (0..params.n_subclasses())
        .map(|k| {
            let mut lik = lr.fp_all(m, k);
            if class < m.len() {
                lik += lr.tp(class, k, m[class]) - lr.fp(class, k, m[class]);
            }
            params.eta[k].ln() + lik
        })
        .collect()
}

fn control_subclass_log_weights_with(m: &[u8], params: &ModelParams, lr: &LogRates) -> Vec<f64> {
    (0..params.n_subclasses())
        .map(|k| params.nu[k].ln() + lr.fp_all(m, k))
        .collect()
}

pub fn case_subclass_log_weights(m: &[u8], class: usize, params: &ModelParams) -> Vec<f64> {
    case_subclass_log_weights_with(m, class, params, &LogRates::new(params))
}

pub fn control_subclass_log_weights(m: &[u8], params: &ModelParams) -> Vec<f64> {
    control_subclass_log_weights_with(m, params, &LogRates::new(params))
}

pub fn step_subclass(
    latent: &mut LatentState,
    params: &ModelParams,
    dataset: &Dataset,
    streams: &Streams,
) -> Result<()> {
    let lr = LogRates::new(params);
    if params.n_subclasses() == 1 {
        latent.case_subclass.iter_mut().for_each(|z| *z = 0);
        latent.control_subclass.iter_mut().for_each(|z| *z = 0);
        return Ok(());
    }
    for (i, m) in dataset.cases().rows().enumerate() {
        let w = case_subclass_log_weights_with(m, latent.case_class[i], params, &lr);
        let mut rng = streams.rng(step::CASE_SUBCLASS, i as u64);
        latent.case_subclass[i] = sample_log_categorical(&w, &mut rng).ok_or_else(|| {
            Error::numeric("step_subclass", format!("case {i}: all subclass weights are zero"))
        })?;
    }
    for (i, m) in dataset.controls().rows().enumerate() {
        let w = control_subclass_log_weights_with(m, params, &lr);
        let mut rng = streams.rng(step::CONTROL_SUBCLASS, i as u64);
        latent.control_subclass[i] = sample_log_categorical(&w, &mut rng).ok_or_else(|| {
            Error::numeric("step_subclass", format!("control {i}: all subclass weights are zero"))
        })?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Steps 3-4: stick-breaking weights

pub fn subclass_counts(indicators: &[usize], n_subclasses: usize) -> Vec<usize> {
    let mut counts = vec![0; n_subclasses];
    for &z in indicators {
        counts[z] += 1;
    }
    counts
}

/// Beta full conditionals of the first `K - 1` stick fractions:
/// `Beta(1 + n_k, alpha + sum_{l > k} n_l)`.
pub fn stick_posterior(counts: &[usize], alpha: f64) -> Vec<BetaPrior> {
    let k = counts.len();
    let mut tail: f64 = counts.iter().sum::<usize>() as f64;
    let mut out = Vec::with_capacity(k.saturating_sub(1));
    for &n in &counts[..k.saturating_sub(1)] {
        tail -= n as f64;
        out.push(BetaPrior {
            a: 1.0 + n as f64,
            b: alpha + tail,
        });
    }
    out
}

fn draw_sticks(post: &[BetaPrior], streams: &Streams, step_id: u32) -> Result<Vec<f64>> {
    post.iter()
        .enumerate()
        .map(|(k, &p)| draw_beta(p, &mut streams.rng(step_id, k as u64)))
        .collect()
}

/// Case subclass weights, with counts pooled over every case class.
pub fn step_eta(state: &mut ChainState, streams: &Streams) -> Result<()> {
    let k = state.params.n_subclasses();
    let counts = subclass_counts(&state.latent.case_subclass, k);
    let sticks = draw_sticks(&stick_posterior(&counts, state.params.alpha1), streams, step::ETA)?;
    state.params.eta = stick_break(&sticks);
    state.eta_sticks = sticks;
    Ok(())
}

pub fn step_nu(state: &mut ChainState, streams: &Streams) -> Result<()> {
    let k = state.params.n_subclasses();
    let counts = subclass_counts(&state.latent.control_subclass, k);
    let sticks = draw_sticks(&stick_posterior(&counts, state.params.alpha0), streams, step::NU)?;
    state.params.nu = stick_break(&sticks);
    state.nu_sticks = sticks;
    Ok(())
}

// ---------------------------------------------------------------------------
// Step 5: concentrations

/// `Gamma(shape + K - 1, rate - sum_k log(1 - u_k))`, with `K - 1 = sticks.len()`.
pub fn alpha_posterior(sticks: &[f64], prior: GammaPrior) -> GammaPrior {
    let r: f64 = -sticks
        .iter()
        .map(|&u| (-u.min(STICK_CEILING)).ln_1p())
        .sum::<f64>();
    GammaPrior {
        shape: prior.shape + sticks.len() as f64,
        rate: prior.rate + r,
    }
}

pub fn step_alpha(state: &mut ChainState, hyper: &HyperPriors, streams: &Streams) -> Result<()> {
    let a0 = alpha_posterior(&state.nu_sticks, hyper.alpha0);
    let a1 = alpha_posterior(&state.eta_sticks, hyper.alpha1);
    state.params.alpha0 = draw_gamma(a0, &mut streams.rng(step::ALPHA, 0))?;
    state.params.alpha1 = draw_gamma(a1, &mut streams.rng(step::ALPHA, 1))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Steps 6-7: rates

/// Positive/negative counts per `(dimension, subclass)`: `[(j * K + k) * 2 + m]`.
struct RateCounts {
    k: usize,
    counts: Vec<usize>,
}

impl RateCounts {
    fn new(j: usize, k: usize) -> Self {
        RateCounts {
            k,
            counts: vec![0; j * k * 2],
        }
    }

    #[inline]
    fn add(&mut self, j: usize, k: usize, m: u8) {
        self.counts[(j * self.k + k) * 2 + m as usize] += 1;
    }

    fn get(&self, j: usize, k: usize, m: u8) -> usize {
        self.counts[(j * self.k + k) * 2 + m as usize]
    }
}

/// TPR full conditionals `Beta(c1 + #positives, c2 + #negatives)` over cases
/// with `I = j` and `Z = k`.
pub fn tpr_posterior(latent: &LatentState, dataset: &Dataset, hyper: &HyperPriors) -> BetaGrid {
    let (jd, k) = (hyper.n_dims(), hyper.n_subclasses());
    let mut counts = RateCounts::new(jd, k);
    for (i, m) in dataset.cases().rows().enumerate() {
        let c = latent.case_class[i];
        if c < jd {
            counts.add(c, latent.case_subclass[i], m[c]);
        }
    }
    let mut grid = hyper.tpr.clone();
    for j in 0..jd {
        for s in 0..k {
            let p = hyper.tpr.get(j, s);
            grid.set(
                j,
                s,
                BetaPrior {
                    a: p.a + counts.get(j, s, 1) as f64,
                    b: p.b + counts.get(j, s, 0) as f64,
                },
            );
        }
    }
    grid
}

/// FPR full conditionals. Counts pool all controls in subclass `k` and, unless
/// `cut_feedback`, every case in subclass `k` whose class is not `j`.
pub fn fpr_posterior(
    latent: &LatentState,
    dataset: &Dataset,
    hyper: &HyperPriors,
    cut_feedback: bool,
) -> BetaGrid {
    let (jd, k) = (hyper.n_dims(), hyper.n_subclasses());
    let mut counts = RateCounts::new(jd, k);
    for (i, m) in dataset.controls().rows().enumerate() {
        let z = latent.control_subclass[i];
        for (j, &v) in m.iter().enumerate() {
            counts.add(j, z, v);
        }
    }
    if !cut_feedback {
        for (i, m) in dataset.cases().rows().enumerate() {
            let (c, z) = (latent.case_class[i], latent.case_subclass[i]);
            for (j, &v) in m.iter().enumerate() {
                if j != c {
                    counts.add(j, z, v);
                }
            }
        }
    }
    let mut grid = hyper.fpr.clone();
    for j in 0..jd {
        for s in 0..k {
            let p = hyper.fpr.get(j, s);
            grid.set(
                j,
                s,
                BetaPrior {
                    a: p.a + counts.get(j, s, 1) as f64,
                    b: p.b + counts.get(j, s, 0) as f64,
                },
            );
        }
    }
    grid
}

fn draw_rates(grid: &BetaGrid, target: &mut RateMatrix, streams: &Streams, step_id: u32) -> Result<()> {
    let k = grid.n_subclasses();
    for j in 0..grid.n_dims() {
        for s in 0..k {
            let mut rng = streams.rng(step_id, (j * k + s) as u64);
            target.set(j, s, draw_rate(grid.get(j, s), &mut rng)?);
        }
    }
    Ok(())
}

pub fn step_tpr(
    state: &mut ChainState,
    hyper: &HyperPriors,
    dataset: &Dataset,
    streams: &Streams,
) -> Result<()> {
    let grid = tpr_posterior(&state.latent, dataset, hyper);
    draw_rates(&grid, &mut state.params.theta, streams, step::TPR)
}

pub fn step_fpr(
    state: &mut ChainState,
    hyper: &HyperPriors,
    dataset: &Dataset,
    streams: &Streams,
    cut_feedback: bool,
) -> Result<()> {
    let grid = fpr_posterior(&state.latent, dataset, hyper, cut_feedback);
    draw_rates(&grid, &mut state.params.psi, streams, step::FPR)
}

// ---------------------------------------------------------------------------
// Step 8: etiologic fractions

pub fn class_counts(case_class: &[usize], n_classes: usize) -> Vec<usize> {
    subclass_counts(case_class, n_classes)
}

/// Dirichlet full conditional `a_c + #{cases in class c}`.
pub fn pi_posterior(latent: &LatentState, hyper: &HyperPriors) -> Vec<f64> {
    let t = class_counts(&latent.case_class, hyper.n_classes());
    hyper
        .dirichlet
        .iter()
        .zip(t)
        .map(|(a, n)| a + n as f64)
        .collect()
}

pub fn step_pi(state: &mut ChainState, hyper: &HyperPriors, streams: &Streams) -> Result<()> {
    let post = pi_posterior(&state.latent, hyper);
    state.params.pi = draw_dirichlet(&post, &mut streams.rng(step::PI, 0))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Sweep, initialization, multi-chain run

/// One full sweep of all eight updates.
pub fn sweep(
    state: &mut ChainState,
    dataset: &Dataset,
    hyper: &HyperPriors,
    cut_feedback: bool,
    streams: &Streams,
) -> Result<()> {
    step_case_class(&mut state.latent, &state.params, dataset, streams)?;
    step_subclass(&mut state.latent, &state.params, dataset, streams)?;
    step_eta(state, streams)?;
    step_nu(state, streams)?;
    step_alpha(state, hyper, streams)?;
    step_tpr(state, hyper, dataset, streams)?;
    step_fpr(state, hyper, dataset, streams, cut_feedback)?;
    step_pi(state, hyper, streams)?;
    Ok(())
}

fn check_inputs(dataset: &Dataset, hyper: &HyperPriors, config: &SamplerConfig) -> Result<()> {
    config.validate()?;
    hyper.validate()?;
    if config.include_other_cause != dataset.include_other_cause() {
        return Err(Error::Argument(
            "sampler and dataset disagree about the other-cause class".into(),
        ));
    }
    if hyper.n_dims() != dataset.n_dims() {
        return Err(Error::Dimension {
            what: "hyperprior J",
            expected: dataset.n_dims(),
            actual: hyper.n_dims(),
        });
    }
    if hyper.n_subclasses() != config.truncation_k {
        return Err(Error::Dimension {
            what: "hyperprior K",
            expected: config.truncation_k,
            actual: hyper.n_subclasses(),
        });
    }
    if hyper.n_classes() != dataset.n_classes() {
        return Err(Error::Dimension {
            what: "Dirichlet weights",
            expected: dataset.n_classes(),
            actual: hyper.n_classes(),
        });
    }
    Ok(())
}

/// Starting state: each case goes to its positive pathogen with the largest
/// case/control positive-rate ratio, subclasses are uniform, rates start at
/// prior means and `pi` at the normalized class counts.
pub fn initialize(dataset: &Dataset, hyper: &HyperPriors, seed: u64, chain: u32) -> ChainState {
    let (jd, k, l) = (dataset.n_dims(), hyper.n_subclasses(), dataset.n_classes());
    let n1 = dataset.n_cases();
    let positive_rate = |m: &crate::model::BinaryMatrix, j: usize| {
        let pos = m.rows().filter(|r| r[j] == 1).count() as f64;
        (pos + 0.5) / (m.nrows() as f64 + 1.0)
    };
    let ratio: Vec<f64> = (0..jd)
        .map(|j| positive_rate(dataset.cases(), j) / positive_rate(dataset.controls(), j))
        .collect();
    let streams = Streams::new(seed, chain, 0);

    let mut case_class = Vec::with_capacity(n1);
    let mut case_subclass = Vec::with_capacity(n1);
    for (i, m) in dataset.cases().rows().enumerate() {
        let mut rng = streams.rng(step::INIT, i as u64);
        let best = (0..jd)
            .filter(|&j| m[j] == 1)
            .map(|j| ratio[j])
            .fold(f64::NEG_INFINITY, f64::max);
        let ties: Vec<usize> = (0..jd).filter(|&j| m[j] == 1 && ratio[j] == best).collect();
        let c = if !ties.is_empty() {
            ties[rng.random_range(0..ties.len())]
        } else if dataset.include_other_cause() {
            jd
        } else {
            rng.random_range(0..jd)
        };
        case_class.push(c);
        case_subclass.push(rng.random_range(0..k));
    }
    let control_subclass = (0..dataset.n_controls())
        .map(|i| {
            streams
                .rng(step::INIT, (n1 + i) as u64)
                .random_range(0..k)
        })
        .collect();

    let mean_matrix = |g: &BetaGrid| {
        let mut m = RateMatrix::filled(jd, k, 0.5);
        for j in 0..jd {
            for s in 0..k {
                m.set(j, s, g.get(j, s).mean().clamp(RATE_FLOOR, 1.0 - RATE_FLOOR));
            }
        }
        m
    };
    let counts = class_counts(&case_class, l);
    let pi = counts.iter().map(|&c| c as f64 / n1 as f64).collect();
    let eta = vec![1.0 / k as f64; k];
    let sticks = sticks_from_weights(&eta);
    let params = ModelParams {
        pi,
        theta: mean_matrix(&hyper.tpr),
        psi: mean_matrix(&hyper.fpr),
        eta: eta.clone(),
        nu: eta,
        alpha0: hyper.alpha0.shape / hyper.alpha0.rate,
        alpha1: hyper.alpha1.shape / hyper.alpha1.rate,
    };
    ChainState {
        params,
        latent: LatentState {
            case_class,
            case_subclass,
            control_subclass,
        },
        eta_sticks: sticks.clone(),
        nu_sticks: sticks,
    }
}

/// One retained draw.
#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub params: ModelParams,
    pub case_class: Vec<u16>,
    pub case_subclass: Vec<u16>,
    pub control_subclass: Vec<u16>,
}

impl Draw {
    pub fn from_state(state: &ChainState) -> Self {
        let narrow = |v: &[usize]| v.iter().map(|&x| x as u16).collect();
        Draw {
            params: state.params.clone(),
            case_class: narrow(&state.latent.case_class),
            case_subclass: narrow(&state.latent.case_subclass),
            control_subclass: narrow(&state.latent.control_subclass),
        }
    }
}

/// Retained draws, one `Vec<Draw>` per chain.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorSamples {
    chains: Vec<Vec<Draw>>,
    class_names: Vec<String>,
    n_dims: usize,
    n_subclasses: usize,
}

impl PosteriorSamples {
    pub fn new(chains: Vec<Vec<Draw>>, class_names: Vec<String>) -> Result<Self> {
        let first = chains
            .first()
            .and_then(|c| c.first())
            .ok_or_else(|| Error::Argument("posterior has no draws".into()))?;
        let (n_dims, n_subclasses) = (first.params.n_dims(), first.params.n_subclasses());
        let len = chains[0].len();
        for c in &chains {
            if c.len() != len {
                return Err(Error::Argument("chains hold different numbers of draws".into()));
            }
            for d in c {
                if d.params.n_dims() != n_dims
                    || d.params.n_subclasses() != n_subclasses
                    || d.params.n_classes() != class_names.len()
                {
                    return Err(Error::Argument("draws disagree in shape".into()));
                }
            }
        }
        Ok(PosteriorSamples {
            chains,
            class_names,
            n_dims,
            n_subclasses,
        })
    }

    pub fn chains(&self) -> &[Vec<Draw>] {
        &self.chains
    }

    pub fn n_chains(&self) -> usize {
        self.chains.len()
    }

    pub fn draws_per_chain(&self) -> usize {
        self.chains[0].len()
    }

    pub fn n_draws(&self) -> usize {
        self.n_chains() * self.draws_per_chain()
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn n_subclasses(&self) -> usize {
        self.n_subclasses
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    /// All draws, chain by chain.
    pub fn draws(&self) -> impl Iterator<Item = &Draw> + '_ {
        self.chains.iter().flatten()
    }

    /// Per-chain traces of a scalar functional.
    pub fn trace(&self, f: impl Fn(&ModelParams) -> f64) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.iter().map(|d| f(&d.params)).collect())
            .collect()
    }

    /// Pooled draws of a scalar functional.
    pub fn pooled(&self, f: impl Fn(&ModelParams) -> f64) -> Vec<f64> {
        self.draws().map(|d| f(&d.params)).collect()
    }

    pub fn pi_mean(&self) -> Vec<f64> {
        let n = self.n_draws() as f64;
        let mut acc = vec![0.0; self.n_classes()];
        for d in self.draws() {
            for (a, p) in acc.iter_mut().zip(&d.params.pi) {
                *a += p;
            }
        }
        acc.into_iter().map(|a| a / n).collect()
    }

    /// Equal-tail credible interval of each etiologic fraction.
    pub fn pi_interval(&self, level: f64) -> Vec<(f64, f64)> {
        let tail = (1.0 - level) / 2.0;
        (0..self.n_classes())
            .map(|c| {
                let q = crate::math::quantiles(&self.pooled(|p| p.pi[c]), &[tail, 1.0 - tail]);
                (q[0], q[1])
            })
            .collect()
    }
}

fn run_chain(
    dataset: &Dataset,
    hyper: &HyperPriors,
    config: &SamplerConfig,
    chain: u32,
) -> Result<Vec<Draw>> {
    let mut state = initialize(dataset, hyper, config.seed, chain);
    let mut draws = Vec::with_capacity(config.draws_per_chain());
    let total = config.n_burn + config.n_keep;
    for t in 0..total {
        // iteration 0 of the INIT stream is taken by `initialize`
        let streams = Streams::new(config.seed, chain, t as u64 + 1);
        sweep(&mut state, dataset, hyper, config.cut_feedback, &streams)
            .map_err(|e| e.in_sampler(chain as usize, t))?;
        if t >= config.n_burn && (t - config.n_burn + 1).is_multiple_of(config.thin) {
            draws.push(Draw::from_state(&state));
        }
    }
    Ok(draws)
}

/// Run `n_chains` independent chains in parallel.
pub fn run(dataset: &Dataset, hyper: &HyperPriors, config: &SamplerConfig) -> Result<PosteriorSamples> {
    check_inputs(dataset, hyper, config)?;
    let chains = (0..config.n_chains as u32)
        .into_par_iter()
        .map(|c| run_chain(dataset, hyper, config, c))
        .collect::<Result<Vec<_>>>()?;
    PosteriorSamples::new(chains, dataset.class_names())
}

/// Draw a full state from the truncated prior, including latent indicators
/// for `n_cases` and `n_controls` subjects.
pub fn draw_from_prior(
    hyper: &HyperPriors,
    n_cases: usize,
    n_controls: usize,
    streams: &Streams,
) -> Result<ChainState> {
    hyper.validate()?;
    let (jd, k) = (hyper.n_dims(), hyper.n_subclasses());
    let mut rng = streams.rng(step::PRIOR_DRAW, 0);
    let alpha0 = draw_gamma(hyper.alpha0, &mut rng)?;
    let alpha1 = draw_gamma(hyper.alpha1, &mut rng)?;
    let mut sticks = |alpha: f64| -> Result<Vec<f64>> {
        (0..k - 1)
            .map(|_| draw_beta(BetaPrior { a: 1.0, b: alpha }, &mut rng))
            .collect()
    };
    let eta_sticks = sticks(alpha1)?;
    let nu_sticks = sticks(alpha0)?;
    let mut theta = RateMatrix::filled(jd, k, 0.5);
    let mut psi = RateMatrix::filled(jd, k, 0.5);
    for j in 0..jd {
        for s in 0..k {
            theta.set(j, s, draw_rate(hyper.tpr.get(j, s), &mut rng)?);
            psi.set(j, s, draw_rate(hyper.fpr.get(j, s), &mut rng)?);
        }
    }
    let pi = draw_dirichlet(&hyper.dirichlet, &mut rng)?;
    let params = ModelParams {
        pi,
        theta,
        psi,
        eta: stick_break(&eta_sticks),
        nu: stick_break(&nu_sticks),
        alpha0,
        alpha1,
    };
    let draw_index = |w: &[f64], rng: &mut ChaCha8Rng| -> Result<usize> {
        let lw: Vec<f64> = w.iter().map(|x| x.ln()).collect();
        sample_log_categorical(&lw, rng)
            .ok_or_else(|| Error::numeric("draw_from_prior", "degenerate weights"))
    };
    let mut case_class = Vec::with_capacity(n_cases);
    let mut case_subclass = Vec::with_capacity(n_cases);
    for _ in 0..n_cases {
        case_class.push(draw_index(&params.pi, &mut rng)?);
        case_subclass.push(draw_index(&params.eta, &mut rng)?);
    }
    let control_subclass = (0..n_controls)
        .map(|_| draw_index(&params.nu, &mut rng))
        .collect::<Result<_>>()?;
    Ok(ChainState {
        params,
        latent: LatentState {
            case_class,
            case_subclass,
            control_subclass,
        },
        eta_sticks,
        nu_sticks,
    })
}

/// Log-likelihood terms used only by tests and diagnostics.
pub fn complete_data_log_likelihood(state: &ChainState, dataset: &Dataset) -> f64 {
    let p = &state.params;
    let mut total = 0.0;
    for (i, m) in dataset.cases().rows().enumerate() {
        let (c, z) = (state.latent.case_class[i], state.latent.case_subclass[i]);
        for (j, &v) in m.iter().enumerate() {
            let rate = if j == c { p.theta.get(j, z) } else { p.psi.get(j, z) };
            total += log_bernoulli(rate, v);
        }
    }
    for (i, m) in dataset.controls().rows().enumerate() {
        let z = state.latent.control_subclass[i];
        for (j, &v) in m.iter().enumerate() {
            total += log_bernoulli(p.psi.get(j, z), v);
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BinaryMatrix;
    use approx::assert_abs_diff_eq;

    fn tiny_params() -> ModelParams {
        ModelParams::single_subclass(vec![0.5, 0.5], vec![0.9, 0.9], vec![0.1, 0.2]).unwrap()
    }

    #[test]
    fn class_probs_hand_example() {
        let probs = case_class_probs(&[1, 0], 0, &tiny_params()).unwrap();
        // 0.9 * 0.8 vs 0.1 * 0.1
        assert_abs_diff_eq!(probs[0], 0.72 / 0.73, epsilon = 1e-12);
        assert_abs_diff_eq!(probs[0], 0.98630, epsilon = 1e-5);
        assert_abs_diff_eq!(probs[1], 0.01370, epsilon = 1e-5);
    }

    #[test]
    fn degenerate_pi_forces_class() {
        let mut p = tiny_params();
        p.pi = vec![1.0, 0.0];
        let probs = case_class_probs(&[0, 1], 0, &p).unwrap();
        assert_eq!(probs, vec![1.0, 0.0]);
    }

    #[test]
    fn uninformative_measurement_gives_uniform_classes() {
        let p = ModelParams::single_subclass(vec![1.0 / 3.0; 3], vec![0.3, 0.6, 0.2], vec![0.3, 0.6, 0.2])
            .unwrap();
        let probs = case_class_probs(&[1, 0, 1], 0, &p).unwrap();
        for q in probs {
            assert_abs_diff_eq!(q, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn other_cause_class_uses_fprs_everywhere() {
        let mut p = tiny_params();
        p.pi = vec![0.25, 0.25, 0.5];
        let w = case_class_log_weights(&[1, 0], 0, &p);
        assert_eq!(w.len(), 3);
        assert_abs_diff_eq!(w[2], (0.5f64 * 0.1 * 0.8).ln(), epsilon = 1e-12);
    }

    #[test]
    fn identical_fprs_leave_prior_subclass_weights() {
        let psi = RateMatrix::from_rows(&[vec![0.3, 0.3], vec![0.6, 0.6]]).unwrap();
        let p = ModelParams::new(
            vec![0.5, 0.5],
            RateMatrix::filled(2, 2, 0.9),
            psi,
            vec![0.5, 0.5],
            vec![0.3, 0.7],
            1.0,
            1.0,
        )
        .unwrap();
        let w = crate::math::normalize_log_weights(&control_subclass_log_weights(&[1, 0], &p)).unwrap();
        assert_abs_diff_eq!(w[0], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 0.7, epsilon = 1e-12);
    }

    #[test]
    fn two_subclass_control_hand_example() {
        let psi = RateMatrix::from_rows(&[vec![0.9, 0.1], vec![0.9, 0.1], vec![0.9, 0.1]]).unwrap();
        let p = ModelParams::new(
            vec![1.0 / 3.0; 3],
            RateMatrix::filled(3, 2, 0.9),
            psi,
            vec![0.5, 0.5],
            vec![0.5, 0.5],
            1.0,
            1.0,
        )
        .unwrap();
        let w = crate::math::normalize_log_weights(&control_subclass_log_weights(&[1, 1, 1], &p)).unwrap();
        // 0.729 / (0.729 + 0.001)
        assert_abs_diff_eq!(w[0], 0.729 / 0.730, epsilon = 1e-12);
    }

    #[test]
    fn stick_posterior_counts() {
        let post = stick_posterior(&[3, 1, 0], 1.0);
        assert_eq!(post, vec![BetaPrior { a: 4.0, b: 2.0 }, BetaPrior { a: 2.0, b: 1.0 }]);
        let prior = stick_posterior(&[0, 0, 0], 0.7);
        assert!(prior.iter().all(|p| p.a == 1.0 && p.b == 0.7));
    }

    #[test]
    fn alpha_posterior_examples() {
        let g = GammaPrior::default();
        assert_eq!(alpha_posterior(&[], g), g);
        let post = alpha_posterior(&[0.5, 0.5], g);
        assert_abs_diff_eq!(post.shape, 2.25, epsilon = 1e-15);
        assert_abs_diff_eq!(post.rate, 0.25 + 2.0 * 2f64.ln(), epsilon = 1e-14);
        // squaring each (1 - u) doubles r
        let u = [0.3, 0.6];
        let u2: Vec<f64> = u.iter().map(|x: &f64| 1.0 - (1.0 - x).powi(2)).collect();
        let r1 = alpha_posterior(&u, g).rate - 0.25;
        let r2 = alpha_posterior(&u2, g).rate - 0.25;
        assert_abs_diff_eq!(r2, 2.0 * r1, epsilon = 1e-12);
        // a stick at exactly 1 stays finite
        assert!(alpha_posterior(&[1.0], g).rate.is_finite());
    }

    fn small_dataset() -> Dataset {
        let cases = BinaryMatrix::from_rows(&[vec![1, 0], vec![1, 1], vec![0, 1]]).unwrap();
        let controls = BinaryMatrix::from_rows(&[vec![0, 0], vec![1, 0]]).unwrap();
        Dataset::new(cases, controls, Dataset::default_names(2), false).unwrap()
    }

    #[test]
    fn run_is_deterministic_and_retains_expected_count() {
        let data = small_dataset();
        let hyper = HyperPriors::default_for(2, 3, false);
        let config = SamplerConfig {
            truncation_k: 3,
            n_burn: 20,
            n_keep: 100,
            thin: 7,
            n_chains: 2,
            seed: 11,
            ..SamplerConfig::default()
        };
        let a = run(&data, &hyper, &config).unwrap();
        let b = run(&data, &hyper, &config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.draws_per_chain(), 14);
        assert_ne!(a.chains()[0], a.chains()[1]);
        for d in a.draws() {
            assert!((d.params.pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!((d.params.eta.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(d.params.theta.values().iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn default_protocol_retains_thousand_draws() {
        let c = SamplerConfig::default();
        assert_eq!(c.draws_per_chain(), 1000);
        assert_eq!(c.n_chains, 3);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let data = small_dataset();
        let hyper = HyperPriors::default_for(2, 3, false);
        let config = SamplerConfig {
            truncation_k: 2,
            ..SamplerConfig::desk(2, 0)
        };
        assert!(run(&data, &hyper, &config).is_err());
        let config = SamplerConfig {
            include_other_cause: true,
            ..SamplerConfig::desk(3, 0)
        };
        assert!(run(&data, &hyper, &config).is_err());
        assert!(SamplerConfig { thin: 0, ..SamplerConfig::default() }.validate().is_err());
    }

    #[test]
    fn initialization_follows_positive_ratio() {
        let data = small_dataset();
        let hyper = HyperPriors::default_for(2, 2, false);
        let s = initialize(&data, &hyper, 5, 0);
        // case 0 has a single positive on dimension 0
        assert_eq!(s.latent.case_class[0], 0);
        assert_eq!(s.latent.case_class[2], 1);
        assert_eq!(s.params.theta.get(0, 0), 0.5);
        assert_abs_diff_eq!(s.params.pi.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
    }
}
