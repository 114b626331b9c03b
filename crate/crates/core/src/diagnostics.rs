//! Convergence diagnostics for multi-chain output.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs::PosteriorSamples;
use crate::math::{mean, quantiles, sample_variance};
use crate::model::ModelParams;

pub const MIN_CHAINS: usize = 2;
pub const MIN_DRAWS: usize = 10;

/// Potential scale reduction factor of a scalar over several chains.
///
/// `sqrt(((n - 1) / n * W + B / n) / W)` with `W` the mean within-chain
/// variance and `B / n` the variance of the chain means. Floored at 1 so that
/// chains with equal means give exactly 1.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < MIN_CHAINS {
        return Err(Error::Argument(format!(
            "psrf needs at least {MIN_CHAINS} chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if n < MIN_DRAWS || chains.iter().any(|c| c.len() != n) {
        return Err(Error::Argument(format!(
            "psrf needs equal-length chains of at least {MIN_DRAWS} draws"
        )));
    }
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&chains.iter().map(|c| sample_variance(c)).collect::<Vec<_>>());
    let b_over_n = sample_variance(&means);
    if !(w > 0.0) {
        return Err(Error::UndefinedVariance("psrf: zero within-chain variance"));
    }
    let nf = n as f64;
    let var_plus = (nf - 1.0) / nf * w + b_over_n;
    Ok((var_plus / w).sqrt().max(1.0))
}

/// Sample autocorrelation at lags `0..=max_lag`: `sum_{t<N-h} (x_t - m)(x_{t+h} - m) / (N - h)`
/// over the `1/N` variance.
pub fn autocorr(draws: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = draws.len();
    if n < 2 {
        return Err(Error::Argument("autocorrelation needs at least 2 draws".into()));
    }
    let m = mean(draws);
    let c0 = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Err(Error::UndefinedVariance("autocorrelation of a constant series"));
    }
    Ok((0..=max_lag.min(n - 1))
        .map(|h| {
            let s: f64 = (0..n - h).map(|t| (draws[t] - m) * (draws[t + h] - m)).sum();
            s / (n - h) as f64 / c0
        })
        .collect())
}

/// Effective sample size `N / (1 + 2 sum rho_h)`, truncating the sum at the
/// first non-positive pair `rho_{2t-1} + rho_{2t}`. Never exceeds `N`.
pub fn ess(draws: &[f64]) -> Result<f64> {
    let n = draws.len();
    if n < 2 {
        return Err(Error::Argument("effective sample size needs at least 2 draws".into()));
    }
    let m = mean(draws);
    let c0 = draws.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64;
    if !(c0 > 0.0) {
        return Err(Error::UndefinedVariance("effective sample size of a constant series"));
    }
    let rho = |h: usize| -> f64 {
        let s: f64 = (0..n - h).map(|t| (draws[t] - m) * (draws[t + h] - m)).sum();
        s / (n - h) as f64 / c0
    };
    let mut sum = 0.0;
    let mut h = 1;
    while h + 1 < n {
        let pair = rho(h) + rho(h + 1);
        if pair <= 0.0 {
            break;
        }
        sum += pair;
        h += 2;
    }
    let tau = (1.0 + 2.0 * sum).max(1.0);
    Ok((n as f64 / tau).min(n as f64))
}

/// Multi-chain ESS: sum of per-chain values.
pub fn ess_chains(chains: &[Vec<f64>]) -> Result<f64> {
    chains.iter().map(|c| ess(c)).sum()
}

pub const SUMMARY_QUANTILES: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];
pub const REPORT_MAX_LAG: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub name: String,
    pub mean: f64,
    /// `None` when the functional is constant across every draw.
    pub psrf: Option<f64>,
    pub autocorr: Vec<f64>,
    pub ess: Option<f64>,
    pub quantiles: [f64; 5],
}

impl ChainSummary {
    pub fn from_chains(name: &str, chains: &[Vec<f64>]) -> Result<Self> {
        let pooled: Vec<f64> = chains.iter().flatten().copied().collect();
        if pooled.is_empty() {
            return Err(Error::Argument(format!("{name}: no draws")));
        }
        let q = quantiles(&pooled, &SUMMARY_QUANTILES);
        let constant = sample_variance(&pooled) == 0.0;
        let psrf = match psrf(chains) {
            Ok(v) => Some(v),
            Err(Error::UndefinedVariance(_)) if constant => None,
            Err(Error::Argument(_)) => None,
            Err(e) => return Err(e),
        };
        let (autocorr, ess) = if constant {
            (Vec::new(), None)
        } else {
            let per_chain: Vec<Vec<f64>> = chains
                .iter()
                .filter_map(|c| autocorr(c, REPORT_MAX_LAG).ok())
                .collect();
            let ac = if per_chain.is_empty() {
                Vec::new()
            } else {
                let len = per_chain.iter().map(Vec::len).min().unwrap_or(0);
                (0..len)
                    .map(|h| per_chain.iter().map(|r| r[h]).sum::<f64>() / per_chain.len() as f64)
                    .collect()
            };
            let e: f64 = chains.iter().map(|c| ess(c).unwrap_or(1.0)).sum();
            (ac, Some(e.min(pooled.len() as f64)))
        };
        Ok(ChainSummary {
            name: name.to_string(),
            mean: mean(&pooled),
            psrf,
            autocorr,
            ess,
            quantiles: [q[0], q[1], q[2], q[3], q[4]],
        })
    }
}

/// A named scalar function of one parameter draw.
pub struct Functional {
    pub name: String,
    pub eval: Box<dyn Fn(&ModelParams) -> f64 + Send + Sync>,
}

/// The default monitored set: every etiologic fraction, both concentrations
/// and the largest case and control subclass weights.
pub fn default_functionals(class_names: &[String]) -> Vec<Functional> {
    let mut out: Vec<Functional> = class_names
        .iter()
        .enumerate()
        .map(|(c, name)| Functional {
            name: format!("pi[{name}]"),
            eval: Box::new(move |p: &ModelParams| p.pi[c]),
        })
        .collect();
    let max = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.push(Functional {
        name: "alpha0".into(),
        eval: Box::new(|p| p.alpha0),
    });
    out.push(Functional {
        name: "alpha1".into(),
        eval: Box::new(|p| p.alpha1),
    });
    out.push(Functional {
        name: "max_eta".into(),
        eval: Box::new(move |p| max(&p.eta)),
    });
    out.push(Functional {
        name: "max_nu".into(),
        eval: Box::new(move |p| max(&p.nu)),
    });
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub n_chains: usize,
    pub draws_per_chain: usize,
    pub parameters: Vec<ChainSummary>,
}

impl DiagnosticsReport {
    pub fn get(&self, name: &str) -> Option<&ChainSummary> {
        self.parameters.iter().find(|s| s.name == name)
    }

    /// Largest defined psrf over parameters whose name starts with `prefix`.
    pub fn max_psrf(&self, prefix: &str) -> Option<f64> {
        self.parameters
            .iter()
            .filter(|s| s.name.starts_with(prefix))
            .filter_map(|s| s.psrf)
            .reduce(f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn summarize(posterior: &PosteriorSamples, functionals: &[Functional]) -> Result<DiagnosticsReport> {
    let parameters = functionals
        .iter()
        .map(|f| ChainSummary::from_chains(&f.name, &posterior.trace(|p| (f.eval)(p))))
        .collect::<Result<_>>()?;
    Ok(DiagnosticsReport {
        n_chains: posterior.n_chains(),
        draws_per_chain: posterior.draws_per_chain(),
        parameters,
    })
}

/// Diagnostics for the default monitored set.
pub fn report(posterior: &PosteriorSamples) -> Result<DiagnosticsReport> {
    summarize(posterior, &default_functionals(posterior.class_names()))
}

/// Trace CSV with columns `chain,draw,<functional names...>`.
pub fn write_traces(posterior: &PosteriorSamples, functionals: &[Functional], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(functionals.iter().map(|f| f.name.clone()));
    w.write_record(&header)?;
    for (c, chain) in posterior.chains().iter().enumerate() {
        for (t, d) in chain.iter().enumerate() {
            let mut row = vec![c.to_string(), t.to_string()];
            row.extend(functionals.iter().map(|f| format!("{}", (f.eval)(&d.params))));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_report(report: &DiagnosticsReport, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(report.to_json()?.as_bytes())?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn identical_chains_give_one() {
        let c = normals(1, 50);
        assert_eq!(psrf(&[c.clone(), c.clone(), c]).unwrap(), 1.0);
    }

    #[test]
    fn separated_chains_give_large_psrf() {
        let a: Vec<f64> = normals(2, 100).iter().map(|x| x * 1e-3).collect();
        let b: Vec<f64> = a.iter().map(|x| x + 10.0).collect();
        assert!(psrf(&[a, b]).unwrap() > 100.0);
    }

    #[test]
    fn psrf_affine_invariant() {
        let chains = vec![normals(3, 200), normals(4, 200), normals(5, 200)];
        let moved: Vec<Vec<f64>> = chains
            .iter()
            .map(|c| c.iter().map(|x| -3.0 * x + 7.0).collect())
            .collect();
        assert_abs_diff_eq!(psrf(&chains).unwrap(), psrf(&moved).unwrap(), epsilon = 1e-12);
    }

    #[test]
    fn psrf_errors() {
        assert!(matches!(psrf(&[vec![1.0; 20], vec![1.0; 20]]), Err(Error::UndefinedVariance(_))));
        assert!(psrf(&[normals(1, 20)]).is_err());
        assert!(psrf(&[normals(1, 5), normals(2, 5)]).is_err());
    }

    #[test]
    fn alternating_series() {
        let x: Vec<f64> = (0..100).map(|t| if t % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let r = autocorr(&x, 2).unwrap();
        assert_abs_diff_eq!(r[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r[1], -1.0, epsilon = 1e-15);
        assert!(ess(&x).unwrap() <= 100.0);
        assert!(autocorr(&[2.0; 10], 3).is_err());
    }
}
