//! Large-sample behaviour of the locally independent working model when the
//! data come from a nested truth.
//!
//! The working model keeps the marginal TPRs `theta^M_j = sum_k theta_kj eta_k`
//! at their true values and has free parameters `omega = (pi_1..pi_{J-1}, psi^M)`.
//! Its pseudo-truth maximizes the expected log-likelihood
//! `Q = w E_case[log f] + (1 - w) E_control[log c]`, with expectations taken by
//! enumerating all `2^J` patterns.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{check_enumerable, pattern_distribution, pattern_from_index, ModelParams, Population};
use crate::simulation::ScenarioSpec;

pub const GRADIENT_TOL: f64 = 1e-9;
const MAX_NEWTON_ITER: usize = 200;
const MAX_BFGS_ITER: usize = 5000;

/// Working-model parameters in natural coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Omega {
    /// All `J` etiologic fractions; the last is `1 - sum` of the others.
    pub pi: Vec<f64>,
    /// Marginal FPRs `psi^M`.
    pub psi: Vec<f64>,
}

impl Omega {
    pub fn n_dims(&self) -> usize {
        self.psi.len()
    }

    /// `(pi_1..pi_{J-1}, psi_1..psi_J)`.
    pub fn to_vector(&self) -> Vec<f64> {
        let j = self.n_dims();
        self.pi[..j - 1].iter().chain(&self.psi).copied().collect()
    }

    pub fn from_vector(v: &[f64]) -> Self {
        let j = (v.len() + 1) / 2;
        let mut pi = v[..j - 1].to_vec();
        pi.push(1.0 - pi.iter().sum::<f64>());
        Omega {
            pi,
            psi: v[j - 1..].to_vec(),
        }
    }

    fn to_unconstrained(&self) -> Vec<f64> {
        let j = self.n_dims();
        let last = self.pi[j - 1];
        self.pi[..j - 1]
            .iter()
            .map(|p| (p / last).ln())
            .chain(self.psi.iter().map(|&p| crate::math::logit(p)))
            .collect()
    }

    fn from_unconstrained(u: &[f64]) -> Self {
        let j = (u.len() + 1) / 2;
        let max = u[..j - 1].iter().copied().fold(0.0f64, f64::max);
        let mut e: Vec<f64> = u[..j - 1].iter().map(|x| (x - max).exp()).collect();
        e.push((-max).exp());
        let total: f64 = e.iter().sum();
        Omega {
            pi: e.into_iter().map(|x| x / total).collect(),
            psi: u[j - 1..].iter().map(|&x| crate::math::expit(x)).collect(),
        }
    }

    /// `d omega / d u` (block diagonal).
    fn jacobian(&self) -> DMatrix<f64> {
        let j = self.n_dims();
        let n = 2 * j - 1;
        let mut jac = DMatrix::zeros(n, n);
        for l in 0..j - 1 {
            for m in 0..j - 1 {
                let delta = if l == m { 1.0 } else { 0.0 };
                jac[(l, m)] = self.pi[l] * (delta - self.pi[m]);
            }
        }
        for i in 0..j {
            jac[(j - 1 + i, j - 1 + i)] = self.psi[i] * (1.0 - self.psi[i]);
        }
        jac
    }
}

/// The locally independent working model: fixed marginal TPRs and optionally
/// fixed marginal FPRs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkingModel {
    pub theta_marginal: Vec<f64>,
    /// When set, `psi^M` is held at these values and only `pi` is free.
    pub fixed_psi: Option<Vec<f64>>,
    /// Case share `w` of the expected log-likelihood.
    pub case_weight: f64,
}

impl WorkingModel {
    pub fn for_truth(truth: &ModelParams, fix_psi: bool) -> Result<Self> {
        if truth.has_other_cause() {
            return Err(Error::Argument(
                "asymptotics are defined for truths without an other-cause class".into(),
            ));
        }
        let (jd, k) = (truth.n_dims(), truth.n_subclasses());
        let theta_marginal = (0..jd)
            .map(|j| (0..k).map(|s| truth.theta.get(j, s) * truth.eta[s]).sum())
            .collect();
        let fixed_psi = fix_psi.then(|| {
            (0..jd)
                .map(|j| (0..k).map(|s| truth.psi.get(j, s) * truth.nu[s]).sum())
                .collect()
        });
        Ok(WorkingModel {
            theta_marginal,
            fixed_psi,
            case_weight: 0.5,
        })
    }

    pub fn n_dims(&self) -> usize {
        self.theta_marginal.len()
    }

    /// Indices of free coordinates in `Omega::to_vector` order.
    pub fn free_indices(&self) -> Vec<usize> {
        let j = self.n_dims();
        match self.fixed_psi {
            Some(_) => (0..j - 1).collect(),
            None => (0..2 * j - 1).collect(),
        }
    }
}

#[inline]
fn g(p: f64, m: u8) -> f64 {
    if m == 1 {
        p
    } else {
        1.0 - p
    }
}

#[inline]
fn d(p: f64, m: u8) -> f64 {
    if m == 1 {
        1.0 / p
    } else {
        -1.0 / (1.0 - p)
    }
}

/// Per-class case densities `f_l(m)` and the mixture `f = sum_l pi_l f_l`.
fn case_components(m: &[u8], omega: &Omega, theta_marginal: &[f64]) -> (Vec<f64>, f64) {
    let fl: Vec<f64> = (0..m.len())
        .map(|l| {
            m.iter()
                .enumerate()
                .map(|(j, &v)| if j == l { g(theta_marginal[l], v) } else { g(omega.psi[j], v) })
                .product()
        })
        .collect();
    let f = fl.iter().zip(&omega.pi).map(|(a, b)| a * b).sum();
    (fl, f)
}

/// Working-model log-density of pattern `m` in `population`.
pub fn plcm_log_density(m: &[u8], population: Population, omega: &Omega, theta_marginal: &[f64]) -> f64 {
    match population {
        Population::Control => m.iter().zip(&omega.psi).map(|(&v, &p)| g(p, v).ln()).sum(),
        Population::Case => case_components(m, omega, theta_marginal).1.ln(),
    }
}

/// Log-density, score and Hessian with respect to `Omega::to_vector`.
pub fn score_and_hessian(
    m: &[u8],
    population: Population,
    omega: &Omega,
    theta_marginal: &[f64],
) -> (f64, DVector<f64>, DMatrix<f64>) {
    let j = omega.n_dims();
    let n = 2 * j - 1;
    let dv: Vec<f64> = m.iter().zip(&omega.psi).map(|(&v, &p)| d(p, v)).collect();
    let mut score = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    match population {
        Population::Control => {
            for i in 0..j {
                score[j - 1 + i] = dv[i];
                hess[(j - 1 + i, j - 1 + i)] = -dv[i] * dv[i];
            }
            (plcm_log_density(m, population, omega, theta_marginal), score, hess)
        }
        Population::Case => {
            let (fl, f) = case_components(m, omega, theta_marginal);
            let last = j - 1;
            let mut fp = DVector::zeros(n);
            for l in 0..j - 1 {
                fp[l] = fl[l] - fl[last];
            }
            for i in 0..j {
                fp[j - 1 + i] = dv[i] * (f - omega.pi[i] * fl[i]);
            }
            let mut fpp = DMatrix::zeros(n, n);
            for l in 0..j - 1 {
                for i in 0..j {
                    let a = if l != i { fl[l] } else { 0.0 };
                    let b = if last != i { fl[last] } else { 0.0 };
                    let v = dv[i] * (a - b);
                    fpp[(l, j - 1 + i)] = v;
                    fpp[(j - 1 + i, l)] = v;
                }
            }
            for a in 0..j {
                for b in a + 1..j {
                    let v = dv[a] * dv[b] * (f - omega.pi[a] * fl[a] - omega.pi[b] * fl[b]);
                    fpp[(j - 1 + a, j - 1 + b)] = v;
                    fpp[(j - 1 + b, j - 1 + a)] = v;
                }
            }
            score.copy_from(&(&fp / f));
            hess.copy_from(&(fpp / f - (&fp * fp.transpose()) / (f * f)));
            (f.ln(), score, hess)
        }
    }
}

/// True case and control pattern distributions of a nested truth.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthDistribution {
    pub n_dims: usize,
    pub case: Vec<f64>,
    pub control: Vec<f64>,
}

impl TruthDistribution {
    pub fn new(truth: &ModelParams) -> Result<Self> {
        check_enumerable(truth.n_dims())?;
        Ok(TruthDistribution {
            n_dims: truth.n_dims(),
            case: pattern_distribution(truth, Population::Case)?,
            control: pattern_distribution(truth, Population::Control)?,
        })
    }
}

/// Expected log-likelihood, score, negative Hessian and score outer product.
struct Moments {
    q: f64,
    grad: DVector<f64>,
    info: DMatrix<f64>,
    outer: DMatrix<f64>,
}

fn moments(truth: &TruthDistribution, model: &WorkingModel, omega: &Omega) -> Moments {
    let j = truth.n_dims;
    let n = 2 * j - 1;
    let w = model.case_weight;
    let mut q = 0.0;
    let mut grad = DVector::zeros(n);
    let mut info = DMatrix::zeros(n, n);
    let mut outer = DMatrix::zeros(n, n);
    for idx in 0..1usize << j {
        let m = pattern_from_index(idx, j);
        for (pop, weight) in [
            (Population::Case, w * truth.case[idx]),
            (Population::Control, (1.0 - w) * truth.control[idx]),
        ] {
            if weight == 0.0 {
                continue;
            }
            let (ll, s, h) = score_and_hessian(&m, pop, omega, &model.theta_marginal);
            q += weight * ll;
            grad += &s * weight;
            info -= h * weight;
            outer += (&s * s.transpose()) * weight;
        }
    }
    Moments { q, grad, info, outer }
}

fn restrict_vec(v: &DVector<f64>, idx: &[usize]) -> DVector<f64> {
    DVector::from_iterator(idx.len(), idx.iter().map(|&i| v[i]))
}

fn restrict_mat(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |a, b| m[(idx[a], idx[b])])
}

/// Solved pseudo-truth and solver record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PseudoTruth {
    pub omega: Omega,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub method: String,
    pub expected_log_likelihood: f64,
}

fn embed(model: &WorkingModel, free: &[usize], u_free: &[f64], template: &[f64]) -> Omega {
    let mut u = template.to_vec();
    for (&i, &v) in free.iter().zip(u_free) {
        u[i] = v;
    }
    let mut omega = Omega::from_unconstrained(&u);
    if let Some(psi) = &model.fixed_psi {
        omega.psi = psi.clone();
    }
    omega
}

struct Objective<'a> {
    truth: &'a TruthDistribution,
    model: &'a WorkingModel,
    free: Vec<usize>,
    template: Vec<f64>,
}

impl Objective<'_> {
    fn omega(&self, u: &[f64]) -> Omega {
        embed(self.model, &self.free, u, &self.template)
    }

    /// `(Q, natural gradient, unconstrained gradient, unconstrained information)`.
    fn eval(&self, u: &[f64]) -> (f64, DVector<f64>, DVector<f64>, DMatrix<f64>) {
        let omega = self.omega(u);
        let mom = moments(self.truth, self.model, &omega);
        let jac = restrict_mat(&omega.jacobian(), &self.free);
        let g = restrict_vec(&mom.grad, &self.free);
        let info = restrict_mat(&mom.info, &self.free);
        let gu = jac.transpose() * &g;
        let fu = jac.transpose() * info * &jac;
        (mom.q, g, gu, fu)
    }

    fn q(&self, u: &[f64]) -> f64 {
        moments(self.truth, self.model, &self.omega(u)).q
    }
}

fn fisher_scoring(obj: &Objective, mut u: Vec<f64>) -> (Vec<f64>, f64, usize) {
    let (mut q, mut g, mut gu, mut fu) = obj.eval(&u);
    for it in 0..MAX_NEWTON_ITER {
        if g.norm() < GRADIENT_TOL {
            return (u, g.norm(), it);
        }
        let step = match fu.clone().cholesky() {
            Some(ch) => ch.solve(&gu),
            None => gu.clone(),
        };
        let slope = gu.dot(&step);
        let mut t = 1.0;
        let mut moved = false;
        while t > 1e-12 {
            let cand: Vec<f64> = u.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let (qc, gc, guc, fuc) = obj.eval(&cand);
            let armijo = qc >= q + 1e-4 * t * slope;
            let flat = (qc - q).abs() <= 1e-14 * q.abs().max(1.0) && gc.norm() < g.norm();
            if qc.is_finite() && (armijo || flat) {
                u = cand;
                (q, g, gu, fu) = (qc, gc, guc, fuc);
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if !moved {
            return (u, g.norm(), it);
        }
    }
    (u, g.norm(), MAX_NEWTON_ITER)
}

fn bfgs(obj: &Objective, mut u: Vec<f64>) -> (Vec<f64>, f64, usize) {
    let n = u.len();
    let (mut q, mut g, mut gu, _) = obj.eval(&u);
    let mut h = DMatrix::<f64>::identity(n, n);
    for it in 0..MAX_BFGS_ITER {
        if g.norm() < GRADIENT_TOL {
            return (u, g.norm(), it);
        }
        let mut dir = &h * &gu;
        if gu.dot(&dir) <= 0.0 {
            h = DMatrix::identity(n, n);
            dir = gu.clone();
        }
        let slope = gu.dot(&dir);
        let mut t = 1.0;
        let mut next = None;
        while t > 1e-16 {
            let cand: Vec<f64> = u.iter().zip(dir.iter()).map(|(a, b)| a + t * b).collect();
            let qc = obj.q(&cand);
            if qc.is_finite() && qc >= q + 1e-4 * t * slope {
                next = Some((cand, qc));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, qc)) = next else {
            return (u, g.norm(), it);
        };
        let (_, gc, guc, _) = obj.eval(&cand);
        let s = DVector::from_iterator(n, cand.iter().zip(&u).map(|(a, b)| a - b));
        // ascent on Q is descent on -Q: y is the change in -gradient
        let y = &gu - &guc;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            let rho = 1.0 / sy;
            let i = DMatrix::<f64>::identity(n, n);
            let left = &i - (&s * y.transpose()) * rho;
            let right = &i - (&y * s.transpose()) * rho;
            h = left * &h * right + (&s * s.transpose()) * rho;
        }
        u = cand;
        q = qc;
        g = gc;
        gu = guc;
    }
    (u, g.norm(), MAX_BFGS_ITER)
}

/// Maximize the expected working log-likelihood. Starts at the true `pi` and
/// the true marginal FPRs.
pub fn solve_pseudo_truth_for(truth: &ModelParams, model: &WorkingModel) -> Result<PseudoTruth> {
    let dist = TruthDistribution::new(truth)?;
    let jd = truth.n_dims();
    let k = truth.n_subclasses();
    let start = Omega {
        pi: truth.pi.iter().map(|p| p.max(1e-6)).collect(),
        psi: model.fixed_psi.clone().unwrap_or_else(|| {
            (0..jd)
                .map(|j| (0..k).map(|s| truth.psi.get(j, s) * truth.nu[s]).sum())
                .collect()
        }),
    };
    let pi_total: f64 = start.pi.iter().sum();
    let start = Omega {
        pi: start.pi.iter().map(|p| p / pi_total).collect(),
        ..start
    };
    let template = start.to_unconstrained();
    let free = model.free_indices();
    let obj = Objective {
        truth: &dist,
        model,
        free: free.clone(),
        template: template.clone(),
    };
    let u0: Vec<f64> = free.iter().map(|&i| template[i]).collect();
    let (u, norm, iters) = fisher_scoring(&obj, u0.clone());
    let (u, norm, iters, method) = if norm < GRADIENT_TOL {
        (u, norm, iters, "fisher-scoring")
    } else {
        log::debug!("Fisher scoring stalled at gradient norm {norm:e}; switching to BFGS");
        let (ub, _, ib) = bfgs(&obj, u);
        let (ub, nb, ib2) = fisher_scoring(&obj, ub);
        (ub, nb, iters + ib + ib2, "bfgs")
    };
    if !(norm < GRADIENT_TOL) {
        return Err(Error::NonConvergence {
            operation: "solve_pseudo_truth",
            iterations: iters,
            residual: norm,
        });
    }
    let omega = obj.omega(&u);
    let q = obj.q(&u);
    Ok(PseudoTruth {
        omega,
        gradient_norm: norm,
        iterations: iters,
        method: method.to_string(),
        expected_log_likelihood: q,
    })
}

/// Pseudo-truth with free marginal FPRs and equal case/control weight.
pub fn solve_pseudo_truth(scenario: &ScenarioSpec) -> Result<PseudoTruth> {
    let truth = scenario.to_params()?;
    solve_pseudo_truth_for(&truth, &WorkingModel::for_truth(&truth, false)?)
}

/// Model-based and robust variances of the free parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Sandwich {
    pub v_model: DMatrix<f64>,
    pub v_robust: DMatrix<f64>,
    /// Variance of each `pi_l`, including the dependent last one.
    pub pi_var_model: Vec<f64>,
    pub pi_var_robust: Vec<f64>,
}

impl Sandwich {
    /// `sqrt(V_M / V_R)` per class.
    pub fn variance_ratio(&self) -> Vec<f64> {
        self.pi_var_model
            .iter()
            .zip(&self.pi_var_robust)
            .map(|(m, r)| (m / r).sqrt())
            .collect()
    }
}

/// `V_M = A^-1 / N`, `V_R = A^-1 B A^-1 / N` with `A = -E[H]` and `B = Var[score]`.
pub fn sandwich_for(truth: &ModelParams, model: &WorkingModel, omega: &Omega, n_total: f64) -> Result<Sandwich> {
    if !(n_total > 0.0) {
        return Err(Error::Argument(format!("sample size {n_total} must be positive")));
    }
    let dist = TruthDistribution::new(truth)?;
    let mom = moments(&dist, model, omega);
    let free = model.free_indices();
    let a = restrict_mat(&mom.info, &free);
    let g = restrict_vec(&mom.grad, &free);
    let b = restrict_mat(&mom.outer, &free) - &g * g.transpose();
    let a_inv = a
        .clone()
        .try_inverse()
        .filter(|m| m.iter().all(|x| x.is_finite()))
        .ok_or_else(|| Error::numeric("sandwich", "expected information A is singular"))?;
    let v_model = &a_inv / n_total;
    let v_robust = (&a_inv * b * &a_inv) / n_total;
    let v_robust = (&v_robust + v_robust.transpose()) * 0.5;

    // pi_J = 1 - sum of the others: D = [I; -1']
    let j = omega.n_dims();
    let dmat = DMatrix::from_fn(j, j - 1, |r, c| {
        if r == j - 1 {
            -1.0
        } else if r == c {
            1.0
        } else {
            0.0
        }
    });
    let pi_block = |v: &DMatrix<f64>| -> Vec<f64> {
        let block = v.view((0, 0), (j - 1, j - 1)).into_owned();
        let full = &dmat * block * dmat.transpose();
        (0..j).map(|i| full[(i, i)]).collect()
    };
    Ok(Sandwich {
        pi_var_model: pi_block(&v_model),
        pi_var_robust: pi_block(&v_robust),
        v_model,
        v_robust,
    })
}

pub fn sandwich(omega: &Omega, scenario: &ScenarioSpec, n_total: f64) -> Result<Sandwich> {
    let truth = scenario.to_params()?;
    sandwich_for(&truth, &WorkingModel::for_truth(&truth, false)?, omega, n_total)
}

/// `(pi* - pi_o) / pi_o * 100`.
pub fn prab(pi_star: &[f64], pi_true: &[f64]) -> Vec<f64> {
    pi_star
        .iter()
        .zip(pi_true)
        .map(|(s, t)| (s - t) / t * 100.0)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticsResult {
    pub eta_o: Option<f64>,
    pub omega_star: Omega,
    pub prab: Vec<f64>,
    pub variance_ratio: Vec<f64>,
    pub v_model: Vec<Vec<f64>>,
    pub v_robust: Vec<Vec<f64>>,
    pub gradient_norm: f64,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

pub const DEFAULT_N_TOTAL: f64 = 1000.0;

/// Solve and evaluate the sandwich for one scenario.
pub fn analyze(scenario: &ScenarioSpec, fix_psi: bool, n_total: f64) -> Result<AsymptoticsResult> {
    let truth = scenario.to_params()?;
    let model = WorkingModel::for_truth(&truth, fix_psi)?;
    let pt = solve_pseudo_truth_for(&truth, &model)?;
    let sw = sandwich_for(&truth, &model, &pt.omega, n_total)?;
    Ok(AsymptoticsResult {
        eta_o: scenario.eta_o(),
        prab: prab(&pt.omega.pi, &truth.pi),
        variance_ratio: sw.variance_ratio(),
        v_model: to_rows(&sw.v_model),
        v_robust: to_rows(&sw.v_robust),
        omega_star: pt.omega,
        gradient_norm: pt.gradient_norm,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrabPoint {
    pub eta_o: f64,
    pub class: String,
    pub prab: f64,
    pub variance_ratio: f64,
}

pub const DEFAULT_ETA_GRID: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// PRAB and variance ratio per class over a grid of case subclass weights.
pub fn prab_curve(scenario: &ScenarioSpec, eta_grid: &[f64], fix_psi: bool) -> Result<Vec<PrabPoint>> {
    let names = scenario.pathogen_names();
    let per_point: Vec<Vec<PrabPoint>> = eta_grid
        .par_iter()
        .map(|&eta| {
            let r = analyze(&scenario.with_eta_o(eta)?, fix_psi, DEFAULT_N_TOTAL)?;
            Ok(names
                .iter()
                .enumerate()
                .map(|(c, name)| PrabPoint {
                    eta_o: eta,
                    class: name.clone(),
                    prab: r.prab[c],
                    variance_ratio: r.variance_ratio[c],
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_point.into_iter().flatten().collect())
}

pub fn write_prab_csv(points: &[PrabPoint], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for p in points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn degenerate_mixture_density() {
        let omega = Omega {
            pi: vec![1.0, 0.0],
            psi: vec![0.2, 0.3],
        };
        let ll = plcm_log_density(&[1, 0], Population::Case, &omega, &[0.9, 0.8]);
        assert_abs_diff_eq!(ll, (0.9f64 * 0.7).ln(), epsilon = 1e-14);
        let ll0 = plcm_log_density(&[0, 0], Population::Control, &omega, &[0.9, 0.8]);
        assert_abs_diff_eq!(ll0, 0.8f64.ln() + 0.7f64.ln(), epsilon = 1e-14);
    }

    #[test]
    fn unconstrained_round_trip() {
        let omega = Omega {
            pi: vec![0.5, 0.3, 0.2],
            psi: vec![0.1, 0.4, 0.7],
        };
        let back = Omega::from_unconstrained(&omega.to_unconstrained());
        for (a, b) in back.to_vector().iter().zip(omega.to_vector()) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-14);
        }
        assert_eq!(Omega::from_vector(&omega.to_vector()).pi.len(), 3);
    }

    #[test]
    fn prab_formula() {
        let p = prab(&[0.6, 0.4], &[0.5, 0.5]);
        assert_abs_diff_eq!(p[0], 20.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], -20.0, epsilon = 1e-12);
    }
}
