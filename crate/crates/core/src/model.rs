//! Domain types and closed-form probability machinery for the nested
//! partially-latent class model.
//!
//! Dimensions, classes and subclasses are 0-based throughout. A case class
//! index `c < J` means "caused by pathogen `c`"; when the other-cause class is
//! enabled, index `J` is that class and uses false positive rates on every
//! dimension.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_bernoulli, log_sum_exp};

/// Rates exactly at 0 or 1 are pulled into `[RATE_FLOOR, 1 - RATE_FLOOR]`.
pub const RATE_FLOOR: f64 = 1e-12;
/// Largest `J` for which the `2^J` pattern space is enumerated.
pub const MAX_ENUMERATION_DIMS: usize = 20;
const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Population {
    Case,
    Control,
}

impl Population {
    pub const BOTH: [Population; 2] = [Population::Case, Population::Control];

    pub fn as_str(self) -> &'static str {
        match self {
            Population::Case => "case",
            Population::Control => "control",
        }
    }
}

/// Row-major 0/1 matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                what: "binary matrix storage",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|&&v| v > 1) {
            return Err(Error::Argument(format!("matrix entry {bad} is not 0/1")));
        }
        Ok(BinaryMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            if r.len() != cols {
                return Err(Error::Dimension {
                    what: "matrix row",
                    expected: cols,
                    actual: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), cols, data)
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[u8] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.data[i * self.cols + j]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u8]> + '_ {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub(crate) fn row_mut(&mut self, i: usize) -> &mut [u8] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Stack `other` below `self`.
    pub fn vstack(&self, other: &BinaryMatrix) -> Result<BinaryMatrix> {
        if self.cols != other.cols {
            return Err(Error::Dimension {
                what: "vstack columns",
                expected: self.cols,
                actual: other.cols,
            });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        BinaryMatrix::new(self.rows + other.rows, self.cols, data)
    }
}

/// Case and control measurements on the same `J` pathogens.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    cases: BinaryMatrix,
    controls: BinaryMatrix,
    pathogens: Vec<String>,
    include_other_cause: bool,
}

impl Dataset {
    pub fn new(
        cases: BinaryMatrix,
        controls: BinaryMatrix,
        pathogens: Vec<String>,
        include_other_cause: bool,
    ) -> Result<Self> {
        if cases.nrows() == 0 || controls.nrows() == 0 {
            return Err(Error::Argument(
                "dataset needs at least one case and one control".into(),
            ));
        }
        if cases.ncols() < 2 {
            return Err(Error::Argument(format!(
                "dataset needs J >= 2 measurements, got {}",
                cases.ncols()
            )));
        }
        if controls.ncols() != cases.ncols() {
            return Err(Error::Dimension {
                what: "control columns",
                expected: cases.ncols(),
                actual: controls.ncols(),
            });
        }
        if pathogens.len() != cases.ncols() {
            return Err(Error::Dimension {
                what: "pathogen names",
                expected: cases.ncols(),
                actual: pathogens.len(),
            });
        }
        Ok(Dataset {
            cases,
            controls,
            pathogens,
            include_other_cause,
        })
    }

    /// Names `A`, `B`, ... (or `P1`, `P2`, ... beyond 26).
    pub fn default_names(j: usize) -> Vec<String> {
        (0..j)
            .map(|i| {
                if j <= 26 {
                    ((b'A' + i as u8) as char).to_string()
                } else {
                    format!("P{}", i + 1)
                }
            })
            .collect()
    }

    pub fn cases(&self) -> &BinaryMatrix {
        &self.cases
    }

    pub fn controls(&self) -> &BinaryMatrix {
        &self.controls
    }

    pub fn matrix(&self, population: Population) -> &BinaryMatrix {
        match population {
            Population::Case => &self.cases,
            Population::Control => &self.controls,
        }
    }

    pub fn pathogens(&self) -> &[String] {
        &self.pathogens
    }

    pub fn include_other_cause(&self) -> bool {
        self.include_other_cause
    }

    pub fn set_include_other_cause(&mut self, on: bool) {
        self.include_other_cause = on;
    }

    pub fn n_dims(&self) -> usize {
        self.cases.ncols()
    }

    pub fn n_cases(&self) -> usize {
        self.cases.nrows()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.nrows()
    }

    /// `J`, or `J + 1` with the other-cause class.
    pub fn n_classes(&self) -> usize {
        self.n_dims() + usize::from(self.include_other_cause)
    }

    /// Replace the case matrix, keeping everything else.
    pub fn with_cases(&self, cases: BinaryMatrix) -> Result<Dataset> {
        Dataset::new(
            cases,
            self.controls.clone(),
            self.pathogens.clone(),
            self.include_other_cause,
        )
    }

    /// Class labels: pathogen names, plus `other` when enabled.
    pub fn class_names(&self) -> Vec<String> {
        let mut names = self.pathogens.clone();
        if self.include_other_cause {
            names.push("other".into());
        }
        names
    }
}

/// `J x K` matrix of positive rates, indexed `(dimension, subclass)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RateMatrix {
    n_dims: usize,
    n_subclasses: usize,
    values: Vec<f64>,
}

impl RateMatrix {
    pub fn new(n_dims: usize, n_subclasses: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_dims * n_subclasses {
            return Err(Error::Dimension {
                what: "rate matrix storage",
                expected: n_dims * n_subclasses,
                actual: values.len(),
            });
        }
        Ok(RateMatrix {
            n_dims,
            n_subclasses,
            values,
        })
    }

    pub fn filled(n_dims: usize, n_subclasses: usize, value: f64) -> Self {
        RateMatrix {
            n_dims,
            n_subclasses,
            values: vec![value; n_dims * n_subclasses],
        }
    }

    /// Build from per-dimension rows of `K` subclass rates.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(rows.len() * k);
        for r in rows {
            if r.len() != k {
                return Err(Error::Dimension {
                    what: "rate matrix row",
                    expected: k,
                    actual: r.len(),
                });
            }
            values.extend_from_slice(r);
        }
        RateMatrix::new(rows.len(), k, values)
    }

    /// Build from per-subclass profiles of `J` rates (the transposed layout).
    pub fn from_subclass_profiles(profiles: &[Vec<f64>]) -> Result<Self> {
        let j = profiles.first().map_or(0, Vec::len);
        let k = profiles.len();
        let mut values = vec![0.0; j * k];
        for (s, p) in profiles.iter().enumerate() {
            if p.len() != j {
                return Err(Error::Dimension {
                    what: "subclass profile",
                    expected: j,
                    actual: p.len(),
                });
            }
            for (d, &v) in p.iter().enumerate() {
                values[d * k + s] = v;
            }
        }
        RateMatrix::new(j, k, values)
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn n_subclasses(&self) -> usize {
        self.n_subclasses
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.n_subclasses + k]
    }

    #[inline]
    pub fn set(&mut self, j: usize, k: usize, v: f64) {
        self.values[j * self.n_subclasses + k] = v;
    }

    /// The `K` subclass rates of dimension `j`.
    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_subclasses..(j + 1) * self.n_subclasses]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_dims).map(|j| self.row(j).to_vec()).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// A rate that had to be pulled away from 0 or 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ClampRecord {
    pub matrix: &'static str,
    pub dim: usize,
    pub subclass: usize,
    pub original: f64,
}

/// Full parameter state of one model configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    /// Etiologic fractions, length `J` or `J + 1`.
    pub pi: Vec<f64>,
    /// True positive rates.
    pub theta: RateMatrix,
    /// False positive rates.
    pub psi: RateMatrix,
    /// Case subclass weights.
    pub eta: Vec<f64>,
    /// Control subclass weights.
    pub nu: Vec<f64>,
    pub alpha0: f64,
    pub alpha1: f64,
}

fn check_simplex(what: &str, w: &[f64]) -> Result<()> {
    if w.is_empty() {
        return Err(Error::Argument(format!("{what} is empty")));
    }
    if w.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::Argument(format!("{what} has a negative or non-finite entry")));
    }
    let s: f64 = w.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::Argument(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl ModelParams {
    /// Validate and construct. Rates at exactly 0 or 1 are clamped into
    /// `[RATE_FLOOR, 1 - RATE_FLOOR]` and logged.
    pub fn new(
        pi: Vec<f64>,
        theta: RateMatrix,
        psi: RateMatrix,
        eta: Vec<f64>,
        nu: Vec<f64>,
        alpha0: f64,
        alpha1: f64,
    ) -> Result<Self> {
        let mut p = ModelParams {
            pi,
            theta,
            psi,
            eta,
            nu,
            alpha0,
            alpha1,
        };
        for rec in p.clamp_rates()? {
            log::warn!(
                "clamped {}[{}, {}] = {} into the open unit interval",
                rec.matrix,
                rec.dim,
                rec.subclass,
                rec.original
            );
        }
        p.validate()?;
        Ok(p)
    }

    /// Single-subclass (`K = 1`) parameters.
    pub fn single_subclass(pi: Vec<f64>, theta: Vec<f64>, psi: Vec<f64>) -> Result<Self> {
        let j = theta.len();
        ModelParams::new(
            pi,
            RateMatrix::new(j, 1, theta)?,
            RateMatrix::new(psi.len(), 1, psi)?,
            vec![1.0],
            vec![1.0],
            1.0,
            1.0,
        )
    }

    pub fn n_dims(&self) -> usize {
        self.psi.n_dims()
    }

    pub fn n_subclasses(&self) -> usize {
        self.psi.n_subclasses()
    }

    pub fn n_classes(&self) -> usize {
        self.pi.len()
    }

    pub fn has_other_cause(&self) -> bool {
        self.pi.len() == self.n_dims() + 1
    }

    /// Pull rates at the boundary into the open interval; reject anything
    /// outside `[0, 1]`.
    pub fn clamp_rates(&mut self) -> Result<Vec<ClampRecord>> {
        let mut records = Vec::new();
        let k = self.n_subclasses();
        for (name, m) in [("theta", &mut self.theta), ("psi", &mut self.psi)] {
            for (idx, v) in m.values_mut().iter_mut().enumerate() {
                if !(0.0..=1.0).contains(v) {
                    return Err(Error::Argument(format!(
                        "{name}[{}, {}] = {} is not a probability",
                        idx / k.max(1),
                        idx % k.max(1),
                        v
                    )));
                }
                let c = v.clamp(RATE_FLOOR, 1.0 - RATE_FLOOR);
                if c != *v {
                    records.push(ClampRecord {
                        matrix: name,
                        dim: idx / k.max(1),
                        subclass: idx % k.max(1),
                        original: *v,
                    });
                    *v = c;
                }
            }
        }
        Ok(records)
    }

    pub fn validate(&self) -> Result<()> {
        let j = self.n_dims();
        let k = self.n_subclasses();
        if k == 0 {
            return Err(Error::Argument("K must be at least 1".into()));
        }
        if self.theta.n_dims() != j || self.theta.n_subclasses() != k {
            return Err(Error::Dimension {
                what: "theta shape (J*K)",
                expected: j * k,
                actual: self.theta.n_dims() * self.theta.n_subclasses(),
            });
        }
        if self.pi.len() != j && self.pi.len() != j + 1 {
            return Err(Error::Dimension {
                what: "pi length",
                expected: j,
                actual: self.pi.len(),
            });
        }
        for (what, w, n) in [("eta", &self.eta, k), ("nu", &self.nu, k)] {
            if w.len() != n {
                return Err(Error::Dimension {
                    what,
                    expected: n,
                    actual: w.len(),
                });
            }
        }
        check_simplex("pi", &self.pi)?;
        check_simplex("eta", &self.eta)?;
        check_simplex("nu", &self.nu)?;
        for (name, m) in [("theta", &self.theta), ("psi", &self.psi)] {
            if m.values().iter().any(|&v| !(v > 0.0 && v < 1.0)) {
                return Err(Error::Argument(format!(
                    "{name} entries must lie strictly inside (0, 1)"
                )));
            }
        }
        if !(self.alpha0 > 0.0 && self.alpha1 > 0.0) {
            return Err(Error::Argument("concentrations must be positive".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ParamsDocument::from(self))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: ParamsDocument = serde_json::from_str(s)?;
        doc.into_params()
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsShape {
    n_dims: usize,
    n_subclasses: usize,
    n_classes: usize,
}

/// JSON layout: explicit shape block, rate matrices as `J` rows of `K`.
#[derive(Serialize, Deserialize)]
struct ParamsDocument {
    shape: ParamsShape,
    pi: Vec<f64>,
    theta: Vec<Vec<f64>>,
    psi: Vec<Vec<f64>>,
    eta: Vec<f64>,
    nu: Vec<f64>,
    alpha0: f64,
    alpha1: f64,
}

impl From<&ModelParams> for ParamsDocument {
    fn from(p: &ModelParams) -> Self {
        ParamsDocument {
            shape: ParamsShape {
                n_dims: p.n_dims(),
                n_subclasses: p.n_subclasses(),
                n_classes: p.n_classes(),
            },
            pi: p.pi.clone(),
            theta: p.theta.rows(),
            psi: p.psi.rows(),
            eta: p.eta.clone(),
            nu: p.nu.clone(),
            alpha0: p.alpha0,
            alpha1: p.alpha1,
        }
    }
}

impl ParamsDocument {
    fn into_params(self) -> Result<ModelParams> {
        let theta = RateMatrix::from_rows(&self.theta)?;
        let psi = RateMatrix::from_rows(&self.psi)?;
        for (what, m) in [("theta", &theta), ("psi", &psi)] {
            if m.n_dims() != self.shape.n_dims || m.n_subclasses() != self.shape.n_subclasses {
                return Err(Error::Format(format!(
                    "{what} is {}x{}, shape block says {}x{}",
                    m.n_dims(),
                    m.n_subclasses(),
                    self.shape.n_dims,
                    self.shape.n_subclasses
                )));
            }
        }
        if self.pi.len() != self.shape.n_classes {
            return Err(Error::Format(format!(
                "pi has {} entries, shape block says {}",
                self.pi.len(),
                self.shape.n_classes
            )));
        }
        ModelParams::new(
            self.pi, theta, psi, self.eta, self.nu, self.alpha0, self.alpha1,
        )
    }
}

/// Per-case class and per-subject subclass indicators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatentState {
    pub case_class: Vec<usize>,
    pub case_subclass: Vec<usize>,
    pub control_subclass: Vec<usize>,
}

impl LatentState {
    pub fn validate(&self, n_classes: usize, n_subclasses: usize) -> Result<()> {
        if self.case_class.len() != self.case_subclass.len() {
            return Err(Error::Dimension {
                what: "case subclass indicators",
                expected: self.case_class.len(),
                actual: self.case_subclass.len(),
            });
        }
        if self.case_class.iter().any(|&c| c >= n_classes) {
            return Err(Error::Argument("case class indicator out of range".into()));
        }
        if self
            .case_subclass
            .iter()
            .chain(&self.control_subclass)
            .any(|&z| z >= n_subclasses)
        {
            return Err(Error::Argument("subclass indicator out of range".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    pub const UNIFORM: BetaPrior = BetaPrior { a: 1.0, b: 1.0 };

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// Gamma prior in shape/rate form.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub rate: f64,
}

impl Default for GammaPrior {
    fn default() -> Self {
        GammaPrior {
            shape: 0.25,
            rate: 0.25,
        }
    }
}

/// `J x K` grid of Beta priors, indexed `(dimension, subclass)`.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaGrid {
    n_dims: usize,
    n_subclasses: usize,
    values: Vec<BetaPrior>,
}

impl BetaGrid {
    pub fn filled(n_dims: usize, n_subclasses: usize, prior: BetaPrior) -> Self {
        BetaGrid {
            n_dims,
            n_subclasses,
            values: vec![prior; n_dims * n_subclasses],
        }
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> BetaPrior {
        self.values[j * self.n_subclasses + k]
    }

    pub fn set(&mut self, j: usize, k: usize, prior: BetaPrior) {
        self.values[j * self.n_subclasses + k] = prior;
    }

    /// Use the same prior for dimension `j` in every subclass.
    pub fn set_dim(&mut self, j: usize, prior: BetaPrior) {
        for k in 0..self.n_subclasses {
            self.set(j, k, prior);
        }
    }

    pub fn n_dims(&self) -> usize {
        self.n_dims
    }

    pub fn n_subclasses(&self) -> usize {
        self.n_subclasses
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperPriors {
    /// Dirichlet weights on the etiologic fractions (length `L`).
    pub dirichlet: Vec<f64>,
    pub fpr: BetaGrid,
    pub tpr: BetaGrid,
    pub alpha0: GammaPrior,
    pub alpha1: GammaPrior,
}

impl HyperPriors {
    /// All-ones Dirichlet and Beta weights, `Gamma(0.25, 0.25)` concentrations.
    pub fn default_for(n_dims: usize, n_subclasses: usize, include_other_cause: bool) -> Self {
        HyperPriors {
            dirichlet: vec![1.0; n_dims + usize::from(include_other_cause)],
            fpr: BetaGrid::filled(n_dims, n_subclasses, BetaPrior::UNIFORM),
            tpr: BetaGrid::filled(n_dims, n_subclasses, BetaPrior::UNIFORM),
            alpha0: GammaPrior::default(),
            alpha1: GammaPrior::default(),
        }
    }

    /// Same TPR prior on every dimension and subclass.
    pub fn with_tpr_prior(mut self, prior: BetaPrior) -> Self {
        for j in 0..self.tpr.n_dims() {
            self.tpr.set_dim(j, prior);
        }
        self
    }

    pub fn n_dims(&self) -> usize {
        self.fpr.n_dims()
    }

    pub fn n_subclasses(&self) -> usize {
        self.fpr.n_subclasses()
    }

    pub fn n_classes(&self) -> usize {
        self.dirichlet.len()
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        if !self.dirichlet.iter().all(|&a| pos(a)) {
            return Err(Error::Argument("Dirichlet weights must be positive".into()));
        }
        for g in [&self.fpr, &self.tpr] {
            if !g.values.iter().all(|p| pos(p.a) && pos(p.b)) {
                return Err(Error::Argument("Beta hyperparameters must be positive".into()));
            }
        }
        if g_dims(&self.fpr) != g_dims(&self.tpr) {
            return Err(Error::Argument("TPR and FPR prior grids differ in shape".into()));
        }
        for g in [self.alpha0, self.alpha1] {
            if !(pos(g.shape) && pos(g.rate)) {
                return Err(Error::Argument("Gamma hyperparameters must be positive".into()));
            }
        }
        Ok(())
    }
}

fn g_dims(g: &BetaGrid) -> (usize, usize) {
    (g.n_dims, g.n_subclasses)
}

// ---------------------------------------------------------------------------
// Pattern probabilities

fn check_pattern(m: &[u8], j: usize) -> Result<()> {
    if m.len() != j {
        return Err(Error::Dimension {
            what: "pattern length",
            expected: j,
            actual: m.len(),
        });
    }
    if m.iter().any(|&v| v > 1) {
        return Err(Error::Argument("pattern entries must be 0/1".into()));
    }
    Ok(())
}

/// `log prod_j psi_k^(j)^m_j (1 - psi_k^(j))^(1 - m_j)` for each subclass `k`.
pub(crate) fn subclass_log_products(m: &[u8], psi: &RateMatrix) -> Vec<f64> {
    let k = psi.n_subclasses();
    let mut out = vec![0.0; k];
    for (j, &mj) in m.iter().enumerate() {
        for (s, o) in out.iter_mut().enumerate() {
            *o += log_bernoulli(psi.get(j, s), mj);
        }
    }
    out
}

/// Log of the control pattern probability `P0(m)`.
pub fn log_control_pattern_prob(m: &[u8], nu: &[f64], psi: &RateMatrix) -> Result<f64> {
    check_pattern(m, psi.n_dims())?;
    if nu.len() != psi.n_subclasses() {
        return Err(Error::Dimension {
            what: "nu length",
            expected: psi.n_subclasses(),
            actual: nu.len(),
        });
    }
    let base = subclass_log_products(m, psi);
    let terms: Vec<f64> = base
        .iter()
        .zip(nu)
        .map(|(b, w)| b + w.ln())
        .collect();
    Ok(log_sum_exp(&terms))
}

/// Control pattern probability `P0(m) = sum_k nu_k prod_j Bernoulli(m_j; psi_k^(j))`.
pub fn control_pattern_prob(m: &[u8], nu: &[f64], psi: &RateMatrix) -> Result<f64> {
    Ok(log_control_pattern_prob(m, nu, psi)?.exp())
}

/// Log joint terms `log(pi_c eta_k f_ck(m))` for every (class, subclass), class-major.
pub(crate) fn case_log_terms(m: &[u8], p: &ModelParams) -> Vec<f64> {
    let j = p.n_dims();
    let k = p.n_subclasses();
    let base = subclass_log_products(m, &p.psi);
    let mut terms = Vec::with_capacity(p.n_classes() * k);
    for c in 0..p.n_classes() {
        let lp = p.pi[c].ln();
        for s in 0..k {
            let mut t = lp + p.eta[s].ln() + base[s];
            if c < j {
                t += log_bernoulli(p.theta.get(c, s), m[c]) - log_bernoulli(p.psi.get(c, s), m[c]);
            }
            terms.push(t);
        }
    }
    terms
}

fn check_other_flag(params: &ModelParams, include_other: bool) -> Result<()> {
    let expected = params.n_dims() + usize::from(include_other);
    if params.pi.len() != expected {
        return Err(Error::Dimension {
            what: "pi length for the other-cause setting",
            expected,
            actual: params.pi.len(),
        });
    }
    Ok(())
}

/// Log of the case pattern probability `P1(m)`.
pub fn log_case_pattern_prob(m: &[u8], params: &ModelParams, include_other: bool) -> Result<f64> {
    check_pattern(m, params.n_dims())?;
    check_other_flag(params, include_other)?;
    Ok(log_sum_exp(&case_log_terms(m, params)))
}

/// Case pattern probability: a mixture over classes of subclass mixtures,
/// where class `c` swaps in the TPR on dimension `c`. With `include_other`
/// the extra class uses FPRs on every dimension.
pub fn case_pattern_prob(m: &[u8], params: &ModelParams, include_other: bool) -> Result<f64> {
    Ok(log_case_pattern_prob(m, params, include_other)?.exp())
}

pub fn log_pattern_prob(m: &[u8], params: &ModelParams, population: Population) -> Result<f64> {
    match population {
        Population::Case => log_case_pattern_prob(m, params, params.has_other_cause()),
        Population::Control => log_control_pattern_prob(m, &params.nu, &params.psi),
    }
}

/// Sum of control and case log pattern probabilities over all subjects.
pub fn joint_log_likelihood(dataset: &Dataset, params: &ModelParams) -> Result<f64> {
    if dataset.n_dims() != params.n_dims() {
        return Err(Error::Dimension {
            what: "dataset vs params J",
            expected: params.n_dims(),
            actual: dataset.n_dims(),
        });
    }
    check_other_flag(params, dataset.include_other_cause())?;
    let mut total = 0.0;
    for row in dataset.controls().rows() {
        total += log_control_pattern_prob(row, &params.nu, &params.psi)?;
    }
    for row in dataset.cases().rows() {
        total += log_sum_exp(&case_log_terms(row, params));
    }
    Ok(total)
}

/// Posterior class probabilities of a case with pattern `m` at fixed parameters.
pub fn class_posterior(m: &[u8], params: &ModelParams) -> Result<Vec<f64>> {
    check_pattern(m, params.n_dims())?;
    let k = params.n_subclasses();
    let terms = case_log_terms(m, params);
    let per_class: Vec<f64> = terms.chunks(k).map(log_sum_exp).collect();
    crate::math::normalize_log_weights(&per_class)
        .ok_or_else(|| Error::numeric("class_posterior", "all class weights are zero"))
}

// ---------------------------------------------------------------------------
// Marginals and pairwise association

/// Marginal positive rate of dimension `j` (0-based) in a population.
pub fn marginal_rate(j: usize, params: &ModelParams, population: Population) -> Result<f64> {
    if j >= params.n_dims() {
        return Err(Error::Argument(format!(
            "dimension {j} out of range for J = {}",
            params.n_dims()
        )));
    }
    let fp_nu: f64 = (0..params.n_subclasses())
        .map(|k| params.psi.get(j, k) * params.nu[k])
        .sum();
    Ok(match population {
        Population::Control => fp_nu,
        Population::Case => {
            let tp: f64 = (0..params.n_subclasses())
                .map(|k| params.theta.get(j, k) * params.eta[k])
                .sum();
            let fp: f64 = (0..params.n_subclasses())
                .map(|k| params.psi.get(j, k) * params.eta[k])
                .sum();
            params.pi[j] * tp + (1.0 - params.pi[j]) * fp
        }
    })
}

/// Joint probabilities of `(M_j, M_l)` as `[[p00, p01], [p10, p11]]`.
pub fn pairwise_cells(
    j: usize,
    l: usize,
    params: &ModelParams,
    population: Population,
) -> Result<[[f64; 2]; 2]> {
    let jd = params.n_dims();
    if j >= jd || l >= jd || j == l {
        return Err(Error::Argument(format!(
            "need two distinct dimensions below {jd}, got ({j}, {l})"
        )));
    }
    let k = params.n_subclasses();
    let rate = |dim: usize, class: Option<usize>, s: usize| -> f64 {
        if class == Some(dim) {
            params.theta.get(dim, s)
        } else {
            params.psi.get(dim, s)
        }
    };
    let bern = |p: f64, v: usize| if v == 1 { p } else { 1.0 - p };
    let mut cells = [[0.0; 2]; 2];
    for (a, row) in cells.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            *cell = match population {
                Population::Control => (0..k)
                    .map(|s| {
                        params.nu[s] * bern(params.psi.get(j, s), a) * bern(params.psi.get(l, s), b)
                    })
                    .sum(),
                Population::Case => (0..params.n_classes())
                    .map(|c| {
                        let class = (c < jd).then_some(c);
                        params.pi[c]
                            * (0..k)
                                .map(|s| {
                                    params.eta[s]
                                        * bern(rate(j, class, s), a)
                                        * bern(rate(l, class, s), b)
                                })
                                .sum::<f64>()
                    })
                    .sum(),
            };
        }
    }
    Ok(cells)
}

/// Marginal pairwise log odds ratio between dimensions `j` and `l`.
///
/// Returns [`Error::InfiniteLogOdds`] when a cell has probability zero.
pub fn pairwise_log_or(
    j: usize,
    l: usize,
    params: &ModelParams,
    population: Population,
) -> Result<f64> {
    let c = pairwise_cells(j, l, params, population)?;
    for (a, row) in c.iter().enumerate() {
        for (b, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                return Err(Error::InfiniteLogOdds {
                    j,
                    l,
                    a: a as u8,
                    b: b as u8,
                });
            }
        }
    }
    Ok(c[1][1].ln() + c[0][0].ln() - c[1][0].ln() - c[0][1].ln())
}

// ---------------------------------------------------------------------------
// Pattern enumeration

/// Capability check for enumerating all `2^J` patterns.
pub fn check_enumerable(n_dims: usize) -> Result<()> {
    if n_dims > MAX_ENUMERATION_DIMS {
        return Err(Error::Capability {
            requested: n_dims,
            max: MAX_ENUMERATION_DIMS,
        });
    }
    Ok(())
}

/// Pattern whose dimension `j` is bit `j` of `index`.
pub fn pattern_from_index(index: usize, n_dims: usize) -> Vec<u8> {
    (0..n_dims).map(|j| ((index >> j) & 1) as u8).collect()
}

pub fn pattern_index(m: &[u8]) -> usize {
    m.iter()
        .enumerate()
        .fold(0, |acc, (j, &v)| acc | ((v as usize) << j))
}

/// Patterns rendered as `0`/`1` strings in dimension order, e.g. `10110`.
pub fn format_pattern(m: &[u8]) -> String {
    m.iter().map(|&v| if v == 1 { '1' } else { '0' }).collect()
}

pub fn parse_pattern(s: &str) -> Result<Vec<u8>> {
    s.trim()
        .chars()
        .map(|c| match c {
            '0' => Ok(0),
            '1' => Ok(1),
            other => Err(Error::Format(format!("pattern character {other:?} is not 0/1"))),
        })
        .collect()
}

pub fn enumerate_patterns(n_dims: usize) -> Result<impl Iterator<Item = Vec<u8>>> {
    check_enumerable(n_dims)?;
    Ok((0..1usize << n_dims).map(move |i| pattern_from_index(i, n_dims)))
}

/// Probability of every pattern, indexed by [`pattern_index`].
pub fn pattern_distribution(params: &ModelParams, population: Population) -> Result<Vec<f64>> {
    enumerate_patterns(params.n_dims())?
        .map(|m| log_pattern_prob(&m, params, population).map(f64::exp))
        .collect()
}
