//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use nplcm::diagnostics::ess;
use nplcm::gibbs::{draw_from_prior, sweep, ChainState, Streams};
use nplcm::model::{BetaPrior, GammaPrior};
use nplcm::simulation::redraw_measurements;
use nplcm::{BinaryMatrix, Dataset, HyperPriors, ModelParams, Population, RateMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
    let t: f64 = w.iter().sum();
    w.into_iter().map(|x| x / t).collect()
}

pub fn random_params(rng: &mut ChaCha8Rng, j: usize, k: usize, other: bool) -> ModelParams {
    let rates = |rng: &mut ChaCha8Rng| {
        RateMatrix::new(j, k, (0..j * k).map(|_| rng.random_range(0.01..0.99)).collect()).unwrap()
    };
    let theta = rates(rng);
    let psi = rates(rng);
    ModelParams::new(
        simplex(rng, j + usize::from(other)),
        theta,
        psi,
        simplex(rng, k),
        simplex(rng, k),
        1.0,
        1.0,
    )
    .unwrap()
}

/// Independent pattern probability: sum over latent class and subclass of
/// a product of Bernoulli terms.
pub fn brute_force_prob(m: &[u8], p: &ModelParams, pop: Population) -> f64 {
    let (j, k) = (p.n_dims(), p.n_subclasses());
    let bern = |r: f64, v: u8| if v == 1 { r } else { 1.0 - r };
    let row = |class: Option<usize>, s: usize| -> f64 {
        (0..j)
            .map(|d| bern(if class == Some(d) { p.theta.get(d, s) } else { p.psi.get(d, s) }, m[d]))
            .product()
    };
    match pop {
        Population::Control => (0..k).map(|s| p.nu[s] * row(None, s)).sum(),
        Population::Case => (0..p.n_classes())
            .map(|c| {
                let class = (c < j).then_some(c);
                p.pi[c] * (0..k).map(|s| p.eta[s] * row(class, s)).sum::<f64>()
            })
            .sum(),
    }
}

/// Log odds ratio of dimensions `(j, l)` from 2x2 cells summed over every
/// brute-force pattern probability.
pub fn enumerated_lor(p: &ModelParams, pop: Population, j: usize, l: usize) -> f64 {
    let mut cells = [[0.0; 2]; 2];
    for idx in 0..1usize << p.n_dims() {
        let m: Vec<u8> = (0..p.n_dims()).map(|d| ((idx >> d) & 1) as u8).collect();
        cells[m[j] as usize][m[l] as usize] += brute_force_prob(&m, p, pop);
    }
    (cells[1][1] * cells[0][0] / (cells[1][0] * cells[0][1])).ln()
}

type TestFn = (&'static str, fn(&ChainState) -> f64);

const TEST_FUNCTIONS: [TestFn; 10] = [
    ("pi[0]", |s| s.params.pi[0]),
    ("pi[2]", |s| s.params.pi[2]),
    ("theta[0,0]", |s| s.params.theta.get(0, 0)),
    ("theta[2,1]", |s| s.params.theta.get(2, 1)),
    ("psi[1,0]", |s| s.params.psi.get(1, 0)),
    ("psi[0,1]", |s| s.params.psi.get(0, 1)),
    ("eta[0]", |s| s.params.eta[0]),
    ("nu[0]", |s| s.params.nu[0]),
    ("log alpha0", |s| s.params.alpha0.ln()),
    ("pi[1] * theta[1,0]", |s| s.params.pi[1] * s.params.theta.get(1, 0)),
];

/// Joint-distribution test at three dimensions, two subclasses and six
/// subjects per group. Compares independent draws from the joint with the
/// successive-conditional chain that alternates sweeps and data redraws and
/// returns one z-score per test function.
pub fn joint_distribution_z(iterations: u64) -> Vec<(&'static str, f64)> {
    let (j, k, n) = (3, 2, 6);
    let mut hyper = HyperPriors::default_for(j, k, false).with_tpr_prior(BetaPrior { a: 3.0, b: 1.5 });
    hyper.alpha0 = GammaPrior { shape: 2.0, rate: 1.0 };
    hyper.alpha1 = GammaPrior { shape: 2.0, rate: 1.0 };
    let zeros = vec![vec![0u8; j]; n];
    let template = Dataset::new(
        BinaryMatrix::from_rows(&zeros).unwrap(),
        BinaryMatrix::from_rows(&zeros).unwrap(),
        Dataset::default_names(j),
        false,
    )
    .unwrap();
    let mut data_rng = ChaCha8Rng::seed_from_u64(1234);

    let mut forward: Vec<Vec<f64>> = vec![Vec::new(); TEST_FUNCTIONS.len()];
    for t in 0..iterations {
        let state = draw_from_prior(&hyper, n, n, &Streams::new(1, 0, t)).unwrap();
        for (f, out) in TEST_FUNCTIONS.iter().zip(&mut forward) {
            out.push((f.1)(&state));
        }
    }

    let mut state = draw_from_prior(&hyper, n, n, &Streams::new(2, 0, 0)).unwrap();
    let mut data = redraw_measurements(&state.params, &state.latent, &template, &mut data_rng).unwrap();
    let mut backward: Vec<Vec<f64>> = vec![Vec::new(); TEST_FUNCTIONS.len()];
    for t in 0..iterations {
        sweep(&mut state, &data, &hyper, false, &Streams::new(3, 0, t)).unwrap();
        data = redraw_measurements(&state.params, &state.latent, &template, &mut data_rng).unwrap();
        for (f, out) in TEST_FUNCTIONS.iter().zip(&mut backward) {
            out.push((f.1)(&state));
        }
    }

    let moments = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        let v = x.iter().map(|y| (y - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        (m, v)
    };
    TEST_FUNCTIONS
        .iter()
        .zip(&forward)
        .zip(&backward)
        .map(|((f, fw), bw)| {
            let (m1, v1) = moments(fw);
            let (m2, v2) = moments(bw);
            (f.0, (m1 - m2) / (v1 / fw.len() as f64 + v2 / ess(bw).unwrap()).sqrt())
        })
        .collect()
}
