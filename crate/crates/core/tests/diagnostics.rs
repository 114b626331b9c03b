use nplcm::diagnostics::{autocorr, ess, psrf, report, ChainSummary};
use nplcm::gibbs::{self, SamplerConfig};
use nplcm::simulation::{generate, ScenarioSpec};
use nplcm::HyperPriors;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn normals(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64) -> Vec<f64> {
    let mut x = 0.0;
    (0..n)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            x = phi * x + e;
            x
        })
        .collect()
}

#[test]
fn iid_chains_have_psrf_near_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..50 {
        let chains: Vec<Vec<f64>> = (0..3).map(|_| normals(&mut rng, 1000)).collect();
        let r = psrf(&chains).unwrap();
        assert!((1.0..=1.05).contains(&r), "{r}");
    }
}

#[test]
fn ar1_lag_one_and_ess() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let x = ar1(&mut rng, 50_000, 0.9);
    let r = autocorr(&x, 5).unwrap();
    assert!((r[1] - 0.9).abs() < 0.02, "{}", r[1]);
    // integrated autocorrelation time of AR(1) is (1 + phi) / (1 - phi) = 19
    let e = ess(&x).unwrap();
    assert!((e - 50_000.0 / 19.0).abs() < 0.2 * 50_000.0 / 19.0, "{e}");
    let iid = normals(&mut rng, 5000);
    assert!(autocorr(&iid, 1).unwrap()[1].abs() < 0.05);
    assert!(ess(&iid).unwrap() > 4000.0);
}

#[test]
fn summary_of_constant_functional() {
    let s = ChainSummary::from_chains("k", &[vec![1.0; 20], vec![1.0; 20]]).unwrap();
    assert_eq!(s.psrf, None);
    assert_eq!(s.ess, None);
    assert_eq!(s.quantiles, [1.0; 5]);
}

#[test]
fn report_covers_default_functionals() {
    let d = generate(&ScenarioSpec::scenario_i(0.5), 60, 60, 2).unwrap();
    let hyper = HyperPriors::default_for(5, 3, false);
    let config = SamplerConfig {
        n_burn: 100,
        n_keep: 300,
        thin: 3,
        ..SamplerConfig::desk(3, 5)
    };
    let post = gibbs::run(&d, &hyper, &config).unwrap();
    let r = report(&post).unwrap();
    let names: Vec<&str> = r.parameters.iter().map(|s| s.name.as_str()).collect();
    assert_eq!(
        names,
        ["pi[A]", "pi[B]", "pi[C]", "pi[D]", "pi[E]", "alpha0", "alpha1", "max_eta", "max_nu"]
    );
    for s in &r.parameters {
        assert!(s.quantiles.windows(2).all(|w| w[0] <= w[1]));
        if let Some(e) = s.ess {
            assert!(e <= (r.n_chains * r.draws_per_chain) as f64);
        }
    }
    let back: nplcm::diagnostics::DiagnosticsReport = serde_json::from_str(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ess_never_exceeds_draw_count(seed in any::<u64>(), phi in -0.9f64..0.95, n in 20usize..400) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = ar1(&mut rng, n, phi);
        let e = ess(&x).unwrap();
        prop_assert!(e > 0.0 && e <= n as f64);
    }

    #[test]
    fn psrf_affine_invariance(seed in any::<u64>(), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let chains: Vec<Vec<f64>> = (0..3).map(|_| normals(&mut rng, 40)).collect();
        let moved: Vec<Vec<f64>> = chains.iter().map(|c| c.iter().map(|x| scale * x + shift).collect()).collect();
        prop_assert!((psrf(&chains).unwrap() - psrf(&moved).unwrap()).abs() < 1e-9);
    }
}
