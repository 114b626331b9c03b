//! Normalization and closed-form identities of the pattern probabilities.

use approx::assert_abs_diff_eq;
use nplcm::model::{
    case_pattern_prob, class_posterior, control_pattern_prob, enumerate_patterns, marginal_rate,
    pairwise_log_or, pattern_distribution, pattern_from_index,
};
use nplcm::Population;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod common;
use common::{brute_force_prob, enumerated_lor, random_params};

#[test]
fn hundred_random_parameter_sets_normalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let k = 1 + trial % 3;
        let other = trial % 2 == 1;
        let p = random_params(&mut rng, 5, k, other);
        let total0: f64 = enumerate_patterns(5)
            .unwrap()
            .map(|m| control_pattern_prob(&m, &p.nu, &p.psi).unwrap())
            .sum();
        let total1: f64 = enumerate_patterns(5)
            .unwrap()
            .map(|m| case_pattern_prob(&m, &p, other).unwrap())
            .sum();
        assert!((total0 - 1.0).abs() < 1e-12, "trial {trial}: controls sum to {total0}");
        assert!((total1 - 1.0).abs() < 1e-12, "trial {trial}: cases sum to {total1}");
    }
}

#[test]
fn pattern_probabilities_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..30 {
        let p = random_params(&mut rng, 4, 1 + trial % 3, trial % 2 == 0);
        for pop in Population::BOTH {
            let dist = pattern_distribution(&p, pop).unwrap();
            for (idx, &q) in dist.iter().enumerate() {
                let m = pattern_from_index(idx, 4);
                assert_abs_diff_eq!(q, brute_force_prob(&m, &p, pop), epsilon = 1e-14);
            }
        }
    }
}

#[test]
fn closed_form_lor_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for trial in 0..100 {
        let p = random_params(&mut rng, 5, 1 + trial % 3, trial % 2 == 1);
        for pop in Population::BOTH {
            for j in 0..5 {
                for l in j + 1..5 {
                    let closed = pairwise_log_or(j, l, &p, pop).unwrap();
                    let enumerated = enumerated_lor(&p, pop, j, l);
                    assert!(
                        (closed - enumerated).abs() < 1e-10,
                        "trial {trial} {pop:?} ({j},{l}): {closed} vs {enumerated}"
                    );
                }
            }
        }
    }
}

#[test]
fn marginal_rates_match_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for trial in 0..30 {
        let p = random_params(&mut rng, 5, 1 + trial % 3, trial % 3 == 0);
        for pop in Population::BOTH {
            let dist = pattern_distribution(&p, pop).unwrap();
            for j in 0..5 {
                let enumerated: f64 = dist
                    .iter()
                    .enumerate()
                    .filter(|(idx, _)| (idx >> j) & 1 == 1)
                    .map(|(_, q)| q)
                    .sum();
                assert_abs_diff_eq!(marginal_rate(j, &p, pop).unwrap(), enumerated, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn class_posterior_is_bayes_rule() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let p = random_params(&mut rng, 4, 2, true);
    let m = [1, 0, 1, 1];
    let post = class_posterior(&m, &p).unwrap();
    let total = brute_force_prob(&m, &p, Population::Case);
    for c in 0..p.n_classes() {
        let mut only = p.clone();
        only.pi = (0..p.n_classes()).map(|i| if i == c { 1.0 } else { 0.0 }).collect();
        let joint = p.pi[c] * brute_force_prob(&m, &only, Population::Case);
        assert_abs_diff_eq!(post[c], joint / total, epsilon = 1e-12);
    }
    assert_abs_diff_eq!(post.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn distributions_are_normalized(seed in any::<u64>(), k in 1usize..4, j in 2usize..7, other in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = random_params(&mut rng, j, k, other);
        for pop in Population::BOTH {
            let total: f64 = pattern_distribution(&p, pop).unwrap().iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn noninterference_cases_match_controls_off_class(seed in any::<u64>(), k in 1usize..4) {
        // with eta = nu, class-j cases look like controls on every other dimension
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = random_params(&mut rng, 4, k, false);
        p.eta = p.nu.clone();
        p.pi = vec![1.0, 0.0, 0.0, 0.0];
        for l in 1..4 {
            prop_assert!((marginal_rate(l, &p, Population::Case).unwrap()
                - marginal_rate(l, &p, Population::Control).unwrap()).abs() < 1e-12);
        }
    }
}
