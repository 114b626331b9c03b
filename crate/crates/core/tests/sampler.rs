//! Conditional updates, sampler invariants and the joint-distribution test.

use approx::assert_abs_diff_eq;
use nplcm::gibbs::{
    self, alpha_posterior, draw_from_prior, fpr_posterior, initialize, pi_posterior, stick_posterior,
    subclass_counts, sweep, tpr_posterior, ChainState, SamplerConfig, Streams,
};
use nplcm::math::{log_bernoulli, sample_log_categorical};
use nplcm::model::{BetaPrior, GammaPrior};
use nplcm::rng::step;
use nplcm::simulation::{generate, ScenarioSpec};
use nplcm::{BinaryMatrix, Dataset, HyperPriors, LatentState};
use rand_distr::{Beta, Distribution, Gamma};

mod common;

fn rows(n: usize, row: &[u8]) -> Vec<Vec<u8>> {
    vec![row.to_vec(); n]
}

fn dataset(cases: Vec<Vec<u8>>, controls: Vec<Vec<u8>>, other: bool) -> Dataset {
    let j = cases[0].len();
    Dataset::new(
        BinaryMatrix::from_rows(&cases).unwrap(),
        BinaryMatrix::from_rows(&controls).unwrap(),
        Dataset::default_names(j),
        other,
    )
    .unwrap()
}

#[test]
fn stick_counts_follow_formula() {
    assert_eq!(
        stick_posterior(&subclass_counts(&[0, 0, 1, 0], 3), 1.0),
        vec![BetaPrior { a: 4.0, b: 2.0 }, BetaPrior { a: 2.0, b: 1.0 }]
    );
    // no subjects: prior sticks Beta(1, alpha)
    assert_eq!(stick_posterior(&[0, 0], 0.3), vec![BetaPrior { a: 1.0, b: 0.3 }]);
    assert_eq!(
        alpha_posterior(&[], GammaPrior::default()),
        GammaPrior { shape: 0.25, rate: 0.25 }
    );
}

#[test]
fn tpr_counts_partition_by_subclass() {
    // cases 0..5 in class 0 subclass 0 (all positive on dim 0); cases 5..8 in
    // class 0 subclass 1 with one positive; case 8 in class 1
    let mut cases = rows(5, &[1, 0]);
    cases.extend([vec![1, 1], vec![0, 1], vec![0, 0], vec![1, 1]]);
    let d = dataset(cases, rows(2, &[0, 0]), false);
    let latent = LatentState {
        case_class: vec![0, 0, 0, 0, 0, 0, 0, 0, 1],
        case_subclass: vec![0, 0, 0, 0, 0, 1, 1, 1, 0],
        control_subclass: vec![0, 1],
    };
    let hyper = HyperPriors::default_for(2, 2, false);
    let g = tpr_posterior(&latent, &d, &hyper);
    assert_eq!(g.get(0, 0), BetaPrior { a: 6.0, b: 1.0 });
    assert_eq!(g.get(0, 1), BetaPrior { a: 2.0, b: 3.0 });
    assert_eq!(g.get(1, 0), BetaPrior { a: 2.0, b: 1.0 });
    // nobody in class 1 subclass 1: prior
    assert_eq!(g.get(1, 1), BetaPrior::UNIFORM);
}

#[test]
fn fpr_counts_with_and_without_cut() {
    let mut controls = rows(10, &[1, 0]);
    controls.extend(rows(30, &[0, 0]));
    let cases = vec![vec![1, 1], vec![1, 0], vec![0, 1]];
    let d = dataset(cases, controls, false);
    let latent = LatentState {
        // two cases of class 1 are positive on dim 0: false positives for dim 0
        case_class: vec![1, 1, 0],
        case_subclass: vec![0, 0, 0],
        control_subclass: vec![0; 40],
    };
    let hyper = HyperPriors::default_for(2, 2, false);
    let cut = fpr_posterior(&latent, &d, &hyper, true);
    assert_eq!(cut.get(0, 0), BetaPrior { a: 11.0, b: 31.0 });
    assert_eq!(cut.get(0, 1), BetaPrior::UNIFORM);
    let pooled = fpr_posterior(&latent, &d, &hyper, false);
    assert_eq!(pooled.get(0, 0), BetaPrior { a: 13.0, b: 31.0 });
    // dim 1: 40 control negatives; case 2 (class 0) contributes its positive
    assert_eq!(pooled.get(1, 0), BetaPrior { a: 2.0, b: 41.0 });
}

#[test]
fn other_cause_cases_count_as_false_positives_everywhere() {
    let d = dataset(vec![vec![1, 1], vec![1, 0]], rows(1, &[0, 0]), true);
    let latent = LatentState {
        case_class: vec![2, 2],
        case_subclass: vec![0, 0],
        control_subclass: vec![0],
    };
    let hyper = HyperPriors::default_for(2, 1, true);
    let f = fpr_posterior(&latent, &d, &hyper, false);
    assert_eq!(f.get(0, 0), BetaPrior { a: 3.0, b: 2.0 });
    assert_eq!(f.get(1, 0), BetaPrior { a: 2.0, b: 3.0 });
    let t = tpr_posterior(&latent, &d, &hyper);
    assert_eq!(t.get(0, 0), BetaPrior::UNIFORM);
    assert_eq!(pi_posterior(&latent, &hyper), vec![1.0, 1.0, 3.0]);
}

#[test]
fn dirichlet_counts() {
    let latent = LatentState {
        case_class: vec![0, 0, 1, 0],
        case_subclass: vec![0; 4],
        control_subclass: vec![0],
    };
    let hyper = HyperPriors::default_for(3, 1, false);
    assert_eq!(pi_posterior(&latent, &hyper), vec![4.0, 2.0, 1.0]);
}

#[test]
fn step_draws_follow_their_conditionals() {
    // TPR step against Beta(6, 1): mean 6/7, over 4000 independent iterations
    let d = dataset(rows(5, &[1, 0]), rows(3, &[0, 0]), false);
    let hyper = HyperPriors::default_for(2, 1, false);
    let mut state = initialize(&d, &hyper, 1, 0);
    state.latent.case_class = vec![0; 5];
    let n = 4000;
    let mut sum = 0.0;
    let mut sum_pi = 0.0;
    for t in 0..n {
        let s = Streams::new(9, 0, t);
        gibbs::step_tpr(&mut state, &hyper, &d, &s).unwrap();
        gibbs::step_pi(&mut state, &hyper, &s).unwrap();
        sum += state.params.theta.get(0, 0);
        sum_pi += state.params.pi[0];
    }
    let (mean, se) = (sum / n as f64, (6.0 / 49.0 / 8.0 / n as f64).sqrt());
    assert!((mean - 6.0 / 7.0).abs() < 4.0 * se, "{mean}");
    // Dirichlet(6, 1): mean 6/7
    assert!((sum_pi / n as f64 - 6.0 / 7.0).abs() < 4.0 * se);
}

#[test]
fn cut_feedback_isolates_fprs_from_case_data() {
    let s = ScenarioSpec::scenario_ii(0.3);
    let a = generate(&s, 60, 80, 1).unwrap();
    let b_cases = generate(&s, 60, 80, 2).unwrap();
    let b = a.with_cases(b_cases.cases().clone()).unwrap();
    assert_ne!(a.cases(), b.cases());
    let hyper = HyperPriors::default_for(5, 4, false);
    let config = SamplerConfig {
        truncation_k: 4,
        n_burn: 50,
        n_keep: 200,
        thin: 5,
        n_chains: 2,
        seed: 4,
        cut_feedback: true,
        include_other_cause: false,
    };
    let pa = gibbs::run(&a, &hyper, &config).unwrap();
    let pb = gibbs::run(&b, &hyper, &config).unwrap();
    for (x, y) in pa.draws().zip(pb.draws()) {
        assert_eq!(x.params.psi, y.params.psi);
        assert_eq!(x.params.nu, y.params.nu);
        assert_eq!(x.params.alpha0, y.params.alpha0);
        assert_eq!(x.control_subclass, y.control_subclass);
    }
    assert_ne!(pa.pi_mean(), pb.pi_mean());
    // without the cut the case data feed back into psi
    let open = SamplerConfig { cut_feedback: false, ..config };
    let qa = gibbs::run(&a, &hyper, &open).unwrap();
    let qb = gibbs::run(&b, &hyper, &open).unwrap();
    assert!(qa.draws().zip(qb.draws()).any(|(x, y)| x.params.psi != y.params.psi));
}

/// Plain locally independent sampler: class indicators, TPRs, FPRs and
/// etiologic fractions, drawing from the same keyed streams.
fn plcm_sweep(state: &mut ChainState, d: &Dataset, hyper: &HyperPriors, streams: &Streams) {
    let j = d.n_dims();
    let p = &mut state.params;
    for (i, m) in d.cases().rows().enumerate() {
        let w: Vec<f64> = (0..j)
            .map(|c| {
                p.pi[c].ln()
                    + (0..j)
                        .map(|l| log_bernoulli(if l == c { p.theta.get(l, 0) } else { p.psi.get(l, 0) }, m[l]))
                        .sum::<f64>()
            })
            .collect();
        state.latent.case_class[i] = sample_log_categorical(&w, &mut streams.rng(step::CASE_CLASS, i as u64)).unwrap();
    }
    let clamp = |x: f64| x.clamp(1e-12, 1.0 - 1e-12);
    for l in 0..j {
        let (mut pos, mut neg) = (0.0, 0.0);
        for (i, m) in d.cases().rows().enumerate() {
            if state.latent.case_class[i] == l {
                if m[l] == 1 { pos += 1.0 } else { neg += 1.0 }
            }
        }
        let prior = hyper.tpr.get(l, 0);
        let beta = Beta::new(prior.a + pos, prior.b + neg).unwrap();
        p.theta.set(l, 0, clamp(beta.sample(&mut streams.rng(step::TPR, l as u64))));
    }
    for l in 0..j {
        let (mut pos, mut neg) = (0.0, 0.0);
        for m in d.controls().rows() {
            if m[l] == 1 { pos += 1.0 } else { neg += 1.0 }
        }
        for (i, m) in d.cases().rows().enumerate() {
            if state.latent.case_class[i] != l {
                if m[l] == 1 { pos += 1.0 } else { neg += 1.0 }
            }
        }
        let prior = hyper.fpr.get(l, 0);
        let beta = Beta::new(prior.a + pos, prior.b + neg).unwrap();
        p.psi.set(l, 0, clamp(beta.sample(&mut streams.rng(step::FPR, l as u64))));
    }
    let mut counts = hyper.dirichlet.clone();
    for &c in &state.latent.case_class {
        counts[c] += 1.0;
    }
    let mut rng = streams.rng(step::PI, 0);
    let g: Vec<f64> = counts
        .iter()
        .map(|&a| Gamma::new(a, 1.0).unwrap().sample(&mut rng).max(f64::MIN_POSITIVE))
        .collect();
    let total: f64 = g.iter().sum();
    p.pi = g.into_iter().map(|x| x / total).collect();
}

#[test]
fn single_subclass_matches_direct_plcm_sampler() {
    let d = generate(&ScenarioSpec::scenario_i(0.5), 80, 80, 12).unwrap();
    let hyper = HyperPriors::default_for(5, 1, false).with_tpr_prior(BetaPrior { a: 6.0, b: 1.3 });
    let mut nested = initialize(&d, &hyper, 21, 0);
    let mut direct = nested.clone();
    for t in 1..=300 {
        let s = Streams::new(21, 0, t);
        sweep(&mut nested, &d, &hyper, false, &s).unwrap();
        plcm_sweep(&mut direct, &d, &hyper, &s);
        assert_eq!(nested.params.pi, direct.params.pi, "iteration {t}");
        assert_eq!(nested.params.theta, direct.params.theta);
        assert_eq!(nested.params.psi, direct.params.psi);
        assert_eq!(nested.latent.case_class, direct.latent.case_class);
        assert_eq!(nested.params.eta, vec![1.0]);
    }
}

#[test]
fn runs_are_seed_reproducible() {
    let d = generate(&ScenarioSpec::scenario_ii(0.0), 30, 30, 3).unwrap();
    let hyper = HyperPriors::default_for(5, 3, false);
    let config = SamplerConfig {
        truncation_k: 3,
        n_burn: 20,
        n_keep: 60,
        thin: 3,
        n_chains: 2,
        seed: 77,
        ..SamplerConfig::default()
    };
    let a = gibbs::run(&d, &hyper, &config).unwrap();
    assert_eq!(a, gibbs::run(&d, &hyper, &config).unwrap());
    let b = gibbs::run(&d, &hyper, &SamplerConfig { seed: 78, ..config }).unwrap();
    assert_ne!(a, b);
    for draw in a.draws() {
        for w in [&draw.params.pi, &draw.params.eta, &draw.params.nu] {
            assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(w.iter().all(|&x| x >= 0.0));
        }
        for v in draw.params.theta.values().iter().chain(draw.params.psi.values()) {
            assert!(*v > 0.0 && *v < 1.0);
        }
    }
}

#[test]
fn joint_distribution_test() {
    let z = common::joint_distribution_z(20_000);
    for (name, v) in &z {
        println!("{name:>20}: z = {v:.2}");
    }
    let worst = z.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    assert!(worst < 4.0, "largest |z| = {worst}");
}

#[test]
fn prior_draws_are_valid_states() {
    let hyper = HyperPriors::default_for(4, 3, true);
    let s = draw_from_prior(&hyper, 5, 7, &Streams::new(0, 0, 0)).unwrap();
    s.params.validate().unwrap();
    s.latent.validate(5, 3).unwrap();
    assert_eq!(s.eta_sticks.len(), 2);
    assert_abs_diff_eq!(s.params.pi.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
}
