mod common;

use common::*;
use povm_label::labeling::{min_error_binary, ProbeState, Tolerances};
use povm_label::oracle::{oracle_min_error_binary, sample_probes, ProbeCandidateSet};
use povm_label::povm::Permutation;
use povm_label::simulate::{simulate_labeling, ACCEPT_SIGMAS};
use proptest::prelude::*;

fn analytic(obs: &povm_label::povm::Observable) -> f64 {
    min_error_binary(obs, &Tolerances::default()).unwrap().p_error.unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvector_augmented_oracle_is_exact(seed in any::<u64>(), d in 2usize..5) {
        let obs = random_binary(d, &mut rng(seed));
        let set = ProbeCandidateSet::eigenvector_augmented(obs.effect(0), obs.effect(1), 0, seed).unwrap();
        let oracle = oracle_min_error_binary(obs.effect(0), obs.effect(1), &set).unwrap();
        prop_assert!((oracle - analytic(&obs)).abs() <= 1e-12);
    }

    #[test]
    fn every_probe_is_bounded_by_the_optimum(seed in any::<u64>(), d in 2usize..5) {
        let obs = random_binary(d, &mut rng(seed));
        let set = sample_probes(d, 50, seed);
        let oracle = oracle_min_error_binary(obs.effect(0), obs.effect(1), &set).unwrap();
        prop_assert!(oracle >= analytic(&obs) - 1e-12);
    }
}

#[test]
fn random_qubit_search_converges() {
    let mut r = rng(11);
    let mut within = 0;
    for seed in 0..100 {
        let obs = random_binary(2, &mut r);
        let oracle = oracle_min_error_binary(obs.effect(0), obs.effect(1), &sample_probes(2, 2000, seed)).unwrap();
        let gap = oracle - analytic(&obs);
        assert!(gap >= -1e-12, "random probe beat the optimum by {gap}");
        if gap <= 5e-3 {
            within += 1;
        }
    }
    assert!(within >= 99, "{within}/100 searches within 5e-3");
}

#[test]
fn optimal_strategy_simulation_converges() {
    let mut r = rng(12);
    let mut within = 0;
    let runs = 200;
    for seed in 0..runs {
        let obs = random_binary(2 + (seed as usize) % 3, &mut r);
        let rep = min_error_binary(&obs, &Tolerances::default()).unwrap();
        let (probe, rule) = (rep.probe.clone().unwrap(), rep.decision_rule.clone().unwrap());
        // error rate is the same under either hidden labeling, so one suffices
        let hidden = if seed % 2 == 0 { Permutation::identity(2) } else { Permutation::swap(2) };
        let sim = simulate_labeling(&obs, &hidden, &probe, &rule, 20_000, seed, 1e-9).unwrap();
        let se = sim.std_error.max(1.0 / 20_000f64);
        if (sim.empirical_error_rate - rep.p_error.unwrap()).abs() <= ACCEPT_SIGMAS * se {
            within += 1;
        }
    }
    assert!(within * 100 >= runs * 99, "{within}/{runs} runs within 4 standard errors");
}

#[test]
fn simulation_is_bit_reproducible() {
    let obs = trine();
    let probe = ProbeState::Pure(random_unit_vector(2, &mut rng(13)));
    let rule = povm_label::labeling::DecisionRule::Exclude(vec![0]);
    let sigma = Permutation::from_one_based(&[3, 1, 2]).unwrap();
    let a = simulate_labeling(&obs, &sigma, &probe, &rule, 50_000, 99, 1e-9).unwrap();
    let b = simulate_labeling(&obs, &sigma, &probe, &rule, 50_000, 99, 1e-9).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.empirical_error_rate.to_bits(), b.empirical_error_rate.to_bits());
}
