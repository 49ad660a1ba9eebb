mod common;

use num_traits::One;
use proptest::prelude::*;
use rand::Rng;

use incentix::rational::{int, ratio};
use incentix::{
    best_response, decide, in_polytope, kappa_of_action, kappa_of_set, kkt_verify, partials, scenarios, synthesize,
    EffortProfile, Error,
};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn certificates_verify_exactly(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let m = rng.gen_range(1..=6);
        let n = rng.gen_range(1..=4);
        let g = common::graph(&mut rng, m, n, 0.5, int(1));
        let set = common::subset(&mut rng, m);
        let cert = kappa_of_set(&g, &set).unwrap();
        prop_assert!(cert.verify(&g));
        prop_assert!(cert.kappa <= int(1));
        for j in 0..m {
            let single = kappa_of_action(&g, j).unwrap();
            prop_assert!(single.verify(&g));
            prop_assert_eq!(kappa_of_set(&g, &[j]).unwrap().kappa, single.kappa);
        }
    }

    #[test]
    fn synthesized_mechanisms_are_sound(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let m = rng.gen_range(2..=5);
        let n = rng.gen_range(1..=4);
        let g = common::graph(&mut rng, m, n, 0.6, int(1));
        let set = common::subset(&mut rng, m);
        let x = EffortProfile::from_rationals(common::profile_on(&mut rng, m, &set, g.budget())).unwrap();
        let decision = decide(&g, &x).unwrap();
        match synthesize(&g, &x) {
            Ok(r) => {
                prop_assert!(decision.incentivizable);
                prop_assert!(r.lp_value.is_one());
                prop_assert!(r.kkt.verdict);
                prop_assert!(in_polytope(&g, &r.beta, &x).unwrap());
                prop_assert!(r.beta.weights().iter().cloned().fold(0.0, f64::max) == 1.0);
            }
            Err(Error::NotIncentivizable(cert)) => {
                prop_assert!(!decision.incentivizable);
                prop_assert!(cert.kappa < int(1));
            }
            Err(e) => prop_assert!(false, "unexpected error {}", e),
        }
    }

    #[test]
    fn obstructed_supports_are_never_reached(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let m = rng.gen_range(2..=4);
        let n = rng.gen_range(1..=3);
        let g = common::graph(&mut rng, m, n, 0.6, int(1));
        let set = common::subset(&mut rng, m);
        if kappa_of_set(&g, &set).unwrap().kappa < int(1) {
            for _ in 0..5 {
                let beta = common::mechanism(&mut rng, n);
                let x = best_response(&g, &beta).unwrap();
                if partials(&g, &beta, &x).unwrap().iter().all(|d| *d == 0.0) {
                    continue;
                }
                let support = x.support();
                prop_assert!(!set.iter().all(|j| support.contains(j)));
            }
        }
    }

    #[test]
    fn kkt_verdict_ignores_mechanism_scale(seed in any::<u64>(), c in 0.01f64..100.0) {
        let mut rng = common::rng(seed);
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=3);
        let g = common::graph(&mut rng, m, n, 0.6, int(1));
        let beta = common::mechanism(&mut rng, n);
        let x = best_response(&g, &beta).unwrap();
        let a = kkt_verify(&g, &beta, &x).unwrap();
        let b = kkt_verify(&g, &beta.scaled(c).unwrap(), &x).unwrap();
        prop_assert!(a.verdict);
        prop_assert_eq!(a.verdict, b.verdict);
    }

    #[test]
    fn best_responses_spend_the_budget(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let m = rng.gen_range(1..=5);
        let n = rng.gen_range(1..=4);
        let budget = common::positive_rational(&mut rng, 4, 5);
        let g = common::graph(&mut rng, m, n, 0.5, budget);
        let beta = common::mechanism(&mut rng, n);
        let x = best_response(&g, &beta).unwrap();
        prop_assert!((x.total() - g.budget_f64()).abs() <= 1e-9 * g.budget_f64());
        prop_assert!(x.values().iter().all(|v| *v >= 0.0));
    }
}

#[test]
fn classroom_mechanism_rewards_both_scores() {
    let g = scenarios::classroom();
    let x = EffortProfile::from_rationals(vec![int(0), int(1), int(0)]).unwrap();
    let r = synthesize(&g, &x).unwrap();
    assert_eq!(r.beta.weights(), &[1.0, 1.0]);
    let response = best_response(&g, &r.beta).unwrap();
    assert!((response.values()[1] - 1.0).abs() < 1e-9);
}

#[test]
fn weak_classroom_has_two_thirds() {
    let g = scenarios::classroom_weak();
    let cert = kappa_of_action(&g, 1).unwrap();
    assert_eq!(cert.kappa, ratio(2, 3));
    let x = EffortProfile::from_rationals(vec![int(0), int(1), int(0)]).unwrap();
    assert!(matches!(synthesize(&g, &x), Err(Error::NotIncentivizable(_))));
}

#[test]
fn profiles_must_spend_the_budget() {
    let g = scenarios::classroom();
    let x = EffortProfile::from_rationals(vec![int(0), ratio(1, 2), int(0)]).unwrap();
    assert!(matches!(decide(&g, &x), Err(Error::BudgetViolation { .. })));
}

#[test]
fn empty_sets_are_rejected() {
    assert!(matches!(kappa_of_set(&scenarios::classroom(), &[]), Err(Error::EmptySet(_))));
}
