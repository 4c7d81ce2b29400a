mod common;

use indinv::evaluator::holds;
use indinv::infer::{check_induction, infer_inductive_invariant, CheckMode, InferenceConfig, Status};
use indinv::instance::state_space_size;
use indinv::reachability::compute_reach;

#[test]
fn every_benchmark_is_safe_on_its_reachable_states() {
    for b in common::load_all() {
        let reach = compute_reach(&b.protocol, &b.instance, 1_000_000).unwrap();
        let safe = b.protocol.safety_predicate();
        assert!(reach.states().iter().all(|s| holds(&safe, s, &b.instance)), "{}", b.name);
    }
}

#[test]
fn reachable_sets_do_not_depend_on_thread_count() {
    for b in common::load_all() {
        let run = |n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .unwrap()
                .install(|| compute_reach(&b.protocol, &b.instance, 1_000_000).unwrap())
        };
        assert_eq!(run(1), run(4), "{}", b.name);
    }
}

#[test]
fn successful_runs_pass_the_exhaustive_induction_check() {
    for b in common::load_all() {
        let (p, i) = (&b.protocol, &b.instance);
        assert!(state_space_size(p, i).unwrap() <= 1_000_000, "{}", b.name);
        let reach = compute_reach(p, i, 1_000_000).unwrap();
        for seed in [1, 2] {
            let cfg = InferenceConfig {
                seed,
                ..InferenceConfig::default()
            };
            let r = infer_inductive_invariant(p, i, &b.grammar, &cfg).unwrap();
            assert_eq!(r.status, Status::Success, "{} seed {seed}", b.name);
            assert_eq!(r.conjuncts[0].text(), p.safety().to_string());
            for c in &r.conjuncts {
                assert!(reach.states().iter().all(|s| holds(c, s, i)), "{}: `{}`", b.name, c.text());
            }
            let report = check_induction(p, i, &r.conjuncts, CheckMode::Exhaustive { limit: 1_000_000 }).unwrap();
            assert!(report.passed(), "{}\n{}", b.name, report.describe(p, i, &r.conjuncts));
        }
    }
}

#[test]
fn conjunct_lists_are_deterministic_at_one_worker() {
    for b in common::load_all() {
        let cfg = InferenceConfig {
            n_lemmas: 2000,
            n_ctis: 5000,
            seed: 3,
            ..InferenceConfig::default()
        }
        .with_workers(1);
        let texts = || -> Vec<String> {
            infer_inductive_invariant(&b.protocol, &b.instance, &b.grammar, &cfg)
                .unwrap()
                .conjuncts
                .iter()
                .map(|c| c.text().to_string())
                .collect()
        };
        assert_eq!(texts(), texts(), "{}", b.name);
    }
}

mod fuzz {
    use super::common;
    use indinv::evaluator::{eval, holds, successors, Env};
    use indinv::instance::{conforms, random_state};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Evaluating checked expressions on random type-correct states
        /// never hits a value-kind mismatch, and successors stay typed.
        #[test]
        fn checked_expressions_evaluate_on_random_states(which in 0..common::BENCHMARKS.len(), seed: u64) {
            let b = common::load(common::BENCHMARKS[which]);
            let (p, i) = (&b.protocol, &b.instance);
            let binders: Vec<(String, String)> =
                b.grammar.template.iter().map(|t| (t.var.clone(), t.sort.clone())).collect();
            let seeds: Vec<_> = b.grammar.seeds.iter().map(|s| p.open_expr(s, &binders).unwrap()).collect();
            let sorts: Vec<usize> = binders.iter().map(|(_, s)| p.sort_index(s).unwrap()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..8 {
                let s = random_state(p, i, &mut rng);
                prop_assert!(conforms(p, i, &s));
                holds(&p.safety_predicate(), &s, i);
                let env = Env(sorts.iter().map(|&k| i.size(k) - 1).collect());
                for e in &seeds {
                    eval(e, &s, &env, i).as_bool();
                }
                for t in successors(&s, p, i) {
                    prop_assert!(conforms(p, i, &t.post));
                }
            }
        }
    }
}
