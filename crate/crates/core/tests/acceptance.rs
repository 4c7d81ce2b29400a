//! End-to-end acceptance checks. Runs without the libtest harness and
//! prints one PASS/FAIL line per criterion; exits non-zero if any fails.

mod common;

use std::collections::{BTreeSet, HashMap};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{all_states, load, load_all, oracle_check, steps, Bench};
use indinv::ctigen::{generate_ctis, replay_witness, Cti, CtiParams};
use indinv::evaluator::{apply_action, holds};
use indinv::infer::{check_induction, infer_inductive_invariant, CheckMode, InferenceConfig, Status};
use indinv::instance::{fingerprint, random_state, state_space_size};
use indinv::invgen::{sample_candidate, LemmaGenerator, LemmaRepository};
use indinv::reachability::compute_reach;
use indinv::select::{choose_greedy, eliminates};
use indinv::spec_lang::{parse_conjuncts, Predicate};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const A1: &str = "forall s: Server. forall c: Client. locked[s] -> ~(s in held[c])";

fn lock_server_end_to_end() -> Outcome {
    let b = load("lockserver");
    let (p, i) = (&b.protocol, &b.instance);
    let states = all_states(p, i);
    ensure(states.len() == 64, || format!("{} states, expected 64", states.len()))?;
    let mut reference = vec![p.safety_predicate()];
    reference.extend(parse_conjuncts(A1, p).unwrap());
    let truth = |ind: &[Predicate]| -> Vec<bool> {
        states.iter().map(|s| ind.iter().all(|c| holds(c, s, i))).collect()
    };
    let want = truth(&reference);
    let mut good = 0;
    let mut slowest = Duration::ZERO;
    let mut notes = Vec::new();
    for seed in 0..10 {
        let cfg = InferenceConfig {
            n_lemmas: 2000,
            n_ctis: 5000,
            seed,
            ..InferenceConfig::default()
        };
        let t = Instant::now();
        let r = infer_inductive_invariant(p, i, &b.grammar, &cfg).map_err(|e| e.to_string())?;
        let took = t.elapsed();
        slowest = slowest.max(took);
        let ok = r.status == Status::Success
            && r.conjuncts.len() == 2
            && truth(&r.conjuncts) == want
            && took <= Duration::from_secs(60);
        if ok {
            good += 1;
        } else {
            notes.push(format!("seed {seed}: {} with {} conjuncts in {took:.2?}", r.status, r.conjuncts.len()));
        }
    }
    ensure(good >= 9, || format!("{good}/10 seeds succeeded; {}", notes.join("; ")))?;
    Ok(format!("{good}/10 seeds gave Safe /\\ A1, slowest {slowest:.2?}"))
}

fn already_inductive() -> Outcome {
    let b = load("consensus");
    let t = Instant::now();
    let r = infer_inductive_invariant(&b.protocol, &b.instance, &b.grammar, &InferenceConfig::default())
        .map_err(|e| e.to_string())?;
    let took = t.elapsed();
    ensure(r.status == Status::Success, || format!("status {}", r.status))?;
    ensure(r.conjuncts.len() == 1, || format!("{} conjuncts", r.conjuncts.len()))?;
    ensure(r.stats.ctis_eliminated == 0, || format!("{} CTIs eliminated", r.stats.ctis_eliminated))?;
    ensure(took <= Duration::from_secs(5), || format!("took {took:.2?}"))?;
    Ok(format!("1 conjunct, 0 CTIs, {took:.2?}"))
}

/// Conjunct sets to check for one benchmark: the inferred invariant, each
/// proper prefix of it, `false`, and random conjunctions of candidates.
fn conjunct_sets(b: &Bench, rng: &mut ChaCha8Rng) -> Vec<Vec<Predicate>> {
    let p = &b.protocol;
    let cfg = InferenceConfig {
        n_lemmas: 3000,
        n_ctis: 5000,
        seed: 5,
        ..InferenceConfig::default()
    };
    let inferred = infer_inductive_invariant(p, &b.instance, &b.grammar, &cfg).unwrap();
    let mut sets: Vec<Vec<Predicate>> = (1..=inferred.conjuncts.len())
        .map(|k| inferred.conjuncts[..k].to_vec())
        .collect();
    sets.push(parse_conjuncts("false", p).unwrap());
    sets.push(parse_conjuncts("true", p).unwrap());
    for _ in 0..12 {
        let mut set = vec![p.safety_predicate()];
        for _ in 0..rng.gen_range(1..=3) {
            let n = rng.gen_range(1..=b.grammar.seeds.len().min(3));
            if let Some(c) = sample_candidate(p, &b.grammar, n, rng).unwrap() {
                set.push(c.predicate().clone());
            }
        }
        sets.push(set);
    }
    sets
}

fn induction_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let mut pairs = 0;
    for b in load_all() {
        let (p, i) = (&b.protocol, &b.instance);
        let size = state_space_size(p, i).unwrap();
        ensure(size <= 1_000_000, || format!("{}: {size} states", b.name))?;
        let states = all_states(p, i);
        let mut failing = 0;
        for ind in conjunct_sets(&b, &mut rng) {
            let oracle = oracle_check(p, i, &ind, &states);
            let r = check_induction(p, i, &ind, CheckMode::Exhaustive { limit: 1_000_000 }).unwrap();
            let tag = || format!("{}: {:?}", b.name, ind.iter().map(|c| c.text()).collect::<Vec<_>>());
            ensure(r.states_checked == size, || format!("{} checked {} states", tag(), r.states_checked))?;
            ensure(r.initiation.is_ok() == oracle.initiation, || format!("{} initiation differs", tag()))?;
            ensure(r.consecution.is_ok() == oracle.consecution, || format!("{} consecution differs", tag()))?;
            let strengthened = !matches!(r.strengthening, indinv::infer::Strengthening::Failed { .. });
            ensure(strengthened == oracle.strengthening, || format!("{} strengthening differs", tag()))?;
            if let Err(k) = r.initiation {
                ensure(!holds(&ind[k], &indinv::evaluator::initial_state(p, i), i), || {
                    format!("{} bogus initiation witness", tag())
                })?;
            }
            if let Err(w) = &r.consecution {
                let valid = ind.iter().all(|c| holds(c, &w.state, i))
                    && apply_action(p, i, &w.state, w.action, &w.binding).as_ref() == Some(&w.post)
                    && steps(p, i, &w.state).iter().any(|(a, bd, post)| *a == w.action && *bd == w.binding && *post == w.post)
                    && !holds(&ind[w.violated], &w.post, i);
                ensure(valid, || format!("{} invalid consecution witness", tag()))?;
            }
            if let indinv::infer::Strengthening::Failed { state } = &r.strengthening {
                ensure(
                    ind.iter().all(|c| holds(c, state, i)) && !holds(&p.safety_predicate(), state, i),
                    || format!("{} invalid strengthening witness", tag()),
                )?;
            }
            if !(oracle.initiation && oracle.consecution && oracle.strengthening) {
                failing += 1;
            }
            pairs += 1;
        }
        ensure(failing >= 5, || format!("{}: only {failing} non-inductive sets", b.name))?;
    }
    Ok(format!("{pairs} (benchmark, conjunct set) pairs agree with the brute-force checker"))
}

fn lemma_soundness() -> Outcome {
    let benches = load_all();
    let per = 10_000 / benches.len() as u64 + 1;
    let mut drawn = 0;
    let mut admitted = 0;
    let mut rejected = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(44);
    for b in &benches {
        let (p, i) = (&b.protocol, &b.instance);
        let reach = compute_reach(p, i, 1_000_000).unwrap();
        let gen = LemmaGenerator::new(p, i, &b.grammar, &reach);
        let mut repo = LemmaRepository::new();
        let sizes: Vec<usize> = b.grammar.max_terms.iter().map(|n| (*n).min(b.grammar.seeds.len())).collect();
        for (k, &n) in sizes.iter().enumerate() {
            let share = per / sizes.len() as u64 + u64::from((k as u64) < per % sizes.len() as u64);
            drawn += gen.generate(&mut repo, share as usize, n, k + 1, &mut rng).unwrap().drawn;
        }
        for c in repo.iter() {
            admitted += 1;
            for s in reach.states() {
                ensure(holds(c.predicate(), s, i), || format!("{}: admitted `{}` fails", b.name, c.id()))?;
            }
        }
        for (id, r) in repo.rejected() {
            rejected += 1;
            let c = p.predicate(&indinv::spec_lang::parse_expr(id).unwrap()).unwrap();
            ensure(r < reach.len() && !holds(&c, &reach.states()[r], i), || {
                format!("{}: rejected `{id}` lacks a falsifying state", b.name)
            })?;
        }
    }
    ensure(drawn >= 10_000, || format!("only {drawn} draws"))?;
    Ok(format!("{drawn} draws, {admitted} admitted and {rejected} rejected, all confirmed"))
}

fn cti_validity() -> Outcome {
    let mut batches = 0;
    let mut total = 0;
    for b in load_all() {
        let (p, i) = (&b.protocol, &b.instance);
        let cfg = InferenceConfig {
            n_lemmas: 3000,
            n_ctis: 5000,
            seed: 2,
            ..InferenceConfig::default()
        };
        let inferred = infer_inductive_invariant(p, i, &b.grammar, &cfg).unwrap();
        for k in 1..=inferred.conjuncts.len() {
            let ind = &inferred.conjuncts[..k];
            for workers in [1, 3] {
                let prm = CtiParams {
                    n_ctis: 5000,
                    depth: 3,
                    cap: 10_000,
                    workers,
                };
                let batch = generate_ctis(p, i, ind, &prm, k as u64 * 31 + workers as u64);
                batches += 1;
                let fps: BTreeSet<_> = batch.ctis.iter().map(|c| c.fingerprint).collect();
                ensure(fps.len() == batch.len(), || format!("{}: duplicate fingerprints", b.name))?;
                for c in &batch.ctis {
                    total += 1;
                    ensure(ind.iter().all(|q| holds(q, &c.state, i)), || format!("{}: CTI violates Ind", b.name))?;
                    replay_witness(c, p, i, ind).map_err(|e| format!("{}: replay failed: {e:?}", b.name))?;
                }
            }
        }
    }
    let b = load("lockserver");
    let (p, i) = (&b.protocol, &b.instance);
    let safe = vec![p.safety_predicate()];
    let oracle: BTreeSet<_> = all_states(p, i)
        .into_iter()
        .filter(|s| holds(&safe[0], s, i) && steps(p, i, s).iter().any(|(_, _, post)| !holds(&safe[0], post, i)))
        .map(|s| fingerprint(&s))
        .collect();
    let prm = CtiParams {
        n_ctis: 50_000,
        depth: 3,
        cap: 10_000,
        workers: 1,
    };
    let batch = generate_ctis(p, i, &safe, &prm, 7);
    let depth1: BTreeSet<_> = batch.ctis.iter().filter(|c| c.depth() == 1).map(|c| c.fingerprint).collect();
    ensure(depth1 == oracle, || format!("depth-1 CTIs {} vs oracle {}", depth1.len(), oracle.len()))?;
    Ok(format!(
        "{total} CTIs in {batches} batches replay; lock server depth-1 set matches the {} oracle CTIs",
        oracle.len()
    ))
}

fn greedy_maximality() -> Outcome {
    let benches = load_all();
    let mut rng = ChaCha8Rng::seed_from_u64(66);
    let mut ties = 0;
    let mut nones = 0;
    for f in 0..1000 {
        let b = benches.choose(&mut rng).unwrap();
        let (p, i) = (&b.protocol, &b.instance);
        let mut repo = LemmaRepository::new();
        for _ in 0..rng.gen_range(0..=25) {
            let n = rng.gen_range(1..=b.grammar.seeds.len().min(3));
            if let Some(c) = sample_candidate(p, &b.grammar, n, &mut rng).unwrap() {
                repo.insert_unchecked(c, 1);
            }
        }
        let mut seen = BTreeSet::new();
        let ctis: Vec<Cti> = (0..rng.gen_range(0..=40))
            .map(|_| random_state(p, i, &mut rng))
            .filter(|s| seen.insert(fingerprint(s)))
            .map(|s| Cti {
                fingerprint: fingerprint(&s),
                state: s,
                witness: vec![],
            })
            .collect();
        let exclude: Vec<String> = repo
            .iter()
            .filter(|_| rng.gen_bool(0.1))
            .map(|c| c.id().to_string())
            .collect();
        let exclude_refs: Vec<&str> = exclude.iter().map(String::as_str).collect();
        let counts: HashMap<&str, usize> = repo
            .iter()
            .map(|c| (c.id(), ctis.iter().filter(|x| eliminates(c, x, i)).count()))
            .collect();
        let eligible: Vec<_> = repo.iter().filter(|c| !exclude.iter().any(|e| e == c.id())).collect();
        let choice = choose_greedy(&repo, &ctis, &b.grammar, i, &exclude_refs);
        match choice {
            None => {
                nones += 1;
                ensure(eligible.iter().all(|c| counts[c.id()] == 0), || format!("fixture {f}: missed a lemma"))?;
            }
            Some(sel) => {
                let chosen = repo.get(sel.index);
                let n = counts[chosen.id()];
                ensure(n > 0 && n == sel.eliminated.len(), || format!("fixture {f}: bad count"))?;
                ensure(!exclude.iter().any(|e| e == chosen.id()), || format!("fixture {f}: excluded lemma chosen"))?;
                for c in &eligible {
                    let m = counts[c.id()];
                    ensure(m <= n, || format!("fixture {f}: `{}` eliminates more", c.id()))?;
                    if m == n && c.id() != chosen.id() {
                        ties += 1;
                        let key = |x: &indinv::invgen::CandidateInvariant| (x.literals().len(), x.id().to_string());
                        ensure(key(chosen) < key(c), || format!("fixture {f}: tie-break violated"))?;
                    }
                }
            }
        }
    }
    Ok(format!("1000 fixtures ({nones} with nothing to eliminate, {ties} tied rivals checked)"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    for name in common::BENCHMARKS {
        let run = |k: usize| -> Result<Vec<u8>, String> {
            let out = dir.path().join(format!("{name}.{k}.toml"));
            let st = Command::new(env!("CARGO_BIN_EXE_indinv"))
                .arg("infer")
                .arg(common::bench_file(name, "proto"))
                .args(["--seed", "7", "--workers-check", "1", "--workers-cti", "1", "--workers-elim", "1"])
                .arg("--out")
                .arg(&out)
                .output()
                .map_err(|e| e.to_string())?;
            ensure(st.status.code() == Some(0), || {
                format!("{name}: exit {:?}: {}", st.status.code(), String::from_utf8_lossy(&st.stderr))
            })?;
            std::fs::read(&out).map_err(|e| e.to_string())
        };
        let a = run(0)?;
        ensure(a == run(1)?, || format!("{name}: result files differ"))?;
    }
    Ok(format!("{} benchmarks reproduce byte for byte", common::BENCHMARKS.len()))
}

fn sampling_distribution() -> Outcome {
    let b = load("lockserver");
    ensure(b.grammar.seeds.len() == 3, || "lock server grammar should have 3 seeds".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut counts: HashMap<String, usize> = HashMap::new();
    for _ in 0..10_000 {
        let c = sample_candidate(&b.protocol, &b.grammar, 1, &mut rng).unwrap().unwrap();
        *counts.entry(c.id().to_string()).or_default() += 1;
    }
    ensure(counts.len() == 6, || format!("{} distinct outcomes", counts.len()))?;
    let worst = counts
        .values()
        .map(|n| (*n as f64 / 10_000.0 - 1.0 / 6.0).abs())
        .fold(0.0, f64::max);
    ensure(worst <= 0.02, || format!("max deviation {worst:.4}"))?;
    Ok(format!("6 outcomes, max deviation from 1/6 is {worst:.4}"))
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("lock server end to end", lock_server_end_to_end),
        ("already inductive short circuit", already_inductive),
        ("induction check matches brute force", induction_oracle),
        ("lemma soundness", lemma_soundness),
        ("CTI validity", cti_validity),
        ("greedy maximality", greedy_maximality),
        ("determinism", determinism),
        ("sampling distribution", sampling_distribution),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail} [{:.1?}]", n + 1, t.elapsed()),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why} [{:.1?}]", n + 1, t.elapsed());
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
