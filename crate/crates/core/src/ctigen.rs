//! Counterexamples to induction found by random simulation.

use std::fmt::Write;
use std::hash::Hasher;

use fnv::FnvHasher;
use indexmap::map::Entry;
use indexmap::IndexMap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::evaluator::{apply_action, holds, successors, transition_label};
use crate::instance::{encode_state, fingerprint, random_state, Fingerprint, Instance, State, StateDisplay};
use crate::spec_lang::{Predicate, Protocol};

/// One step of a witness: the transition taken and the state it leads to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WitnessStep {
    pub action: usize,
    pub binding: Vec<u32>,
    pub post: State,
}

/// A state satisfying the candidate from which a violating state is
/// reachable along `witness`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cti {
    pub state: State,
    pub fingerprint: Fingerprint,
    pub witness: Vec<WitnessStep>,
}

impl Cti {
    /// Number of steps to the violating state.
    pub fn depth(&self) -> usize {
        self.witness.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CtiBatch {
    /// Deduplicated by fingerprint, in discovery order.
    pub ctis: Vec<Cti>,
    pub samples_attempted: u64,
    /// Printed conjuncts of the candidate the batch was generated for.
    pub ind: Vec<String>,
}

impl CtiBatch {
    pub fn is_empty(&self) -> bool {
        self.ctis.is_empty()
    }

    pub fn len(&self) -> usize {
        self.ctis.len()
    }

    /// One record per CTI: hex-encoded state, depth, readable state and
    /// the actions of its witness.
    pub fn dump(&self, protocol: &Protocol, inst: &Instance) -> String {
        let mut out = String::new();
        for c in &self.ctis {
            let actions: Vec<String> = c
                .witness
                .iter()
                .map(|w| transition_label(protocol, inst, w.action, &w.binding))
                .collect();
            let state = StateDisplay {
                protocol,
                instance: inst,
                state: &c.state,
            };
            let _ = writeln!(
                out,
                "{} depth={} state=[{}] witness=[{}]",
                hex::encode(encode_state(&c.state)),
                c.depth(),
                state,
                actions.join(", ")
            );
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CtiParams {
    pub n_ctis: u64,
    pub depth: usize,
    pub cap: usize,
    pub workers: usize,
}

pub(crate) fn holds_all(ind: &[Predicate], s: &State, inst: &Instance) -> bool {
    ind.iter().all(|p| holds(p, s, inst))
}

/// Seed of worker `worker` for a run with base seed `seed`.
pub fn worker_seed(seed: u64, worker: usize) -> u64 {
    let mut h = FnvHasher::default();
    h.write_u64(seed);
    h.write_u64(worker as u64);
    h.finish()
}

fn record(found: &mut IndexMap<Fingerprint, Cti>, cti: Cti) {
    match found.entry(cti.fingerprint) {
        Entry::Occupied(mut e) => {
            if cti.depth() < e.get().depth() {
                e.insert(cti);
            }
        }
        Entry::Vacant(e) => {
            e.insert(cti);
        }
    }
}

fn run_worker(
    protocol: &Protocol,
    inst: &Instance,
    ind: &[Predicate],
    budget: u64,
    params: &CtiParams,
    rng: &mut ChaCha8Rng,
) -> (IndexMap<Fingerprint, Cti>, u64) {
    let mut found = IndexMap::new();
    let mut attempted = 0;
    while attempted < budget && found.len() < params.cap {
        attempted += 1;
        let s0 = random_state(protocol, inst, rng);
        if !holds_all(ind, &s0, inst) {
            continue;
        }
        let mut path = vec![s0];
        let mut steps: Vec<WitnessStep> = Vec::new();
        for _ in 0..params.depth {
            let mut succ = successors(path.last().unwrap(), protocol, inst);
            if succ.is_empty() {
                break;
            }
            let t = succ.swap_remove(rng.gen_range(0..succ.len()));
            let bad = !holds_all(ind, &t.post, inst);
            steps.push(WitnessStep {
                action: t.action,
                binding: t.binding,
                post: t.post,
            });
            if bad {
                for (j, s) in path.iter().enumerate() {
                    record(
                        &mut found,
                        Cti {
                            fingerprint: fingerprint(s),
                            state: s.clone(),
                            witness: steps[j..].to_vec(),
                        },
                    );
                }
                break;
            }
            path.push(steps.last().unwrap().post.clone());
        }
    }
    (found, attempted)
}

/// Samples up to `n_ctis` start states uniformly from the typed state
/// space, discards those violating `ind`, and walks up to `depth` random
/// enabled transitions from each. When a walk reaches a state violating
/// `ind`, every state on the walk before it is recorded as a CTI.
///
/// The budget is split evenly over `workers` independent generators whose
/// seeds are derived from `seed`; results are merged in worker order, so
/// a batch is reproducible for a fixed (seed, worker count).
pub fn generate_ctis(
    protocol: &Protocol,
    inst: &Instance,
    ind: &[Predicate],
    params: &CtiParams,
    seed: u64,
) -> CtiBatch {
    let workers = params.workers.max(1);
    let per = params.n_ctis / workers as u64;
    let extra = params.n_ctis % workers as u64;
    let results: Vec<(IndexMap<Fingerprint, Cti>, u64)> = (0..workers)
        .into_par_iter()
        .map(|w| {
            let budget = per + u64::from((w as u64) < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(worker_seed(seed, w));
            run_worker(protocol, inst, ind, budget, params, &mut rng)
        })
        .collect();
    let mut merged = IndexMap::new();
    let mut attempted = 0;
    for (found, n) in results {
        attempted += n;
        for cti in found.into_values() {
            record(&mut merged, cti);
        }
    }
    merged.truncate(params.cap);
    CtiBatch {
        ctis: merged.into_values().collect(),
        samples_attempted: attempted,
        ind: ind.iter().map(|p| p.text().to_string()).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayFailure {
    /// Step 0 is the CTI's own state.
    Satisfies { step: usize },
    NotEnabled { step: usize },
    PostMismatch { step: usize },
    EndsInInd,
    EmptyWitness,
}

/// Re-executes the witness of `cti`, checking that each transition is
/// enabled and produces the recorded post-state, that every state but the
/// last satisfies `ind` and that the last does not.
pub fn replay_witness(cti: &Cti, protocol: &Protocol, inst: &Instance, ind: &[Predicate]) -> Result<(), ReplayFailure> {
    if cti.witness.is_empty() {
        return Err(ReplayFailure::EmptyWitness);
    }
    let mut cur = cti.state.clone();
    for (i, w) in cti.witness.iter().enumerate() {
        if !holds_all(ind, &cur, inst) {
            return Err(ReplayFailure::Satisfies { step: i });
        }
        let post = apply_action(protocol, inst, &cur, w.action, &w.binding)
            .ok_or(ReplayFailure::NotEnabled { step: i + 1 })?;
        if post != w.post {
            return Err(ReplayFailure::PostMismatch { step: i + 1 });
        }
        cur = post;
    }
    if holds_all(ind, &cur, inst) {
        return Err(ReplayFailure::EndsInInd);
    }
    Ok(())
}
