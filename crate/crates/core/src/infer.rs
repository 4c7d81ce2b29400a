//! The inference loop and a finite-instance induction checker.

use std::fmt;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rayon::ThreadPool;
use serde::Serialize;
use thiserror::Error;

use crate::ctigen::{generate_ctis, holds_all, worker_seed, CtiParams};
use crate::evaluator::{holds, initial_state, successors, transition_label};
use crate::instance::{enumerate_states, random_state, Instance, InstanceError, State, StateDisplay};
use crate::invgen::{term_size_schedule, InvGenError, LemmaGenerator, LemmaRepository};
use crate::reachability::{compute_reach, ReachError};
use crate::select::choose_greedy;
use crate::spec_lang::{GrammarConfig, Predicate, Protocol};

#[derive(Debug, Error)]
pub enum InferError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Reach(#[from] ReachError),
    #[error(transparent)]
    InvGen(#[from] InvGenError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InferenceConfig {
    /// Candidate draws per lemma generation round.
    pub n_lemmas: usize,
    /// Start-state samples per CTI generation call.
    pub n_ctis: u64,
    /// Maximum CTIs returned by one CTI generation call.
    pub cti_cap: usize,
    pub walk_depth: usize,
    /// Extra lemma generation rounds allowed when no lemma eliminates a CTI.
    pub max_regen_rounds: usize,
    pub seed: u64,
    pub reach_limit: usize,
    /// Overrides the grammar's term-count schedule.
    pub term_schedule: Option<Vec<usize>>,
    pub workers_check: usize,
    pub workers_cti: usize,
    pub workers_elim: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        InferenceConfig {
            n_lemmas: 15_000,
            n_ctis: 50_000,
            cti_cap: 10_000,
            walk_depth: 3,
            max_regen_rounds: 3,
            seed: 0,
            reach_limit: 5_000_000,
            term_schedule: None,
            workers_check: 8,
            workers_cti: 4,
            workers_elim: 4,
        }
    }
}

impl InferenceConfig {
    pub fn validate(&self) -> Result<(), InferError> {
        let positive = [
            ("n_lemmas", self.n_lemmas as u64),
            ("n_ctis", self.n_ctis),
            ("cti_cap", self.cti_cap as u64),
            ("walk_depth", self.walk_depth as u64),
            ("reach_limit", self.reach_limit as u64),
            ("workers_check", self.workers_check as u64),
            ("workers_cti", self.workers_cti as u64),
            ("workers_elim", self.workers_elim as u64),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(InferError::Config(format!("{name} must be positive")));
            }
        }
        if let Some(s) = &self.term_schedule {
            if s.is_empty() || s[0] == 0 || s.windows(2).any(|w| w[0] >= w[1]) {
                return Err(InferError::Config(
                    "term schedule must be a strictly increasing list of positive integers".into(),
                ));
            }
        }
        Ok(())
    }

    /// The same configuration with every worker count set to `n`.
    pub fn with_workers(mut self, n: usize) -> Self {
        self.workers_check = n;
        self.workers_cti = n;
        self.workers_elim = n;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Fail,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Success => "success",
            Status::Fail => "fail",
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InferenceStats {
    pub total: Duration,
    /// Lemma generation and filtering against the reachable states.
    pub check: Duration,
    /// Greedy selection.
    pub elim: Duration,
    pub ctigen: Duration,
    pub ctis_eliminated: usize,
    /// Lemma generation rounds.
    pub rounds: usize,
    /// Lemmas conjoined.
    pub iterations: usize,
    pub lemmas_sampled: u64,
    pub lemmas_admitted: usize,
    pub reach_states: usize,
}

#[derive(Debug, Clone)]
pub struct InferenceResult {
    pub status: Status,
    /// The safety property followed by the selected lemmas in order.
    pub conjuncts: Vec<Predicate>,
    pub stats: InferenceStats,
}

struct Pools {
    check: ThreadPool,
    cti: ThreadPool,
    elim: ThreadPool,
}

fn pool(n: usize) -> ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .expect("failed to start worker threads")
}

/// Seed stream for CTI generation, kept apart from the lemma sampler.
const CTI_STREAM: u64 = 0x6374_6967_656e;

/// Runs the CTI-elimination loop: start from the safety property, sample
/// CTIs and lemmas, and repeatedly conjoin the lemma that eliminates the
/// most CTIs. When no lemma eliminates any remaining CTI, more lemmas are
/// generated at the next term size, at most `max_regen_rounds` times,
/// before giving up with the partial conjunction.
pub fn infer_inductive_invariant(
    protocol: &Protocol,
    inst: &Instance,
    grammar: &GrammarConfig,
    config: &InferenceConfig,
) -> Result<InferenceResult, InferError> {
    config.validate()?;
    let start = Instant::now();
    let mut grammar = grammar.clone();
    if let Some(s) = &config.term_schedule {
        grammar.max_terms = s.clone();
    }
    let pools = Pools {
        check: pool(config.workers_check),
        cti: pool(config.workers_cti),
        elim: pool(config.workers_elim),
    };
    let mut stats = InferenceStats::default();

    let t = Instant::now();
    let reach = pools.check.install(|| compute_reach(protocol, inst, config.reach_limit))?;
    let generator = pools.check.install(|| LemmaGenerator::new(protocol, inst, &grammar, &reach));
    stats.check += t.elapsed();
    stats.reach_states = reach.len();

    let cti_params = CtiParams {
        n_ctis: config.n_ctis,
        depth: config.walk_depth,
        cap: config.cti_cap,
        workers: config.workers_cti,
    };
    let mut cti_calls = 0u64;
    let mut ctigen = |ind: &[Predicate], stats: &mut InferenceStats| {
        let t = Instant::now();
        let seed = worker_seed(config.seed ^ CTI_STREAM, cti_calls as usize);
        cti_calls += 1;
        let batch = pools.cti.install(|| generate_ctis(protocol, inst, ind, &cti_params, seed));
        stats.ctigen += t.elapsed();
        batch.ctis
    };

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut repo = LemmaRepository::new();
    let mut genlemmas = |repo: &mut LemmaRepository, round: usize, stats: &mut InferenceStats| {
        let t = Instant::now();
        let nterms = term_size_schedule(&grammar, round).min(grammar.seeds.len());
        let r = pools
            .check
            .install(|| generator.generate(repo, config.n_lemmas, nterms, round, &mut rng));
        stats.check += t.elapsed();
        stats.rounds = round;
        r.map(|g| stats.lemmas_sampled += g.drawn)
    };

    let mut ind = vec![protocol.safety_predicate()];
    let mut x = ctigen(&ind, &mut stats);
    let mut round = 1;
    genlemmas(&mut repo, round, &mut stats)?;
    let mut regens = 0;

    let status = loop {
        if x.is_empty() {
            break Status::Success;
        }
        let t = Instant::now();
        let exclude: Vec<&str> = ind.iter().map(|p| p.text()).collect();
        let choice = pools
            .elim
            .install(|| choose_greedy(&repo, &x, &grammar, inst, &exclude));
        stats.elim += t.elapsed();
        match choice {
            Some(sel) => {
                ind.push(repo.get(sel.index).predicate().clone());
                stats.iterations += 1;
                stats.ctis_eliminated += sel.eliminated.len();
                x.retain(|c| !sel.eliminated.contains(&c.fingerprint));
                x = ctigen(&ind, &mut stats);
            }
            None if regens < config.max_regen_rounds => {
                regens += 1;
                round += 1;
                genlemmas(&mut repo, round, &mut stats)?;
            }
            None => break Status::Fail,
        }
    };
    stats.lemmas_admitted = repo.len();
    stats.total = start.elapsed();
    Ok(InferenceResult {
        status,
        conjuncts: ind,
        stats,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckMode {
    /// Every type-correct state, refusing state spaces above `limit`.
    Exhaustive { limit: u64 },
    /// `samples` uniformly drawn type-correct states.
    Sampled { samples: u64, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsecutionWitness {
    pub state: State,
    pub action: usize,
    pub binding: Vec<u32>,
    pub post: State,
    /// Index of a conjunct the post-state violates.
    pub violated: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Strengthening {
    /// The safety property is one of the conjuncts.
    Structural,
    /// Every checked state satisfying the conjunction satisfies safety.
    Semantic,
    Failed { state: State },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InductionReport {
    /// `Err(i)`: the initial state violates conjunct `i`.
    pub initiation: Result<(), usize>,
    pub consecution: Result<(), ConsecutionWitness>,
    pub strengthening: Strengthening,
    pub states_checked: u64,
}

impl InductionReport {
    pub fn passed(&self) -> bool {
        self.initiation.is_ok()
            && self.consecution.is_ok()
            && !matches!(self.strengthening, Strengthening::Failed { .. })
    }

    pub fn describe(&self, protocol: &Protocol, inst: &Instance, ind: &[Predicate]) -> String {
        let show = |s: &State| {
            StateDisplay {
                protocol,
                instance: inst,
                state: s,
            }
            .to_string()
        };
        let mut out = format!("states checked: {}\n", self.states_checked);
        match self.initiation {
            Ok(()) => out.push_str("initiation: pass\n"),
            Err(i) => out.push_str(&format!("initiation: FAIL, initial state violates `{}`\n", ind[i].text())),
        }
        match &self.consecution {
            Ok(()) => out.push_str("consecution: pass\n"),
            Err(w) => out.push_str(&format!(
                "consecution: FAIL\n  state: {}\n  step:  {}\n  post:  {}\n  violates `{}`\n",
                show(&w.state),
                transition_label(protocol, inst, w.action, &w.binding),
                show(&w.post),
                ind[w.violated].text()
            )),
        }
        match &self.strengthening {
            Strengthening::Structural => out.push_str("strengthening: pass (safety is a conjunct)\n"),
            Strengthening::Semantic => out.push_str("strengthening: pass\n"),
            Strengthening::Failed { state } => {
                out.push_str(&format!("strengthening: FAIL, unsafe state {}\n", show(state)))
            }
        }
        out
    }
}

const CHUNK: usize = 4096;

struct Verdict {
    consecution: Option<ConsecutionWitness>,
    unsafe_state: Option<State>,
}

fn check_state(protocol: &Protocol, inst: &Instance, ind: &[Predicate], safe: Option<&Predicate>, s: &State) -> Verdict {
    let mut v = Verdict {
        consecution: None,
        unsafe_state: None,
    };
    if !holds_all(ind, s, inst) {
        return v;
    }
    if let Some(safe) = safe {
        if !holds(safe, s, inst) {
            v.unsafe_state = Some(s.clone());
        }
    }
    for t in successors(s, protocol, inst) {
        if let Some(violated) = ind.iter().position(|p| !holds(p, &t.post, inst)) {
            v.consecution = Some(ConsecutionWitness {
                state: s.clone(),
                action: t.action,
                binding: t.binding,
                post: t.post,
                violated,
            });
            break;
        }
    }
    v
}

/// Checks initiation, consecution and strengthening of the conjunction
/// `ind` over the type-correct states of the instance. Witnesses are the
/// first failures in enumeration (or sampling) order.
pub fn check_induction(
    protocol: &Protocol,
    inst: &Instance,
    ind: &[Predicate],
    mode: CheckMode,
) -> Result<InductionReport, InstanceError> {
    let init = initial_state(protocol, inst);
    let initiation = match ind.iter().position(|p| !holds(p, &init, inst)) {
        Some(i) => Err(i),
        None => Ok(()),
    };
    let structural = ind.iter().any(|p| p.text() == protocol.safety().to_string());
    let safe = protocol.safety_predicate();
    let safe = (!structural).then_some(&safe);

    let mut states: Box<dyn Iterator<Item = State>> = match mode {
        CheckMode::Exhaustive { limit } => Box::new(enumerate_states(protocol, inst, limit)?),
        CheckMode::Sampled { samples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Box::new((0..samples).map(move |_| random_state(protocol, inst, &mut rng)))
        }
    };
    let mut checked = 0u64;
    let mut consecution = None;
    let mut unsafe_state = None;
    loop {
        let chunk: Vec<State> = states.by_ref().take(CHUNK).collect();
        if chunk.is_empty() {
            break;
        }
        checked += chunk.len() as u64;
        let verdicts: Vec<Verdict> = chunk
            .par_iter()
            .map(|s| check_state(protocol, inst, ind, safe, s))
            .collect();
        for v in verdicts {
            if consecution.is_none() {
                consecution = v.consecution;
            }
            if unsafe_state.is_none() {
                unsafe_state = v.unsafe_state;
            }
        }
    }
    Ok(InductionReport {
        initiation,
        consecution: consecution.map_or(Ok(()), Err),
        strengthening: match (structural, unsafe_state) {
            (true, _) => Strengthening::Structural,
            (false, None) => Strengthening::Semantic,
            (false, Some(state)) => Strengthening::Failed { state },
        },
        states_checked: checked,
    })
}

/// One summary row: status, conjunct count and per-phase times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsRow {
    pub status: String,
    pub conjuncts: usize,
    pub time: f64,
    pub ctis: usize,
    pub check: f64,
    pub elim: f64,
    pub ctigen: f64,
}

impl StatsRow {
    pub const HEADER: &'static str = "status   inv     time     ctis    check     elim   ctigen";

    /// Aligned text matching [`StatsRow::HEADER`].
    pub fn text(&self) -> String {
        format!(
            "{:<7} {:>4} {:>8.2} {:>8} {:>8.2} {:>8.2} {:>8.2}",
            self.status, self.conjuncts, self.time, self.ctis, self.check, self.elim, self.ctigen
        )
    }

    /// `key=value` pairs separated by spaces.
    pub fn machine(&self) -> String {
        format!(
            "status={} inv={} time={:.3} ctis={} check={:.3} elim={:.3} ctigen={:.3}",
            self.status, self.conjuncts, self.time, self.ctis, self.check, self.elim, self.ctigen
        )
    }
}

pub fn run_round_stats(result: &InferenceResult) -> StatsRow {
    let s = &result.stats;
    StatsRow {
        status: result.status.to_string(),
        conjuncts: result.conjuncts.len(),
        time: s.total.as_secs_f64(),
        ctis: s.ctis_eliminated,
        check: s.check.as_secs_f64(),
        elim: s.elim.as_secs_f64(),
        ctigen: s.ctigen.as_secs_f64(),
    }
}

#[derive(Serialize)]
struct ResultFile<'a> {
    status: String,
    validated: Option<bool>,
    seed: u64,
    instance: String,
    conjuncts: Vec<&'a str>,
    stats: FileStats,
    config: &'a InferenceConfig,
}

#[derive(Serialize)]
struct FileStats {
    ctis_eliminated: usize,
    rounds: usize,
    iterations: usize,
    lemmas_sampled: u64,
    lemmas_admitted: usize,
    reach_states: usize,
}

/// Structured result file. Wall-clock times are left out so that reruns
/// with the same seed produce identical bytes.
pub fn result_file(
    result: &InferenceResult,
    config: &InferenceConfig,
    inst: &Instance,
    validated: Option<bool>,
) -> String {
    let s = &result.stats;
    let file = ResultFile {
        status: result.status.to_string(),
        validated,
        seed: config.seed,
        instance: inst.to_string(),
        conjuncts: result.conjuncts.iter().map(|p| p.text()).collect(),
        stats: FileStats {
            ctis_eliminated: s.ctis_eliminated,
            rounds: s.rounds,
            iterations: s.iterations,
            lemmas_sampled: s.lemmas_sampled,
            lemmas_admitted: s.lemmas_admitted,
            reach_states: s.reach_states,
        },
        config,
    };
    toml::to_string(&file).expect("result file serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spec_lang::{parse_conjuncts, parse_grammar, parse_protocol};

    const LOCK: &str = include_str!("../../../benchmarks/lockserver.proto");
    const LOCK_GRAMMAR: &str = include_str!("../../../benchmarks/lockserver.grammar");
    const A1: &str = "forall s: Server. forall c: Client. locked[s] -> ~(s in held[c])";

    fn setup() -> (Protocol, Instance) {
        let p = parse_protocol(LOCK).unwrap();
        let i = Instance::parse(&p, "Server=s1,s2 Client=c1,c2").unwrap();
        (p, i)
    }

    fn small() -> InferenceConfig {
        InferenceConfig {
            n_lemmas: 2000,
            n_ctis: 5000,
            seed: 1,
            ..InferenceConfig::default()
        }
        .with_workers(2)
    }

    const EXHAUSTIVE: CheckMode = CheckMode::Exhaustive { limit: 1 << 20 };

    #[test]
    fn safe_and_a1_is_inductive() {
        let (p, i) = setup();
        let mut ind = vec![p.safety_predicate()];
        ind.extend(parse_conjuncts(A1, &p).unwrap());
        let r = check_induction(&p, &i, &ind, EXHAUSTIVE).unwrap();
        assert!(r.passed(), "{}", r.describe(&p, &i, &ind));
        assert_eq!(r.states_checked, 64);
        assert_eq!(r.strengthening, Strengthening::Structural);
    }

    #[test]
    fn safe_alone_has_a_consecution_witness() {
        let (p, i) = setup();
        let ind = vec![p.safety_predicate()];
        let r = check_induction(&p, &i, &ind, EXHAUSTIVE).unwrap();
        let w = r.consecution.clone().unwrap_err();
        assert!(holds(&ind[0], &w.state, &i));
        assert!(!holds(&ind[0], &w.post, &i));
        assert_eq!(
            crate::evaluator::apply_action(&p, &i, &w.state, w.action, &w.binding),
            Some(w.post.clone())
        );
        assert!(r.describe(&p, &i, &ind).contains("consecution: FAIL"));
    }

    #[test]
    fn false_fails_initiation() {
        let (p, i) = setup();
        let ind = parse_conjuncts("false", &p).unwrap();
        let r = check_induction(&p, &i, &ind, EXHAUSTIVE).unwrap();
        assert_eq!(r.initiation, Err(0));
        assert!(!r.passed());
    }

    #[test]
    fn strengthening_is_checked_when_safety_is_absent() {
        let (p, i) = setup();
        let ind = parse_conjuncts("true", &p).unwrap();
        let r = check_induction(&p, &i, &ind, EXHAUSTIVE).unwrap();
        assert!(r.consecution.is_ok());
        assert!(matches!(r.strengthening, Strengthening::Failed { .. }));
        // A1 plus "each server held by at most one client", stated without Safe.
        let ind = parse_conjuncts(
            &format!("{A1}\nforall s: Server. forall a, b: Client. s in held[a] /\\ s in held[b] -> a = b"),
            &p,
        )
        .unwrap();
        let r = check_induction(&p, &i, &ind, EXHAUSTIVE).unwrap();
        assert_eq!(r.strengthening, Strengthening::Semantic);
        assert!(r.passed(), "{}", r.describe(&p, &i, &ind));
    }

    #[test]
    fn exhaustive_limit_is_reported() {
        let (p, i) = setup();
        let err = check_induction(&p, &i, &[], CheckMode::Exhaustive { limit: 10 }).unwrap_err();
        assert_eq!(err, InstanceError::LimitExceeded { size: 64, limit: 10 });
    }

    #[test]
    fn sampled_mode_finds_the_lock_server_cti() {
        let (p, i) = setup();
        let r = check_induction(
            &p,
            &i,
            &[p.safety_predicate()],
            CheckMode::Sampled { samples: 2000, seed: 3 },
        )
        .unwrap();
        assert_eq!(r.states_checked, 2000);
        assert!(r.consecution.is_err());
    }

    #[test]
    fn lock_server_infers_safe_and_a1() {
        let (p, i) = setup();
        let g = parse_grammar(LOCK_GRAMMAR, &p).unwrap();
        let r = infer_inductive_invariant(&p, &i, &g, &small()).unwrap();
        assert_eq!(r.status, Status::Success);
        assert_eq!(r.conjuncts.len(), 2);
        assert_eq!(r.conjuncts[0].text(), p.safety().to_string());
        assert!(r.stats.ctis_eliminated > 0);
        assert!(check_induction(&p, &i, &r.conjuncts, EXHAUSTIVE).unwrap().passed());
        let row = run_round_stats(&r);
        assert_eq!(row.ctis, r.stats.ctis_eliminated);
        assert!(row.time > 0.0);
        assert_eq!(row.text().split_whitespace().count(), StatsRow::HEADER.split_whitespace().count());
    }

    #[test]
    fn useless_grammar_fails_with_safe_alone() {
        let (p, i) = setup();
        let g = parse_grammar("template forall s: Server.\nseed true\n", &p).unwrap();
        let r = infer_inductive_invariant(&p, &i, &g, &small()).unwrap();
        assert_eq!(r.status, Status::Fail);
        assert_eq!(r.conjuncts.len(), 1);
        assert_eq!(r.stats.rounds, 1 + small().max_regen_rounds);
        assert_eq!(run_round_stats(&r).status, "fail");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let (p, i) = setup();
        let g = parse_grammar(LOCK_GRAMMAR, &p).unwrap();
        let cfg = InferenceConfig {
            cti_cap: 0,
            ..small()
        };
        assert!(matches!(
            infer_inductive_invariant(&p, &i, &g, &cfg),
            Err(InferError::Config(_))
        ));
    }

    #[test]
    fn result_file_is_reproducible() {
        let (p, i) = setup();
        let g = parse_grammar(LOCK_GRAMMAR, &p).unwrap();
        let cfg = small().with_workers(1);
        let a = infer_inductive_invariant(&p, &i, &g, &cfg).unwrap();
        let b = infer_inductive_invariant(&p, &i, &g, &cfg).unwrap();
        let fa = result_file(&a, &cfg, &i, Some(true));
        assert_eq!(fa, result_file(&b, &cfg, &i, Some(true)));
        assert!(fa.starts_with("status = \"success\""), "{fa}");
    }
}
