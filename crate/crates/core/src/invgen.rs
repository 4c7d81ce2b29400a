//! Candidate lemma sampling and filtering against the reachable states.

use std::collections::HashSet;
use std::fmt::Write;

use indexmap::IndexMap;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::evaluator::{bindings, holds_term};
use crate::instance::{Instance, State};
use crate::reachability::ReachSet;
use crate::spec_lang::{canonicalize, Expr, GrammarConfig, Predicate, Protocol, Quantifier, SpecError};

#[derive(Debug, Error)]
pub enum InvGenError {
    #[error("cannot draw {nterms} distinct terms from {seeds} seeds")]
    TooManyTerms { nterms: usize, seeds: usize },
    #[error(transparent)]
    Spec(#[from] SpecError),
}

/// A template-quantified disjunction of possibly negated seeds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateInvariant {
    literals: Vec<(usize, bool)>,
    predicate: Predicate,
}

impl CandidateInvariant {
    /// Builds the candidate for `literals` (seed index, negated). Returns
    /// `None` when the disjunction contains a literal and its negation.
    /// Literals that coincide after canonicalization are merged.
    pub fn new(
        protocol: &Protocol,
        grammar: &GrammarConfig,
        literals: &[(usize, bool)],
    ) -> Result<Option<CandidateInvariant>, InvGenError> {
        let mut lits: Vec<(usize, bool)> = literals.to_vec();
        lits.sort_unstable();
        let mut kept = Vec::new();
        let mut forms: Vec<String> = Vec::new();
        let mut exprs = Vec::new();
        for &(seed, neg) in &lits {
            let e = literal_expr(grammar, seed, neg);
            let form = e.to_string();
            if forms.contains(&form) {
                continue;
            }
            let opposite = literal_expr(grammar, seed, !neg).to_string();
            if forms.contains(&opposite) {
                return Ok(None);
            }
            forms.push(form);
            kept.push((seed, neg));
            exprs.push(e);
        }
        let mut expr = canonicalize(&Expr::Or(exprs));
        for t in grammar.template.iter().rev() {
            expr = Expr::Quant(t.quant, t.var.clone(), t.sort.clone(), Box::new(expr));
        }
        Ok(Some(CandidateInvariant {
            literals: kept,
            predicate: protocol.predicate(&expr)?,
        }))
    }

    /// (seed index, negated) pairs in seed order.
    pub fn literals(&self) -> &[(usize, bool)] {
        &self.literals
    }

    pub fn expr(&self) -> &Expr {
        self.predicate.expr()
    }

    /// Canonical printed form; unique per candidate.
    pub fn id(&self) -> &str {
        self.predicate.text()
    }

    pub fn predicate(&self) -> &Predicate {
        &self.predicate
    }
}

fn literal_expr(grammar: &GrammarConfig, seed: usize, neg: bool) -> Expr {
    let s = &grammar.seeds[seed];
    if neg {
        canonicalize(&Expr::negate(s.clone()))
    } else {
        s.clone()
    }
}

/// Draws `nterms` distinct seeds uniformly and negates each with
/// probability one half. `Ok(None)` signals a tautology, which is
/// discarded rather than redrawn.
pub fn sample_candidate<R: Rng + ?Sized>(
    protocol: &Protocol,
    grammar: &GrammarConfig,
    nterms: usize,
    rng: &mut R,
) -> Result<Option<CandidateInvariant>, InvGenError> {
    let n = grammar.seeds.len();
    if nterms == 0 || nterms > n {
        return Err(InvGenError::TooManyTerms { nterms, seeds: n });
    }
    let picks: Vec<(usize, bool)> = sample(rng, n, nterms)
        .into_iter()
        .map(|i| (i, rng.gen_bool(0.5)))
        .collect();
    CandidateInvariant::new(protocol, grammar, &picks)
}

/// The term count for lemma generation round `round` (1-based); rounds
/// past the end of the schedule reuse its last entry.
pub fn term_size_schedule(grammar: &GrammarConfig, round: usize) -> usize {
    let i = round.max(1) - 1;
    grammar.max_terms[i.min(grammar.max_terms.len() - 1)]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LemmaMeta {
    /// Lemma generation round that admitted the lemma.
    pub round: usize,
    /// Total draws made by the repository when the lemma was first drawn.
    pub sampled_at: u64,
}

/// Lemmas known to hold on every reachable state, in discovery order,
/// plus the ids of candidates already refuted.
#[derive(Debug, Clone, Default)]
pub struct LemmaRepository {
    lemmas: IndexMap<String, (CandidateInvariant, LemmaMeta)>,
    rejected: IndexMap<String, usize>,
    draws: u64,
}

impl LemmaRepository {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.lemmas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lemmas.is_empty()
    }

    pub fn get(&self, i: usize) -> &CandidateInvariant {
        &self.lemmas[i].0
    }

    pub fn meta(&self, i: usize) -> LemmaMeta {
        self.lemmas[i].1
    }

    pub fn iter(&self) -> impl Iterator<Item = &CandidateInvariant> {
        self.lemmas.values().map(|(c, _)| c)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.lemmas.contains_key(id)
    }

    /// Refuted candidate ids with the index of a reachable state that
    /// falsifies each.
    pub fn rejected(&self) -> impl Iterator<Item = (&str, usize)> {
        self.rejected.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn draws(&self) -> u64 {
        self.draws
    }

    /// Adds a lemma without checking it. Intended for fixtures.
    pub fn insert_unchecked(&mut self, c: CandidateInvariant, round: usize) -> bool {
        if self.lemmas.contains_key(c.id()) {
            return false;
        }
        let meta = LemmaMeta {
            round,
            sampled_at: self.draws,
        };
        self.lemmas.insert(c.id().to_string(), (c, meta));
        true
    }

    /// One lemma per line in canonical form, each preceded by a comment
    /// with its metadata.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, (c, m)) in &self.lemmas {
            let _ = writeln!(
                out,
                "# round={} sampled_at={} terms={}",
                m.round,
                m.sampled_at,
                c.literals.len()
            );
            let _ = writeln!(out, "{id}");
        }
        out
    }
}

/// Truth values of every seed under every template binding, per state.
/// Bindings are ordered with the last template variable varying fastest.
#[derive(Debug, Clone)]
pub(crate) struct SeedTable {
    words: usize,
    nseeds: usize,
    last_mask: u64,
    bits: Vec<u64>,
}

impl SeedTable {
    pub(crate) fn build(grammar: &GrammarConfig, inst: &Instance, states: &[State]) -> SeedTable {
        let envs = bindings(&grammar.template_sorts, inst);
        let nbind = envs.len();
        let words = nbind.div_ceil(64);
        let nseeds = grammar.seed_terms.len();
        let rows: Vec<Vec<u64>> = states
            .par_iter()
            .map(|s| {
                let mut row = vec![0u64; nseeds * words];
                for (k, term) in grammar.seed_terms.iter().enumerate() {
                    for (b, env) in envs.iter().enumerate() {
                        if holds_term(term, s, &mut env.clone(), inst) {
                            row[k * words + b / 64] |= 1 << (b % 64);
                        }
                    }
                }
                row
            })
            .collect();
        let rem = nbind % 64;
        SeedTable {
            words,
            nseeds,
            last_mask: if rem == 0 { u64::MAX } else { (1u64 << rem) - 1 },
            bits: rows.concat(),
        }
    }

    fn seed_bits(&self, row: usize, seed: usize) -> &[u64] {
        let at = (row * self.nseeds + seed) * self.words;
        &self.bits[at..at + self.words]
    }
}

/// Evaluates template-quantified disjunctions using a [`SeedTable`].
#[derive(Debug, Clone)]
pub(crate) struct FastEval {
    table: SeedTable,
    quants: Vec<(Quantifier, usize)>,
    all_forall: bool,
}

impl FastEval {
    pub(crate) fn new(grammar: &GrammarConfig, inst: &Instance, states: &[State]) -> FastEval {
        let quants: Vec<(Quantifier, usize)> = grammar
            .template
            .iter()
            .zip(&grammar.template_sorts)
            .map(|(t, &s)| (t.quant, inst.size(s) as usize))
            .collect();
        FastEval {
            table: SeedTable::build(grammar, inst, states),
            all_forall: quants.iter().all(|(q, _)| *q == Quantifier::Forall),
            quants,
        }
    }

    /// Truth of the candidate in the `row`-th state of the table.
    pub(crate) fn holds(&self, row: usize, literals: &[(usize, bool)]) -> bool {
        let t = &self.table;
        let mut disj = vec![0u64; t.words];
        for &(seed, neg) in literals {
            for (d, w) in disj.iter_mut().zip(t.seed_bits(row, seed)) {
                *d |= if neg { !w } else { *w };
            }
        }
        if let Some(last) = disj.last_mut() {
            *last &= t.last_mask;
        }
        if self.all_forall {
            let n = disj.len();
            return disj[..n - 1].iter().all(|w| *w == u64::MAX) && disj[n - 1] == t.last_mask;
        }
        let nbind: usize = self.quants.iter().map(|(_, n)| n).product();
        let mut vals: Vec<bool> = (0..nbind).map(|b| disj[b / 64] >> (b % 64) & 1 == 1).collect();
        for &(q, n) in self.quants.iter().rev() {
            vals = vals
                .chunks(n)
                .map(|c| match q {
                    Quantifier::Forall => c.iter().all(|v| *v),
                    Quantifier::Exists => c.iter().any(|v| *v),
                })
                .collect();
        }
        vals[0]
    }
}

/// Outcome counts for one call of [`LemmaGenerator::generate`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenStats {
    pub drawn: u64,
    pub tautologies: u64,
    pub duplicates: u64,
    pub admitted: u64,
    pub rejected: u64,
    /// (candidate, state) evaluations performed while filtering.
    pub evaluations: u64,
}

/// Samples candidates and admits those true on every reachable state.
pub struct LemmaGenerator<'a> {
    protocol: &'a Protocol,
    grammar: &'a GrammarConfig,
    reach_len: usize,
    eval: FastEval,
}

impl<'a> LemmaGenerator<'a> {
    pub fn new(
        protocol: &'a Protocol,
        inst: &Instance,
        grammar: &'a GrammarConfig,
        reach: &ReachSet,
    ) -> LemmaGenerator<'a> {
        LemmaGenerator {
            protocol,
            grammar,
            reach_len: reach.len(),
            eval: FastEval::new(grammar, inst, reach.states()),
        }
    }

    /// Index of the first reachable state falsifying `c`, and the number
    /// of states evaluated to find it.
    fn first_violation(&self, c: &CandidateInvariant) -> (Option<usize>, u64) {
        for r in 0..self.reach_len {
            if !self.eval.holds(r, &c.literals) {
                return (Some(r), r as u64 + 1);
            }
        }
        (None, self.reach_len as u64)
    }

    /// Draws `n_lemmas` candidates with `nterms` terms. Duplicates of
    /// anything already admitted, refuted or drawn earlier in this call
    /// are discarded. Survivors are appended to `repo` in draw order.
    pub fn generate<R: Rng + ?Sized>(
        &self,
        repo: &mut LemmaRepository,
        n_lemmas: usize,
        nterms: usize,
        round: usize,
        rng: &mut R,
    ) -> Result<GenStats, InvGenError> {
        let mut stats = GenStats::default();
        let mut fresh: Vec<(CandidateInvariant, u64)> = Vec::new();
        let mut seen: HashSet<String> = HashSet::new();
        for _ in 0..n_lemmas {
            stats.drawn += 1;
            repo.draws += 1;
            let Some(c) = sample_candidate(self.protocol, self.grammar, nterms, rng)? else {
                stats.tautologies += 1;
                continue;
            };
            let id = c.id();
            if repo.lemmas.contains_key(id) || repo.rejected.contains_key(id) || !seen.insert(id.to_string()) {
                stats.duplicates += 1;
                continue;
            }
            fresh.push((c, repo.draws));
        }
        let verdicts: Vec<(Option<usize>, u64)> = fresh.par_iter().map(|(c, _)| self.first_violation(c)).collect();
        for ((c, sampled_at), (violation, evals)) in fresh.into_iter().zip(verdicts) {
            stats.evaluations += evals;
            match violation {
                Some(r) => {
                    stats.rejected += 1;
                    repo.rejected.insert(c.id().to_string(), r);
                }
                None => {
                    stats.admitted += 1;
                    let meta = LemmaMeta { round, sampled_at };
                    repo.lemmas.insert(c.id().to_string(), (c, meta));
                }
            }
        }
        Ok(stats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::holds;
    use crate::reachability::compute_reach;
    use crate::spec_lang::{parse_grammar, parse_protocol};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashMap;

    const LOCK: &str = include_str!("../../../benchmarks/lockserver.proto");
    const LOCK_GRAMMAR: &str = include_str!("../../../benchmarks/lockserver.grammar");

    fn setup() -> (Protocol, Instance, GrammarConfig) {
        let p = parse_protocol(LOCK).unwrap();
        let i = Instance::parse(&p, "Server=s1,s2 Client=c1,c2").unwrap();
        let g = parse_grammar(LOCK_GRAMMAR, &p).unwrap();
        (p, i, g)
    }

    #[test]
    fn outcome_counts_per_term_size() {
        let (p, _, g) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for (nterms, expected) in [(1, 6), (2, 12), (3, 8)] {
            let ids: HashSet<String> = (0..2000)
                .filter_map(|_| sample_candidate(&p, &g, nterms, &mut rng).unwrap())
                .map(|c| c.id().to_string())
                .collect();
            assert_eq!(ids.len(), expected, "nterms={nterms}");
        }
    }

    #[test]
    fn too_many_terms_is_an_error() {
        let (p, _, g) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_candidate(&p, &g, 4, &mut rng),
            Err(InvGenError::TooManyTerms { nterms: 4, seeds: 3 })
        ));
    }

    #[test]
    fn sampling_is_reproducible() {
        let (p, _, g) = setup();
        let draw = || {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            (0..20)
                .map(|_| sample_candidate(&p, &g, 2, &mut rng).unwrap().unwrap().id().to_string())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn uniform_over_six_single_term_candidates() {
        let (p, _, g) = setup();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut counts: HashMap<String, usize> = HashMap::new();
        for _ in 0..10_000 {
            let c = sample_candidate(&p, &g, 1, &mut rng).unwrap().unwrap();
            *counts.entry(c.id().to_string()).or_default() += 1;
        }
        assert_eq!(counts.len(), 6);
        for (id, n) in counts {
            let f = n as f64 / 10_000.0;
            assert!((f - 1.0 / 6.0).abs() <= 0.02, "{id}: {f}");
        }
    }

    #[test]
    fn tautologies_are_rejected() {
        let p = parse_protocol(LOCK).unwrap();
        let g = parse_grammar(
            "template forall s: Server. forall c: Client.\nseed locked[s]\nseed ~locked[s]\n",
            &p,
        )
        .unwrap();
        assert!(CandidateInvariant::new(&p, &g, &[(0, false), (1, false)]).unwrap().is_none());
        let merged = CandidateInvariant::new(&p, &g, &[(0, true), (1, false)]).unwrap().unwrap();
        assert_eq!(merged.literals().len(), 1);
    }

    #[test]
    fn schedule_clamps() {
        let (p, _, mut g) = setup();
        assert_eq!(term_size_schedule(&g, 1), 1);
        assert_eq!(term_size_schedule(&g, 5), 3);
        g = parse_grammar(&LOCK_GRAMMAR.replace("max_terms 1,2,3", "max_terms 2"), &p).unwrap();
        assert_eq!(term_size_schedule(&g, 1), 2);
        assert_eq!(term_size_schedule(&g, 9), 2);
    }

    #[test]
    fn a1_survives_and_plain_membership_does_not() {
        let (p, i, g) = setup();
        let reach = compute_reach(&p, &i, 10_000).unwrap();
        let gen = LemmaGenerator::new(&p, &i, &g, &reach);
        let a1 = CandidateInvariant::new(&p, &g, &[(0, true), (1, true)]).unwrap().unwrap();
        assert_eq!(a1.id(), "forall s: Server. forall c: Client. ~locked[s] \\/ ~s in held[c]");
        assert_eq!(gen.first_violation(&a1).0, None);
        let member = CandidateInvariant::new(&p, &g, &[(1, false)]).unwrap().unwrap();
        assert_eq!(gen.first_violation(&member), (Some(0), 1));
    }

    #[test]
    fn fast_evaluation_agrees_with_the_evaluator() {
        let (p, i, g) = setup();
        let states: Vec<State> = crate::instance::enumerate_states(&p, &i, 100).unwrap().collect();
        let fast = FastEval::new(&g, &i, &states);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..=3);
            let Some(c) = sample_candidate(&p, &g, n, &mut rng).unwrap() else { continue };
            for (r, s) in states.iter().enumerate() {
                assert_eq!(fast.holds(r, c.literals()), holds(c.predicate(), s, &i), "{}", c.id());
            }
        }
    }

    #[test]
    fn exists_templates_reduce_correctly() {
        let p = parse_protocol(LOCK).unwrap();
        let i = Instance::parse(&p, "Server=s1,s2 Client=c1,c2").unwrap();
        let g = parse_grammar(
            "template forall s: Server. exists c: Client.\nseed locked[s]\nseed s in held[c]\n",
            &p,
        )
        .unwrap();
        let states: Vec<State> = crate::instance::enumerate_states(&p, &i, 100).unwrap().collect();
        let fast = FastEval::new(&g, &i, &states);
        for lits in [vec![(0, false), (1, false)], vec![(1, true)], vec![(0, true), (1, false)]] {
            let c = CandidateInvariant::new(&p, &g, &lits).unwrap().unwrap();
            for (r, s) in states.iter().enumerate() {
                assert_eq!(fast.holds(r, c.literals()), holds(c.predicate(), s, &i));
            }
        }
    }

    #[test]
    fn generation_is_sound_and_counts_add_up() {
        let (p, i, g) = setup();
        let reach = compute_reach(&p, &i, 10_000).unwrap();
        let gen = LemmaGenerator::new(&p, &i, &g, &reach);
        let mut repo = LemmaRepository::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut total_fresh = 0;
        for (round, nterms) in [(1, 1), (2, 2), (3, 3)] {
            let st = gen.generate(&mut repo, 300, nterms, round, &mut rng).unwrap();
            assert_eq!(st.drawn, st.tautologies + st.duplicates + st.admitted + st.rejected);
            assert!(st.evaluations <= (st.admitted + st.rejected) * reach.len() as u64);
            total_fresh += st.admitted + st.rejected;
        }
        assert!(total_fresh <= 6 + 12 + 8);
        for c in repo.iter() {
            assert!(reach.states().iter().all(|s| holds(c.predicate(), s, &i)), "{}", c.id());
        }
        for (id, r) in repo.rejected() {
            let c = p.predicate(&crate::spec_lang::parse_expr(id).unwrap()).unwrap();
            assert!(!holds(&c, &reach.states()[r], &i));
        }
        assert!(repo.contains("forall s: Server. forall c: Client. ~locked[s] \\/ ~s in held[c]"));
        assert_eq!(repo.dump().lines().count(), 2 * repo.len());
    }

    #[test]
    fn zero_draws_leave_the_repository_unchanged() {
        let (p, i, g) = setup();
        let reach = compute_reach(&p, &i, 10_000).unwrap();
        let gen = LemmaGenerator::new(&p, &i, &g, &reach);
        let mut repo = LemmaRepository::new();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let st = gen.generate(&mut repo, 0, 2, 1, &mut rng).unwrap();
        assert_eq!(st, GenStats::default());
        assert!(repo.is_empty());
    }
}
