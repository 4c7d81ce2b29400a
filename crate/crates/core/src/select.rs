//! Greedy lemma selection by the number of CTIs each lemma eliminates.

use fixedbitset::FixedBitSet;
use rayon::prelude::*;

use crate::ctigen::Cti;
use crate::evaluator::holds;
use crate::instance::{Fingerprint, Instance, State};
use crate::invgen::{CandidateInvariant, FastEval, LemmaRepository};
use crate::spec_lang::GrammarConfig;

/// `lemma` eliminates `cti` when the CTI's state falsifies it.
pub fn eliminates(lemma: &CandidateInvariant, cti: &Cti, inst: &Instance) -> bool {
    !holds(lemma.predicate(), &cti.state, inst)
}

/// Row `l`, column `c` is set iff lemma `l` of the repository eliminates
/// CTI `c`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ElimMatrix {
    rows: Vec<FixedBitSet>,
    cols: Vec<Fingerprint>,
}

impl ElimMatrix {
    pub fn build(repo: &LemmaRepository, ctis: &[Cti], grammar: &GrammarConfig, inst: &Instance) -> ElimMatrix {
        let states: Vec<State> = ctis.iter().map(|c| c.state.clone()).collect();
        let fast = FastEval::new(grammar, inst, &states);
        let rows = (0..repo.len())
            .into_par_iter()
            .map(|l| {
                let lits = repo.get(l).literals();
                let mut row = FixedBitSet::with_capacity(ctis.len());
                for c in 0..ctis.len() {
                    if !fast.holds(c, lits) {
                        row.insert(c);
                    }
                }
                row
            })
            .collect();
        ElimMatrix {
            rows,
            cols: ctis.iter().map(|c| c.fingerprint).collect(),
        }
    }

    pub fn lemmas(&self) -> usize {
        self.rows.len()
    }

    pub fn ctis(&self) -> usize {
        self.cols.len()
    }

    pub fn cell(&self, lemma: usize, cti: usize) -> bool {
        self.rows[lemma].contains(cti)
    }

    pub fn count(&self, lemma: usize) -> usize {
        self.rows[lemma].count_ones(..)
    }

    /// Fingerprints of the CTIs lemma `lemma` eliminates.
    pub fn eliminated(&self, lemma: usize) -> Vec<Fingerprint> {
        self.rows[lemma].ones().map(|c| self.cols[c]).collect()
    }

    /// CTIs no lemma eliminates.
    pub fn uncoverable(&self) -> usize {
        let mut any = FixedBitSet::with_capacity(self.cols.len());
        for r in &self.rows {
            any.union_with(r);
        }
        self.cols.len() - any.count_ones(..)
    }
}

/// The lemma picked by [`choose_greedy`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    /// Position of the lemma in the repository.
    pub index: usize,
    pub id: String,
    pub eliminated: Vec<Fingerprint>,
}

/// Index of the lemma eliminating the most CTIs, ignoring lemmas whose id
/// appears in `exclude`. Ties go to fewer literals, then the smaller id.
/// `None` when no eligible lemma eliminates anything.
pub fn pick_max(matrix: &ElimMatrix, repo: &LemmaRepository, exclude: &[&str]) -> Option<usize> {
    let mut best: Option<(usize, usize)> = None;
    for l in 0..matrix.lemmas() {
        let c = repo.get(l);
        let n = matrix.count(l);
        if n == 0 || exclude.contains(&c.id()) {
            continue;
        }
        let better = match best {
            None => true,
            Some((b, bn)) => {
                let bc = repo.get(b);
                (n, std::cmp::Reverse(c.literals().len()), std::cmp::Reverse(c.id()))
                    > (bn, std::cmp::Reverse(bc.literals().len()), std::cmp::Reverse(bc.id()))
            }
        };
        if better {
            best = Some((l, n));
        }
    }
    best.map(|(l, _)| l)
}

pub fn choose_greedy(
    repo: &LemmaRepository,
    ctis: &[Cti],
    grammar: &GrammarConfig,
    inst: &Instance,
    exclude: &[&str],
) -> Option<Selection> {
    let m = ElimMatrix::build(repo, ctis, grammar, inst);
    pick_max(&m, repo, exclude).map(|l| Selection {
        index: l,
        id: repo.get(l).id().to_string(),
        eliminated: m.eliminated(l),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverReport {
    /// (lemma id, eliminated count) in repository order.
    pub counts: Vec<(String, usize)>,
    pub cells: usize,
    pub uncoverable: usize,
}

pub fn cover_report(repo: &LemmaRepository, ctis: &[Cti], grammar: &GrammarConfig, inst: &Instance) -> CoverReport {
    let m = ElimMatrix::build(repo, ctis, grammar, inst);
    CoverReport {
        counts: (0..m.lemmas()).map(|l| (repo.get(l).id().to_string(), m.count(l))).collect(),
        cells: m.lemmas() * m.ctis(),
        uncoverable: m.uncoverable(),
    }
}
