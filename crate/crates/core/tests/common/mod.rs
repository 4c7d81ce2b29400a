//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::path::PathBuf;

use indinv::evaluator::{apply_action, holds, initial_state};
use indinv::instance::{Instance, State, Value};
use indinv::invgen::CandidateInvariant;
use indinv::spec_lang::{parse_grammar, parse_protocol, GrammarConfig, Predicate, Protocol, Ty};

pub const BENCHMARKS: [&str; 6] = [
    "lockserver",
    "consensus",
    "toy_consensus",
    "two_phase_commit",
    "decentralized_lock",
    "quorum_leader_election",
];

pub struct Bench {
    pub name: &'static str,
    pub protocol: Protocol,
    pub instance: Instance,
    pub grammar: GrammarConfig,
}

pub fn bench_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../benchmarks")
}

pub fn bench_file(name: &str, ext: &str) -> PathBuf {
    bench_dir().join(format!("{name}.{ext}"))
}

pub fn load(name: &'static str) -> Bench {
    let read = |ext| std::fs::read_to_string(bench_file(name, ext)).unwrap();
    let protocol = parse_protocol(&read("proto")).unwrap();
    let instance = Instance::parse(&protocol, read("instance").trim()).unwrap();
    let grammar = parse_grammar(&read("grammar"), &protocol).unwrap();
    Bench {
        name,
        protocol,
        instance,
        grammar,
    }
}

pub fn load_all() -> Vec<Bench> {
    BENCHMARKS.iter().map(|n| load(n)).collect()
}

pub fn candidate(b: &Bench, lits: &[(usize, bool)]) -> Option<CandidateInvariant> {
    CandidateInvariant::new(&b.protocol, &b.grammar, lits).unwrap()
}

fn product<T: Clone>(choices: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![vec![]];
    for c in choices {
        let mut next = Vec::new();
        for prefix in &out {
            for x in c {
                let mut p = prefix.clone();
                p.push(x.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

fn values(ty: &Ty, p: &Protocol, i: &Instance) -> Vec<Value> {
    match ty {
        Ty::Bool => vec![Value::Bool(false), Value::Bool(true)],
        Ty::Elem(s) => (0..i.size(*s)).map(Value::Elem).collect(),
        Ty::Enum(e) => (0..p.enum_labels(*e).len() as u32).map(Value::Enum).collect(),
        Ty::Set(s) => (0..1u64 << i.size(*s)).map(Value::Set).collect(),
        Ty::Map(s, elem) => {
            let per = values(elem, p, i);
            product(&vec![per; i.size(*s) as usize])
                .into_iter()
                .map(|v| Value::Map(v.into_boxed_slice()))
                .collect()
        }
        other => panic!("unexpected state type {other:?}"),
    }
}

/// Every type-correct state, built as a plain cartesian product.
pub fn all_states(p: &Protocol, i: &Instance) -> Vec<State> {
    let per: Vec<Vec<Value>> = p.var_types().map(|t| values(t, p, i)).collect();
    product(&per).into_iter().map(State).collect()
}

/// All (action, binding, post) steps out of `s`.
pub fn steps(p: &Protocol, i: &Instance, s: &State) -> Vec<(usize, Vec<u32>, State)> {
    let mut out = Vec::new();
    for (a, decl) in p.actions().iter().enumerate() {
        let doms: Vec<Vec<u32>> = decl
            .params
            .iter()
            .map(|(_, sort)| (0..i.size(p.sort_index(sort).unwrap())).collect())
            .collect();
        for b in product(&doms) {
            if let Some(post) = apply_action(p, i, s, a, &b) {
                out.push((a, b, post));
            }
        }
    }
    out
}

#[derive(Debug, PartialEq, Eq)]
pub struct OracleVerdict {
    pub initiation: bool,
    pub consecution: bool,
    pub strengthening: bool,
}

/// Straight-line induction check over the full state space.
pub fn oracle_check(p: &Protocol, i: &Instance, ind: &[Predicate], states: &[State]) -> OracleVerdict {
    let all = |s: &State| ind.iter().all(|c| holds(c, s, i));
    let safe = p.safety_predicate();
    let init = initial_state(p, i);
    let mut consecution = true;
    let mut strengthening = true;
    for s in states {
        if !all(s) {
            continue;
        }
        if !holds(&safe, s, i) {
            strengthening = false;
        }
        if steps(p, i, s).iter().any(|(_, _, post)| !all(post)) {
            consecution = false;
        }
    }
    OracleVerdict {
        initiation: all(&init),
        consecution,
        strengthening,
    }
}
