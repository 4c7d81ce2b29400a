//! Expression evaluation over concrete states and the successor relation.

use crate::instance::{fingerprint, Fingerprint, Instance, State, Value};
use crate::spec_lang::{OpenExpr, Predicate, Protocol, Term};

/// Values of bound variables (quantifier variables and action parameters)
/// as element indices, addressed by binding depth.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Env(pub Vec<u32>);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub action: usize,
    pub binding: Vec<u32>,
    pub pre: Fingerprint,
    pub post: State,
}

pub fn eval(expr: &OpenExpr, state: &State, env: &Env, inst: &Instance) -> Value {
    let mut env = env.0.clone();
    eval_term(&expr.term, state, &mut env, inst)
}

/// `state ⊨ pred` for a closed boolean predicate.
pub fn holds(pred: &Predicate, state: &State, inst: &Instance) -> bool {
    eval_term(&pred.term, state, &mut Vec::new(), inst).as_bool()
}

pub(crate) fn holds_term(term: &Term, state: &State, env: &mut Vec<u32>, inst: &Instance) -> bool {
    eval_term(term, state, env, inst).as_bool()
}

fn index(map: &Value, i: u32) -> Value {
    match map {
        Value::Map(entries) => entries[i as usize].clone(),
        other => unreachable!("indexing non-map {other:?}"),
    }
}

pub(crate) fn eval_term(t: &Term, s: &State, env: &mut Vec<u32>, inst: &Instance) -> Value {
    let ev = |t: &Term, env: &mut Vec<u32>| eval_term(t, s, env, inst);
    match t {
        Term::Const(v) => v.clone(),
        Term::Bound(level) => Value::Elem(env[*level]),
        Term::Var(i) => s.0[*i].clone(),
        Term::Index(base, i) => {
            let i = ev(i, env).as_elem();
            match &**base {
                Term::Var(v) => index(&s.0[*v], i),
                b => index(&ev(b, env), i),
            }
        }
        Term::SetLit(xs) => Value::Set(xs.iter().fold(0, |m, x| m | 1 << ev(x, env).as_elem())),
        Term::Union(a, b) => Value::Set(ev(a, env).as_set() | ev(b, env).as_set()),
        Term::Diff(a, b) => Value::Set(ev(a, env).as_set() & !ev(b, env).as_set()),
        Term::Inter(a, b) => Value::Set(ev(a, env).as_set() & ev(b, env).as_set()),
        Term::In(x, set) => {
            let x = ev(x, env).as_elem();
            Value::Bool(ev(set, env).as_set() >> x & 1 == 1)
        }
        Term::Eq(a, b) => Value::Bool(ev(a, env) == ev(b, env)),
        Term::Ne(a, b) => Value::Bool(ev(a, env) != ev(b, env)),
        Term::Card(x) => Value::Count(ev(x, env).as_set().count_ones()),
        Term::Maj(x, sort) => Value::Bool(2 * ev(x, env).as_set().count_ones() > inst.size(*sort)),
        Term::Not(x) => Value::Bool(!ev(x, env).as_bool()),
        Term::And(xs) => Value::Bool(xs.iter().all(|x| ev(x, env).as_bool())),
        Term::Or(xs) => Value::Bool(xs.iter().any(|x| ev(x, env).as_bool())),
        Term::Implies(a, b) => Value::Bool(!ev(a, env).as_bool() || ev(b, env).as_bool()),
        Term::Forall(sort, body) | Term::Exists(sort, body) => {
            let want = matches!(t, Term::Exists(..));
            let mut found = false;
            for e in 0..inst.size(*sort) {
                env.push(e);
                let v = ev(body, env).as_bool();
                env.pop();
                if v == want {
                    found = true;
                    break;
                }
            }
            Value::Bool(if want { found } else { !found })
        }
        Term::MapComp(sort, body) => {
            let entries: Vec<Value> = (0..inst.size(*sort))
                .map(|e| {
                    env.push(e);
                    let v = ev(body, env);
                    env.pop();
                    v
                })
                .collect();
            Value::Map(entries.into_boxed_slice())
        }
    }
}

/// The unique initial state.
pub fn initial_state(protocol: &Protocol, inst: &Instance) -> State {
    let empty = State(Vec::new());
    State(
        protocol
            .init_terms
            .iter()
            .map(|t| eval_term(t, &empty, &mut Vec::new(), inst))
            .collect(),
    )
}

/// Enumerates parameter bindings in lexicographic order (last parameter
/// varies fastest).
pub(crate) fn bindings(params: &[usize], inst: &Instance) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for &sort in params {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..inst.size(sort)).map(move |e| {
                    let mut b = prefix.clone();
                    b.push(e);
                    b
                })
            })
            .collect();
    }
    out
}

/// Post-state of `action` under `binding`, or `None` if its guard fails.
/// All right-hand sides read the pre-state.
pub fn apply_action(
    protocol: &Protocol,
    inst: &Instance,
    state: &State,
    action: usize,
    binding: &[u32],
) -> Option<State> {
    let a = &protocol.compiled_actions[action];
    let mut env = binding.to_vec();
    if !holds_term(&a.guard, state, &mut env, inst) {
        return None;
    }
    let writes: Vec<(usize, Option<u32>, Value)> = a
        .updates
        .iter()
        .map(|u| {
            let idx = u.index.as_ref().map(|i| eval_term(i, state, &mut env, inst).as_elem());
            (u.var, idx, eval_term(&u.rhs, state, &mut env, inst))
        })
        .collect();
    let mut post = state.clone();
    for (var, idx, v) in writes {
        match idx {
            None => post.0[var] = v,
            Some(i) => match &mut post.0[var] {
                Value::Map(entries) => entries[i as usize] = v,
                other => unreachable!("indexed update of non-map {other:?}"),
            },
        }
    }
    Some(post)
}

/// Every enabled (action, binding) pair and its post-state, in action
/// declaration order and then binding order.
pub fn successors(state: &State, protocol: &Protocol, inst: &Instance) -> Vec<Transition> {
    let pre = fingerprint(state);
    let mut out = Vec::new();
    for (ai, a) in protocol.compiled_actions.iter().enumerate() {
        for b in bindings(&a.params, inst) {
            if let Some(post) = apply_action(protocol, inst, state, ai, &b) {
                out.push(Transition {
                    action: ai,
                    binding: b,
                    pre,
                    post,
                });
            }
        }
    }
    out
}

/// Successor states only, without building transition records.
pub(crate) fn successor_states(state: &State, protocol: &Protocol, inst: &Instance) -> Vec<State> {
    let mut out = Vec::new();
    for (ai, a) in protocol.compiled_actions.iter().enumerate() {
        for b in bindings(&a.params, inst) {
            if let Some(post) = apply_action(protocol, inst, state, ai, &b) {
                out.push(post);
            }
        }
    }
    out
}

/// `Connect(c1, s2)`-style label for a transition.
pub fn transition_label(protocol: &Protocol, inst: &Instance, action: usize, binding: &[u32]) -> String {
    let a = &protocol.actions()[action];
    let args: Vec<&str> = a
        .params
        .iter()
        .zip(binding)
        .map(|((_, sort), e)| {
            let sid = protocol.sort_index(sort).expect("checked sort");
            inst.domain(sid)[*e as usize].as_str()
        })
        .collect();
    format!("{}({})", a.name, args.join(", "))
}
