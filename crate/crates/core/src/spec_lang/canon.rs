use super::ast::Expr;

/// Deterministic normal form: nested `/\` and `\/` are flattened, their
/// operands sorted by printed form and deduplicated, double negations
/// removed. Single-operand conjunctions and disjunctions collapse.
pub fn canonicalize(e: &Expr) -> Expr {
    let b = |x: &Expr| Box::new(canonicalize(x));
    match e {
        Expr::Not(x) => match canonicalize(x) {
            Expr::Not(inner) => *inner,
            c => Expr::Not(Box::new(c)),
        },
        Expr::And(xs) => flat(xs, true),
        Expr::Or(xs) => flat(xs, false),
        Expr::Bool(_) | Expr::Int(_) | Expr::Ident(_) => e.clone(),
        Expr::Index(a, i) => Expr::Index(b(a), b(i)),
        Expr::SetLit(xs) => Expr::SetLit(xs.iter().map(canonicalize).collect()),
        Expr::SetOp(op, x, y) => Expr::SetOp(*op, b(x), b(y)),
        Expr::In(x, y) => Expr::In(b(x), b(y)),
        Expr::Eq(x, y) => Expr::Eq(b(x), b(y)),
        Expr::Ne(x, y) => Expr::Ne(b(x), b(y)),
        Expr::Card(x) => Expr::Card(b(x)),
        Expr::Maj(x, s) => Expr::Maj(b(x), s.clone()),
        Expr::Implies(x, y) => Expr::Implies(b(x), b(y)),
        Expr::Quant(q, v, s, body) => Expr::Quant(*q, v.clone(), s.clone(), b(body)),
        Expr::MapComp(v, s, body) => Expr::MapComp(v.clone(), s.clone(), b(body)),
    }
}

fn flat(xs: &[Expr], conj: bool) -> Expr {
    let mut ops = Vec::new();
    for x in xs {
        match canonicalize(x) {
            Expr::And(inner) if conj => ops.extend(inner),
            Expr::Or(inner) if !conj => ops.extend(inner),
            c => ops.push(c),
        }
    }
    let mut keyed: Vec<(String, Expr)> = ops.into_iter().map(|e| (e.to_string(), e)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    keyed.dedup_by(|a, b| a.0 == b.0);
    let mut ops: Vec<Expr> = keyed.into_iter().map(|(_, e)| e).collect();
    if ops.len() == 1 {
        return ops.pop().unwrap();
    }
    if conj {
        Expr::And(ops)
    } else {
        Expr::Or(ops)
    }
}
