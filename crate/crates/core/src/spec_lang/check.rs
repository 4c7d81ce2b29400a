//! Name resolution and type checking. A successful check yields the
//! compiled [`Term`] alongside the inferred type.

use std::collections::HashMap;

use super::ast::*;
use super::term::{Term, Ty};
use super::SpecError;
use crate::instance::Value;

pub(crate) struct Scope<'a> {
    pub sorts: &'a [String],
    pub vars: &'a [(String, Ty)],
    pub enums: &'a [Vec<String>],
    pub labels: &'a HashMap<String, (usize, u32)>,
    pub allow_state: bool,
}

impl Scope<'_> {
    pub fn sort_id(&self, name: &str) -> Result<usize, SpecError> {
        self.sorts
            .iter()
            .position(|s| s == name)
            .ok_or_else(|| SpecError::UnknownSort(name.to_string()))
    }

    pub fn ty_name(&self, ty: &Ty) -> String {
        match ty {
            Ty::Bool => "bool".into(),
            Ty::Elem(s) => self.sorts[*s].clone(),
            Ty::Enum(e) => format!("enum {{{}}}", self.enums[*e].join(", ")),
            Ty::Set(s) => format!("set<{}>", self.sorts[*s]),
            Ty::Map(s, t) => format!("map<{}> -> {}", self.sorts[*s], self.ty_name(t)),
            Ty::Count => "cardinality".into(),
            Ty::EmptySet => "set".into(),
        }
    }

    fn mismatch(&self, e: &Expr, expected: &str, found: &Ty) -> SpecError {
        SpecError::Type {
            expr: e.to_string(),
            expected: expected.to_string(),
            found: self.ty_name(found),
        }
    }

    fn is_global(&self, name: &str) -> bool {
        self.sorts.iter().any(|s| s == name)
            || self.vars.iter().any(|(v, _)| v == name)
            || self.labels.contains_key(name)
    }

    pub fn bind(&self, bound: &mut Vec<(String, usize)>, name: &str, sort: &str) -> Result<(), SpecError> {
        if self.is_global(name) {
            return Err(SpecError::Duplicate(name.to_string()));
        }
        let id = self.sort_id(sort)?;
        bound.push((name.to_string(), id));
        Ok(())
    }

    pub fn check(&self, e: &Expr, expected: &Ty, bound: &mut Vec<(String, usize)>) -> Result<Term, SpecError> {
        let (ty, term) = self.infer(e, bound)?;
        if !ty.compatible(expected) {
            return Err(self.mismatch(e, &self.ty_name(expected), &ty));
        }
        Ok(term)
    }

    fn boolean(&self, e: &Expr, bound: &mut Vec<(String, usize)>) -> Result<Term, SpecError> {
        self.check(e, &Ty::Bool, bound)
    }

    fn set_sort(&self, e: &Expr, ty: &Ty) -> Result<Option<usize>, SpecError> {
        match ty {
            Ty::Set(s) => Ok(Some(*s)),
            Ty::EmptySet => Ok(None),
            t => Err(self.mismatch(e, "set", t)),
        }
    }

    pub fn infer(&self, e: &Expr, bound: &mut Vec<(String, usize)>) -> Result<(Ty, Term), SpecError> {
        Ok(match e {
            Expr::Bool(b) => (Ty::Bool, Term::Const(Value::Bool(*b))),
            Expr::Int(n) => (Ty::Count, Term::Const(Value::Count(*n))),
            Expr::Ident(name) => {
                if let Some(level) = bound.iter().rposition(|(n, _)| n == name) {
                    (Ty::Elem(bound[level].1), Term::Bound(level))
                } else if let Some(i) = self.vars.iter().position(|(v, _)| v == name) {
                    if !self.allow_state {
                        return Err(SpecError::Invalid(format!(
                            "state variable `{name}` may not appear in an initial value"
                        )));
                    }
                    (self.vars[i].1.clone(), Term::Var(i))
                } else if let Some(&(id, idx)) = self.labels.get(name) {
                    (Ty::Enum(id), Term::Const(Value::Enum(idx)))
                } else {
                    return Err(SpecError::Unbound(name.clone()));
                }
            }
            Expr::Index(base, idx) => {
                let (tb, mb) = self.infer(base, bound)?;
                let Ty::Map(s, elem) = tb else {
                    return Err(self.mismatch(base, "map", &tb));
                };
                let mi = self.check(idx, &Ty::Elem(s), bound)?;
                (*elem, Term::Index(Box::new(mb), Box::new(mi)))
            }
            Expr::SetLit(xs) if xs.is_empty() => (Ty::EmptySet, Term::Const(Value::Set(0))),
            Expr::SetLit(xs) => {
                let (t0, _) = self.infer(&xs[0], bound)?;
                let Ty::Elem(s) = t0 else {
                    return Err(self.mismatch(&xs[0], "sort element", &t0));
                };
                let terms = xs
                    .iter()
                    .map(|x| self.check(x, &Ty::Elem(s), bound))
                    .collect::<Result<Vec<_>, _>>()?;
                (Ty::Set(s), Term::SetLit(terms))
            }
            Expr::SetOp(op, a, b) => {
                let (ta, ma) = self.infer(a, bound)?;
                let (tb, mb) = self.infer(b, bound)?;
                let sa = self.set_sort(a, &ta)?;
                let sb = self.set_sort(b, &tb)?;
                if let (Some(x), Some(y)) = (sa, sb) {
                    if x != y {
                        return Err(self.mismatch(e, &self.ty_name(&ta), &tb));
                    }
                }
                let ty = ta.join(&tb);
                let term = match op {
                    SetOp::Union => Term::Union(Box::new(ma), Box::new(mb)),
                    SetOp::Difference => Term::Diff(Box::new(ma), Box::new(mb)),
                    SetOp::Intersection => Term::Inter(Box::new(ma), Box::new(mb)),
                };
                (ty, term)
            }
            Expr::In(x, s) => {
                let (tx, mx) = self.infer(x, bound)?;
                let Ty::Elem(k) = tx else {
                    return Err(self.mismatch(x, "sort element", &tx));
                };
                let ms = self.check(s, &Ty::Set(k), bound)?;
                (Ty::Bool, Term::In(Box::new(mx), Box::new(ms)))
            }
            Expr::Eq(a, b) | Expr::Ne(a, b) => {
                let (ta, ma) = self.infer(a, bound)?;
                let (tb, mb) = self.infer(b, bound)?;
                if !ta.compatible(&tb) {
                    return Err(self.mismatch(b, &self.ty_name(&ta), &tb));
                }
                let term = if matches!(e, Expr::Eq(..)) {
                    Term::Eq(Box::new(ma), Box::new(mb))
                } else {
                    Term::Ne(Box::new(ma), Box::new(mb))
                };
                (Ty::Bool, term)
            }
            Expr::Card(s) => {
                let (ts, ms) = self.infer(s, bound)?;
                self.set_sort(s, &ts)?;
                (Ty::Count, Term::Card(Box::new(ms)))
            }
            Expr::Maj(s, sort) => {
                let id = self.sort_id(sort)?;
                let ms = self.check(s, &Ty::Set(id), bound)?;
                (Ty::Bool, Term::Maj(Box::new(ms), id))
            }
            Expr::Not(x) => (Ty::Bool, Term::Not(Box::new(self.boolean(x, bound)?))),
            Expr::And(xs) => (
                Ty::Bool,
                Term::And(xs.iter().map(|x| self.boolean(x, bound)).collect::<Result<_, _>>()?),
            ),
            Expr::Or(xs) => (
                Ty::Bool,
                Term::Or(xs.iter().map(|x| self.boolean(x, bound)).collect::<Result<_, _>>()?),
            ),
            Expr::Implies(a, b) => (
                Ty::Bool,
                Term::Implies(Box::new(self.boolean(a, bound)?), Box::new(self.boolean(b, bound)?)),
            ),
            Expr::Quant(q, x, sort, body) => {
                self.bind(bound, x, sort)?;
                let id = bound.last().unwrap().1;
                let mb = self.boolean(body, bound);
                bound.pop();
                let mb = Box::new(mb?);
                let term = match q {
                    Quantifier::Forall => Term::Forall(id, mb),
                    Quantifier::Exists => Term::Exists(id, mb),
                };
                (Ty::Bool, term)
            }
            Expr::MapComp(x, sort, body) => {
                self.bind(bound, x, sort)?;
                let id = bound.last().unwrap().1;
                let r = self.infer(body, bound);
                bound.pop();
                let (tb, mb) = r?;
                if matches!(tb, Ty::Map(..) | Ty::Count) {
                    return Err(self.mismatch(body, "bool, element, enum or set", &tb));
                }
                (Ty::Map(id, Box::new(tb)), Term::MapComp(id, Box::new(mb)))
            }
        })
    }
}
