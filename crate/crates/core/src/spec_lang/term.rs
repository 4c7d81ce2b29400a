use crate::instance::Value;

/// Resolved type: sorts and enums are referenced by index into the
/// protocol's declaration tables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Ty {
    Bool,
    Elem(usize),
    Enum(usize),
    Set(usize),
    Map(usize, Box<Ty>),
    /// Result of `|e|`; never the type of a state variable.
    Count,
    /// Type of `{}` before it meets a context that fixes its sort.
    EmptySet,
}

impl Ty {
    pub(crate) fn compatible(&self, other: &Ty) -> bool {
        match (self, other) {
            (Ty::Set(_), Ty::EmptySet) | (Ty::EmptySet, Ty::Set(_)) => true,
            (Ty::Map(s, a), Ty::Map(t, b)) => s == t && a.compatible(b),
            _ => self == other,
        }
    }

    /// The more specific of two compatible types.
    pub(crate) fn join(&self, other: &Ty) -> Ty {
        match (self, other) {
            (Ty::EmptySet, t) | (t, Ty::EmptySet) => t.clone(),
            (Ty::Map(s, a), Ty::Map(_, b)) => Ty::Map(*s, Box::new(a.join(b))),
            (t, _) => t.clone(),
        }
    }
}

/// Expression compiled against a protocol: names resolved to slots.
/// Bound variables use de Bruijn levels into the evaluation environment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Term {
    Const(Value),
    Bound(usize),
    Var(usize),
    Index(Box<Term>, Box<Term>),
    SetLit(Vec<Term>),
    Union(Box<Term>, Box<Term>),
    Diff(Box<Term>, Box<Term>),
    Inter(Box<Term>, Box<Term>),
    In(Box<Term>, Box<Term>),
    Eq(Box<Term>, Box<Term>),
    Ne(Box<Term>, Box<Term>),
    Card(Box<Term>),
    Maj(Box<Term>, usize),
    Not(Box<Term>),
    And(Vec<Term>),
    Or(Vec<Term>),
    Implies(Box<Term>, Box<Term>),
    Forall(usize, Box<Term>),
    Exists(usize, Box<Term>),
    MapComp(usize, Box<Term>),
}
