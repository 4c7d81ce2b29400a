//! Surface syntax trees for protocols and grammar configurations.

use std::fmt;

/// Declared type of a state variable or expression.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ValueType {
    Bool,
    Elem(String),
    Enum(Vec<String>),
    Set(String),
    /// Sort-indexed map. The element type is never itself a map.
    Map(String, Box<ValueType>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Quantifier {
    Forall,
    Exists,
}

impl Quantifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Quantifier::Forall => "forall",
            Quantifier::Exists => "exists",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SetOp {
    Union,
    Difference,
    Intersection,
}

impl SetOp {
    pub fn symbol(self) -> &'static str {
        match self {
            SetOp::Union => "+",
            SetOp::Difference => "-",
            SetOp::Intersection => "&",
        }
    }
}

/// Expression tree. Identifiers are resolved during type checking: an
/// `Ident` may name a bound variable, an action parameter, a state variable
/// or an enum label.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Bool(bool),
    /// Natural-number literal, only comparable against cardinalities.
    Int(u32),
    Ident(String),
    Index(Box<Expr>, Box<Expr>),
    SetLit(Vec<Expr>),
    SetOp(SetOp, Box<Expr>, Box<Expr>),
    In(Box<Expr>, Box<Expr>),
    Eq(Box<Expr>, Box<Expr>),
    Ne(Box<Expr>, Box<Expr>),
    Card(Box<Expr>),
    /// `maj(e, Sort)`: `2 * |e| > |Sort|`.
    Maj(Box<Expr>, String),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    Implies(Box<Expr>, Box<Expr>),
    Quant(Quantifier, String, String, Box<Expr>),
    /// `[forall x: Sort. e]`, a map built pointwise.
    MapComp(String, String, Box<Expr>),
}

impl Expr {
    pub fn ident(name: &str) -> Expr {
        Expr::Ident(name.to_string())
    }

    pub fn negate(e: Expr) -> Expr {
        Expr::Not(Box::new(e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: ValueType,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Update {
    pub var: String,
    pub index: Option<Expr>,
    pub rhs: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionDecl {
    pub name: String,
    pub params: Vec<(String, String)>,
    pub guard: Expr,
    pub updates: Vec<Update>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateVar {
    pub quant: Quantifier,
    pub var: String,
    pub sort: String,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ValueType::Bool => write!(f, "bool"),
            ValueType::Elem(s) => write!(f, "{s}"),
            ValueType::Enum(labels) => write!(f, "enum {{{}}}", labels.join(", ")),
            ValueType::Set(s) => write!(f, "set<{s}>"),
            ValueType::Map(s, t) => write!(f, "map<{s}> -> {t}"),
        }
    }
}
