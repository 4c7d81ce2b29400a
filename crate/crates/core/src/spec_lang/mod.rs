//! Protocol and grammar description language: parsing, type checking,
//! printing and canonicalization.
//!
//! Everything produced here is immutable once built and can be shared
//! freely across threads.

mod ast;
mod canon;
mod check;
mod lexer;
mod parser;
mod print;
mod term;

use std::collections::{HashMap, HashSet};

use sha2::{Digest, Sha256};
use thiserror::Error;

pub use ast::{ActionDecl, Expr, Quantifier, SetOp, TemplateVar, Update, ValueType, VarDecl};
pub use canon::canonicalize;
pub use term::Ty;

pub(crate) use term::Term;

use check::Scope;
use parser::Parser;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum SpecError {
    #[error("{line}:{col}: syntax error: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("type error in `{expr}`: expected {expected}, found {found}")]
    Type {
        expr: String,
        expected: String,
        found: String,
    },
    #[error("duplicate name `{0}`")]
    Duplicate(String),
    #[error("variable `{0}` has no init")]
    UncoveredInit(String),
    #[error("unbound name `{0}`")]
    Unbound(String),
    #[error("unknown sort `{0}`")]
    UnknownSort(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CompiledUpdate {
    pub var: usize,
    pub index: Option<Term>,
    pub rhs: Term,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct CompiledAction {
    pub params: Vec<usize>,
    pub guard: Term,
    pub updates: Vec<CompiledUpdate>,
}

/// A parsed and type-checked protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Protocol {
    sorts: Vec<String>,
    vars: Vec<VarDecl>,
    init: Vec<(String, Expr)>,
    actions: Vec<ActionDecl>,
    safety_name: String,
    safety: Expr,
    enums: Vec<Vec<String>>,
    labels: HashMap<String, (usize, u32)>,
    var_types: Vec<(String, Ty)>,
    pub(crate) init_terms: Vec<Term>,
    pub(crate) compiled_actions: Vec<CompiledAction>,
    safety_term: Term,
}

/// A closed boolean expression compiled against a protocol.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Predicate {
    expr: Expr,
    text: String,
    pub(crate) term: Term,
}

impl Predicate {
    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Printed form; canonical when the predicate was built from a
    /// canonical expression.
    pub fn text(&self) -> &str {
        &self.text
    }
}

/// An expression with free variables bound to sorts, e.g. a grammar seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OpenExpr {
    pub expr: Expr,
    pub ty: Ty,
    pub(crate) term: Term,
}

/// Quantifier template plus seed predicates for candidate generation.
#[derive(Debug, Clone)]
pub struct GrammarConfig {
    pub template: Vec<TemplateVar>,
    /// Canonicalized, duplicate-free seeds.
    pub seeds: Vec<Expr>,
    /// Increasing term-count schedule.
    pub max_terms: Vec<usize>,
    pub(crate) seed_terms: Vec<Term>,
    pub(crate) template_sorts: Vec<usize>,
    pub warnings: Vec<String>,
}

impl PartialEq for GrammarConfig {
    fn eq(&self, other: &Self) -> bool {
        self.template == other.template
            && self.seeds == other.seeds
            && self.max_terms == other.max_terms
    }
}

const DEFAULT_MAX_TERMS: [usize; 3] = [1, 2, 3];

pub fn parse_protocol(text: &str) -> Result<Protocol, SpecError> {
    let raw = Parser::new(text)?.protocol()?;
    Protocol::build(raw)
}

pub fn parse_grammar(text: &str, protocol: &Protocol) -> Result<GrammarConfig, SpecError> {
    let raw = Parser::new(text)?.grammar()?;
    let scope = protocol.scope(true);
    let mut bound = Vec::new();
    for t in &raw.template {
        if bound.iter().any(|(n, _): &(String, usize)| *n == t.var) {
            return Err(SpecError::Duplicate(t.var.clone()));
        }
        scope.bind(&mut bound, &t.var, &t.sort)?;
    }
    let template_sorts = bound.iter().map(|(_, s)| *s).collect();

    let mut seen = HashSet::new();
    let mut seeds = Vec::new();
    let mut seed_terms = Vec::new();
    let mut warnings = Vec::new();
    for s in &raw.seeds {
        let c = canonicalize(s);
        let term = scope.check(&c, &Ty::Bool, &mut bound)?;
        if !seen.insert(c.to_string()) {
            warnings.push(format!("duplicate seed `{c}` ignored"));
            continue;
        }
        seeds.push(c);
        seed_terms.push(term);
    }
    if seeds.is_empty() {
        return Err(SpecError::Invalid("grammar declares no seeds".into()));
    }
    let max_terms = raw.max_terms.unwrap_or_else(|| DEFAULT_MAX_TERMS.to_vec());
    if max_terms.is_empty() || max_terms[0] == 0 || max_terms.windows(2).any(|w| w[0] >= w[1]) {
        return Err(SpecError::Invalid(
            "max_terms must be a strictly increasing list of positive integers".into(),
        ));
    }
    Ok(GrammarConfig {
        template: raw.template,
        seeds,
        max_terms,
        seed_terms,
        template_sorts,
        warnings,
    })
}

/// Parses a sequence of closed boolean expressions (one conjunct each).
pub fn parse_conjuncts(text: &str, protocol: &Protocol) -> Result<Vec<Predicate>, SpecError> {
    let mut p = Parser::new(text)?;
    let mut out = Vec::new();
    while !p.at_eof() {
        let e = p.expr()?;
        out.push(protocol.predicate(&e)?);
    }
    Ok(out)
}

/// Parses one closed boolean expression.
pub fn parse_expr(text: &str) -> Result<Expr, SpecError> {
    let mut p = Parser::new(text)?;
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

impl Protocol {
    fn build(raw: parser::RawProtocol) -> Result<Protocol, SpecError> {
        let mut globals = HashSet::new();
        let mut claim = |name: &str| {
            if globals.insert(name.to_string()) {
                Ok(())
            } else {
                Err(SpecError::Duplicate(name.to_string()))
            }
        };
        for s in &raw.sorts {
            claim(s)?;
        }
        for v in &raw.vars {
            claim(&v.name)?;
        }
        for a in &raw.actions {
            claim(&a.name)?;
        }
        let (safety_name, safety) = match raw.safety.len() {
            1 => raw.safety.into_iter().next().unwrap(),
            0 => return Err(SpecError::Invalid("missing safety declaration".into())),
            _ => return Err(SpecError::Invalid("exactly one safety declaration is allowed".into())),
        };
        claim(&safety_name)?;

        let mut enums: Vec<Vec<String>> = Vec::new();
        let mut labels: HashMap<String, (usize, u32)> = HashMap::new();
        let mut var_types = Vec::new();
        for v in &raw.vars {
            let ty = resolve_type(&v.ty, &raw.sorts, &mut enums, &mut labels, false)?;
            var_types.push((v.name.clone(), ty));
        }
        for l in labels.keys() {
            claim(l)?;
        }

        let mut p = Protocol {
            sorts: raw.sorts,
            vars: raw.vars,
            init: raw.init,
            actions: raw.actions,
            safety_name,
            safety,
            enums,
            labels,
            var_types,
            init_terms: vec![],
            compiled_actions: vec![],
            safety_term: Term::Const(crate::instance::Value::Bool(true)),
        };

        let mut init_terms: Vec<Option<Term>> = vec![None; p.vars.len()];
        {
            let scope = p.scope(false);
            for (name, e) in &p.init {
                let i = p
                    .var_index(name)
                    .ok_or_else(|| SpecError::Unbound(name.clone()))?;
                if init_terms[i].is_some() {
                    return Err(SpecError::Duplicate(format!("init {name}")));
                }
                init_terms[i] = Some(scope.check(e, &p.var_types[i].1, &mut vec![])?);
            }
        }
        p.init_terms = init_terms
            .into_iter()
            .enumerate()
            .map(|(i, t)| t.ok_or_else(|| SpecError::UncoveredInit(p.vars[i].name.clone())))
            .collect::<Result<_, _>>()?;

        let scope = p.scope(true);
        let mut compiled = Vec::new();
        for a in &p.actions {
            let mut bound = Vec::new();
            for (x, s) in &a.params {
                if bound.iter().any(|(n, _): &(String, usize)| n == x) {
                    return Err(SpecError::Duplicate(x.clone()));
                }
                scope.bind(&mut bound, x, s)?;
            }
            let guard = scope.check(&a.guard, &Ty::Bool, &mut bound)?;
            let mut touched = HashSet::new();
            let mut updates = Vec::new();
            for u in &a.updates {
                let var = p
                    .var_index(&u.var)
                    .ok_or_else(|| SpecError::Unbound(u.var.clone()))?;
                if !touched.insert(var) {
                    return Err(SpecError::Duplicate(format!(
                        "update of `{}` in action {}",
                        u.var, a.name
                    )));
                }
                let vty = &p.var_types[var].1;
                let (index, target) = match (&u.index, vty) {
                    (Some(i), Ty::Map(s, elem)) => {
                        (Some(scope.check(i, &Ty::Elem(*s), &mut bound)?), (**elem).clone())
                    }
                    (Some(_), other) => {
                        return Err(SpecError::Type {
                            expr: u.var.clone(),
                            expected: "map".into(),
                            found: scope.ty_name(other),
                        })
                    }
                    (None, t) => (None, t.clone()),
                };
                let rhs = scope.check(&u.rhs, &target, &mut bound)?;
                updates.push(CompiledUpdate { var, index, rhs });
            }
            compiled.push(CompiledAction {
                params: bound.iter().map(|(_, s)| *s).collect(),
                guard,
                updates,
            });
        }
        let safety_term = scope.check(&p.safety, &Ty::Bool, &mut vec![])?;
        p.compiled_actions = compiled;
        p.safety_term = safety_term;
        Ok(p)
    }

    pub(crate) fn scope(&self, allow_state: bool) -> Scope<'_> {
        Scope {
            sorts: &self.sorts,
            vars: &self.var_types,
            enums: &self.enums,
            labels: &self.labels,
            allow_state,
        }
    }

    pub fn sorts(&self) -> &[String] {
        &self.sorts
    }

    pub fn sort_index(&self, name: &str) -> Option<usize> {
        self.sorts.iter().position(|s| s == name)
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.vars.iter().position(|v| v.name == name)
    }

    /// Resolved type of each state variable, in declaration order.
    pub fn var_types(&self) -> impl Iterator<Item = &Ty> {
        self.var_types.iter().map(|(_, t)| t)
    }

    pub fn enum_labels(&self, id: usize) -> &[String] {
        &self.enums[id]
    }

    pub fn init_decls(&self) -> &[(String, Expr)] {
        &self.init
    }

    pub fn actions(&self) -> &[ActionDecl] {
        &self.actions
    }

    pub fn safety_name(&self) -> &str {
        &self.safety_name
    }

    pub fn safety(&self) -> &Expr {
        &self.safety
    }

    pub fn safety_predicate(&self) -> Predicate {
        Predicate {
            text: self.safety.to_string(),
            expr: self.safety.clone(),
            term: self.safety_term.clone(),
        }
    }

    /// Type checks a closed boolean expression.
    pub fn predicate(&self, e: &Expr) -> Result<Predicate, SpecError> {
        let term = self.scope(true).check(e, &Ty::Bool, &mut vec![])?;
        Ok(Predicate {
            text: e.to_string(),
            expr: e.clone(),
            term,
        })
    }

    /// Type checks an expression whose free variables are `binders`
    /// (name, sort) in order; they occupy environment slots 0.. in order.
    pub fn open_expr(&self, e: &Expr, binders: &[(String, String)]) -> Result<OpenExpr, SpecError> {
        let scope = self.scope(true);
        let mut bound = Vec::new();
        for (x, s) in binders {
            scope.bind(&mut bound, x, s)?;
        }
        let (ty, term) = scope.infer(e, &mut bound)?;
        Ok(OpenExpr {
            expr: e.clone(),
            ty,
            term,
        })
    }

    /// SHA-256 of the printed protocol, hex encoded.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.to_string().as_bytes()))
    }
}

fn resolve_type(
    ty: &ValueType,
    sorts: &[String],
    enums: &mut Vec<Vec<String>>,
    labels: &mut HashMap<String, (usize, u32)>,
    in_map: bool,
) -> Result<Ty, SpecError> {
    let sort = |s: &String| {
        sorts
            .iter()
            .position(|x| x == s)
            .ok_or_else(|| SpecError::UnknownSort(s.clone()))
    };
    Ok(match ty {
        ValueType::Bool => Ty::Bool,
        ValueType::Elem(s) => Ty::Elem(sort(s)?),
        ValueType::Set(s) => Ty::Set(sort(s)?),
        ValueType::Map(s, elem) => {
            if in_map {
                return Err(SpecError::Invalid("maps of maps are not supported".into()));
            }
            Ty::Map(sort(s)?, Box::new(resolve_type(elem, sorts, enums, labels, true)?))
        }
        ValueType::Enum(ls) => {
            let mut seen = HashSet::new();
            if let Some(d) = ls.iter().find(|l| !seen.insert(*l)) {
                return Err(SpecError::Duplicate(d.clone()));
            }
            if let Some(id) = enums.iter().position(|e| e == ls) {
                return Ok(Ty::Enum(id));
            }
            let id = enums.len();
            for (k, l) in ls.iter().enumerate() {
                if labels.insert(l.clone(), (id, k as u32)).is_some() {
                    return Err(SpecError::Invalid(format!(
                        "enum label `{l}` appears in two different enum types"
                    )));
                }
            }
            enums.push(ls.clone());
            Ty::Enum(id)
        }
    })
}
