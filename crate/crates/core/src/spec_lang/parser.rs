//! Recursive descent parser for protocol, grammar and conjunct files.
//!
//! Precedence, loosest first: quantifiers, `->` (right associative), `\/`,
//! `/\`, `~`, comparisons (`=`, `!=`, `in`), `+`/`-`, `&`, indexing.

use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::SpecError;

pub(crate) const RESERVED: &[&str] = &[
    "sort", "var", "init", "action", "safety", "require", "forall", "exists", "true", "false",
    "in", "maj", "enum", "set", "map", "bool", "template", "seed", "max_terms",
];

pub(crate) struct RawProtocol {
    pub sorts: Vec<String>,
    pub vars: Vec<VarDecl>,
    pub init: Vec<(String, Expr)>,
    pub actions: Vec<ActionDecl>,
    pub safety: Vec<(String, Expr)>,
}

pub(crate) struct RawGrammar {
    pub template: Vec<TemplateVar>,
    pub seeds: Vec<Expr>,
    pub max_terms: Option<Vec<usize>>,
}

pub(crate) struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    pub fn new(src: &str) -> Result<Self, SpecError> {
        Ok(Parser {
            toks: tokenize(src)?,
            pos: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        let i = (self.pos + k).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, SpecError> {
        let t = &self.toks[self.pos];
        Err(SpecError::Syntax {
            line: t.line,
            col: t.col,
            msg: msg.into(),
        })
    }

    fn describe(&self) -> String {
        match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Int(n) => format!("`{n}`"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::Eof => "end of input".to_string(),
        }
    }

    fn is_kw(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn is_sym(&self, sym: &str) -> bool {
        matches!(self.peek(), Tok::Sym(s) if *s == sym)
    }

    fn eat_sym(&mut self, sym: &str) -> bool {
        if self.is_sym(sym) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, sym: &str) -> Result<(), SpecError> {
        if self.eat_sym(sym) {
            Ok(())
        } else {
            self.error(format!("expected `{sym}`, found {}", self.describe()))
        }
    }

    fn expect_kw(&mut self, kw: &str) -> Result<(), SpecError> {
        if self.is_kw(kw) {
            self.bump();
            Ok(())
        } else {
            self.error(format!("expected `{kw}`, found {}", self.describe()))
        }
    }

    fn ident(&mut self) -> Result<String, SpecError> {
        match self.peek().clone() {
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(s)
            }
            _ => self.error(format!("expected identifier, found {}", self.describe())),
        }
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek(), Tok::Eof)
    }

    pub fn expect_eof(&self) -> Result<(), SpecError> {
        if self.at_eof() {
            Ok(())
        } else {
            self.error(format!("unexpected {}", self.describe()))
        }
    }

    pub fn protocol(&mut self) -> Result<RawProtocol, SpecError> {
        if self.at_eof() {
            return self.error("expected 'sort' or 'var'");
        }
        let mut raw = RawProtocol {
            sorts: vec![],
            vars: vec![],
            init: vec![],
            actions: vec![],
            safety: vec![],
        };
        while !self.at_eof() {
            let kw = match self.peek() {
                Tok::Ident(s) => s.clone(),
                _ => String::new(),
            };
            match kw.as_str() {
                "sort" => {
                    self.bump();
                    raw.sorts.push(self.ident()?);
                }
                "var" => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect_sym(":")?;
                    let ty = self.value_type()?;
                    raw.vars.push(VarDecl { name, ty });
                }
                "init" => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect_sym("=")?;
                    let e = self.expr()?;
                    raw.init.push((name, e));
                }
                "action" => {
                    self.bump();
                    raw.actions.push(self.action()?);
                }
                "safety" => {
                    self.bump();
                    let name = self.ident()?;
                    self.expect_sym(":")?;
                    let e = self.expr()?;
                    raw.safety.push((name, e));
                }
                _ => {
                    return self.error(format!(
                        "expected 'sort', 'var', 'init', 'action' or 'safety', found {}",
                        self.describe()
                    ))
                }
            }
        }
        Ok(raw)
    }

    fn value_type(&mut self) -> Result<ValueType, SpecError> {
        if self.is_kw("bool") {
            self.bump();
            return Ok(ValueType::Bool);
        }
        if self.is_kw("enum") {
            self.bump();
            self.expect_sym("{")?;
            let mut labels = vec![self.ident()?];
            while self.eat_sym(",") {
                labels.push(self.ident()?);
            }
            self.expect_sym("}")?;
            return Ok(ValueType::Enum(labels));
        }
        if self.is_kw("set") {
            self.bump();
            self.expect_sym("<")?;
            let s = self.ident()?;
            self.expect_sym(">")?;
            return Ok(ValueType::Set(s));
        }
        if self.is_kw("map") {
            self.bump();
            self.expect_sym("<")?;
            let s = self.ident()?;
            self.expect_sym(">")?;
            self.expect_sym("->")?;
            let elem = self.value_type()?;
            return Ok(ValueType::Map(s, Box::new(elem)));
        }
        Ok(ValueType::Elem(self.ident()?))
    }

    fn action(&mut self) -> Result<ActionDecl, SpecError> {
        let name = self.ident()?;
        self.expect_sym("(")?;
        let mut params = vec![];
        if !self.is_sym(")") {
            loop {
                let p = self.ident()?;
                self.expect_sym(":")?;
                let s = self.ident()?;
                params.push((p, s));
                if !self.eat_sym(",") {
                    break;
                }
            }
        }
        self.expect_sym(")")?;
        self.expect_sym("{")?;
        let mut guards = vec![];
        let mut updates = vec![];
        while !self.eat_sym("}") {
            if self.at_eof() {
                return self.error("expected `}` closing action body");
            }
            if self.is_kw("require") {
                self.bump();
                guards.push(self.expr()?);
            } else {
                let var = self.ident()?;
                let index = if self.eat_sym("[") {
                    let i = self.expr()?;
                    self.expect_sym("]")?;
                    Some(i)
                } else {
                    None
                };
                self.expect_sym(":=")?;
                let rhs = self.expr()?;
                updates.push(Update { var, index, rhs });
            }
            self.expect_sym(";")?;
        }
        let guard = match guards.len() {
            0 => Expr::Bool(true),
            1 => guards.pop().unwrap(),
            _ => Expr::And(guards),
        };
        Ok(ActionDecl {
            name,
            params,
            guard,
            updates,
        })
    }

    pub fn grammar(&mut self) -> Result<RawGrammar, SpecError> {
        self.expect_kw("template")?;
        let mut template = vec![];
        while self.is_kw("forall") || self.is_kw("exists") {
            let quant = self.quantifier()?;
            for (var, sort) in self.binders()? {
                template.push(TemplateVar { quant, var, sort });
            }
        }
        if template.is_empty() {
            return self.error("template needs at least one `forall` or `exists` binder");
        }
        let mut seeds = vec![];
        while self.is_kw("seed") {
            self.bump();
            seeds.push(self.expr()?);
        }
        let mut max_terms = None;
        if self.is_kw("max_terms") {
            self.bump();
            let mut v = vec![self.int()? as usize];
            while self.eat_sym(",") {
                v.push(self.int()? as usize);
            }
            max_terms = Some(v);
        }
        self.expect_eof()?;
        Ok(RawGrammar {
            template,
            seeds,
            max_terms,
        })
    }

    fn int(&mut self) -> Result<u32, SpecError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(n)
            }
            _ => self.error(format!("expected integer, found {}", self.describe())),
        }
    }

    fn quantifier(&mut self) -> Result<Quantifier, SpecError> {
        if self.is_kw("forall") {
            self.bump();
            Ok(Quantifier::Forall)
        } else if self.is_kw("exists") {
            self.bump();
            Ok(Quantifier::Exists)
        } else {
            self.error(format!("expected quantifier, found {}", self.describe()))
        }
    }

    /// Parses `x, y: S, z: T.` into a flattened binder list.
    fn binders(&mut self) -> Result<Vec<(String, String)>, SpecError> {
        let mut out = vec![];
        loop {
            let mut names = vec![self.ident()?];
            while self.eat_sym(",") {
                names.push(self.ident()?);
            }
            self.expect_sym(":")?;
            let sort = self.ident()?;
            out.extend(names.into_iter().map(|n| (n, sort.clone())));
            if !self.eat_sym(",") {
                break;
            }
        }
        self.expect_sym(".")?;
        Ok(out)
    }

    pub fn expr(&mut self) -> Result<Expr, SpecError> {
        if self.is_kw("forall") || self.is_kw("exists") {
            let q = self.quantifier()?;
            let binders = self.binders()?;
            let body = self.expr()?;
            return Ok(binders
                .into_iter()
                .rev()
                .fold(body, |acc, (x, s)| Expr::Quant(q, x, s, Box::new(acc))));
        }
        self.implies()
    }

    fn implies(&mut self) -> Result<Expr, SpecError> {
        let lhs = self.or()?;
        if self.eat_sym("->") {
            let rhs = self.expr()?;
            return Ok(Expr::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<Expr, SpecError> {
        let first = self.and()?;
        if !self.is_sym("\\/") {
            return Ok(first);
        }
        let mut xs = vec![first];
        while self.eat_sym("\\/") {
            xs.push(self.and()?);
        }
        Ok(Expr::Or(xs))
    }

    fn and(&mut self) -> Result<Expr, SpecError> {
        let first = self.unary()?;
        if !self.is_sym("/\\") {
            return Ok(first);
        }
        let mut xs = vec![first];
        while self.eat_sym("/\\") {
            xs.push(self.unary()?);
        }
        Ok(Expr::And(xs))
    }

    fn unary(&mut self) -> Result<Expr, SpecError> {
        if self.eat_sym("~") {
            return Ok(Expr::Not(Box::new(self.unary()?)));
        }
        if self.is_kw("forall") || self.is_kw("exists") {
            return self.expr();
        }
        self.comparison()
    }

    fn comparison(&mut self) -> Result<Expr, SpecError> {
        let lhs = self.additive()?;
        if self.is_kw("in") {
            self.bump();
            let rhs = self.additive()?;
            return Ok(Expr::In(Box::new(lhs), Box::new(rhs)));
        }
        if self.eat_sym("=") {
            let rhs = self.additive()?;
            return Ok(Expr::Eq(Box::new(lhs), Box::new(rhs)));
        }
        if self.eat_sym("!=") {
            let rhs = self.additive()?;
            return Ok(Expr::Ne(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, SpecError> {
        let mut lhs = self.intersection()?;
        loop {
            let op = if self.eat_sym("+") {
                SetOp::Union
            } else if self.eat_sym("-") {
                SetOp::Difference
            } else {
                return Ok(lhs);
            };
            let rhs = self.intersection()?;
            lhs = Expr::SetOp(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn intersection(&mut self) -> Result<Expr, SpecError> {
        let mut lhs = self.postfix()?;
        while self.eat_sym("&") {
            let rhs = self.postfix()?;
            lhs = Expr::SetOp(SetOp::Intersection, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn postfix(&mut self) -> Result<Expr, SpecError> {
        let mut e = self.atom()?;
        while self.eat_sym("[") {
            let i = self.expr()?;
            self.expect_sym("]")?;
            e = Expr::Index(Box::new(e), Box::new(i));
        }
        Ok(e)
    }

    fn atom(&mut self) -> Result<Expr, SpecError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Sym("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Tok::Sym("{") => {
                self.bump();
                let mut xs = vec![];
                if !self.is_sym("}") {
                    xs.push(self.expr()?);
                    while self.eat_sym(",") {
                        xs.push(self.expr()?);
                    }
                }
                self.expect_sym("}")?;
                Ok(Expr::SetLit(xs))
            }
            Tok::Sym("|") => {
                self.bump();
                let e = self.additive()?;
                self.expect_sym("|")?;
                Ok(Expr::Card(Box::new(e)))
            }
            Tok::Sym("[") => {
                self.bump();
                self.expect_kw("forall")?;
                let x = self.ident()?;
                self.expect_sym(":")?;
                let s = self.ident()?;
                self.expect_sym(".")?;
                let body = self.expr()?;
                self.expect_sym("]")?;
                Ok(Expr::MapComp(x, s, Box::new(body)))
            }
            Tok::Ident(s) if s == "true" || s == "false" => {
                self.bump();
                Ok(Expr::Bool(s == "true"))
            }
            Tok::Ident(s) if s == "maj" && matches!(self.peek_at(1), Tok::Sym("(")) => {
                self.bump();
                self.bump();
                let e = self.expr()?;
                self.expect_sym(",")?;
                let sort = self.ident()?;
                self.expect_sym(")")?;
                Ok(Expr::Maj(Box::new(e), sort))
            }
            Tok::Ident(s) if !RESERVED.contains(&s.as_str()) => {
                self.bump();
                Ok(Expr::Ident(s))
            }
            _ => self.error(format!("expected expression, found {}", self.describe())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> Expr {
        let mut p = Parser::new(src).unwrap();
        let e = p.expr().unwrap();
        p.expect_eof().unwrap();
        e
    }

    #[test]
    fn implication_is_right_associative() {
        let e = parse("a -> b -> c");
        match e {
            Expr::Implies(_, rhs) => assert!(matches!(*rhs, Expr::Implies(..))),
            _ => panic!("{e:?}"),
        }
    }

    #[test]
    fn negation_binds_looser_than_membership() {
        let e = parse("~ s in held[c]");
        match e {
            Expr::Not(inner) => assert!(matches!(*inner, Expr::In(..))),
            _ => panic!("{e:?}"),
        }
    }

    #[test]
    fn intersection_binds_tighter_than_disequality() {
        let e = parse("held[a] & held[b] != {} -> a = b");
        let Expr::Implies(lhs, _) = e else { panic!() };
        let Expr::Ne(l, r) = *lhs else { panic!() };
        assert!(matches!(*l, Expr::SetOp(SetOp::Intersection, ..)));
        assert_eq!(*r, Expr::SetLit(vec![]));
    }

    #[test]
    fn binder_lists_desugar_to_nested_quantifiers() {
        let e = parse("forall a, b: C. a = b");
        let Expr::Quant(Quantifier::Forall, a, _, body) = e else { panic!() };
        assert_eq!(a, "a");
        assert!(matches!(*body, Expr::Quant(Quantifier::Forall, ..)));
    }

    #[test]
    fn trailing_garbage_is_rejected() {
        let mut p = Parser::new("a b").unwrap();
        p.expr().unwrap();
        assert!(p.expect_eof().is_err());
    }
}
