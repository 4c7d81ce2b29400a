//! Printing in the concrete syntax accepted by the parser. Parentheses are
//! emitted only where precedence requires them, so `parse(print(e)) == e`.

use std::fmt::{self, Write};

use super::ast::*;
use super::{GrammarConfig, Protocol};

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Quant(..) => 0,
        Expr::Implies(..) => 1,
        Expr::Or(_) => 2,
        Expr::And(_) => 3,
        Expr::Not(_) => 4,
        Expr::In(..) | Expr::Eq(..) | Expr::Ne(..) => 5,
        Expr::SetOp(SetOp::Union | SetOp::Difference, ..) => 6,
        Expr::SetOp(SetOp::Intersection, ..) => 7,
        Expr::Index(..) => 8,
        _ => 9,
    }
}

fn write_expr(out: &mut String, e: &Expr, min: u8) {
    let parens = prec(e) < min;
    if parens {
        out.push('(');
    }
    match e {
        Expr::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Expr::Int(n) => {
            let _ = write!(out, "{n}");
        }
        Expr::Ident(n) => out.push_str(n),
        Expr::Index(b, i) => {
            write_expr(out, b, 8);
            out.push('[');
            write_expr(out, i, 0);
            out.push(']');
        }
        Expr::SetLit(xs) => {
            out.push('{');
            for (k, x) in xs.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_expr(out, x, 0);
            }
            out.push('}');
        }
        Expr::SetOp(op, a, b) => {
            let p = prec(e);
            write_expr(out, a, p);
            let _ = write!(out, " {} ", op.symbol());
            write_expr(out, b, p + 1);
        }
        Expr::In(a, b) | Expr::Eq(a, b) | Expr::Ne(a, b) => {
            let sym = match e {
                Expr::In(..) => "in",
                Expr::Eq(..) => "=",
                _ => "!=",
            };
            write_expr(out, a, 6);
            let _ = write!(out, " {sym} ");
            write_expr(out, b, 6);
        }
        Expr::Card(x) => {
            out.push('|');
            write_expr(out, x, 6);
            out.push('|');
        }
        Expr::Maj(x, s) => {
            out.push_str("maj(");
            write_expr(out, x, 0);
            let _ = write!(out, ", {s})");
        }
        Expr::Not(x) => {
            out.push('~');
            write_expr(out, x, 4);
        }
        Expr::And(xs) | Expr::Or(xs) => {
            let (sym, p) = if matches!(e, Expr::And(_)) {
                (" /\\ ", 4)
            } else {
                (" \\/ ", 3)
            };
            for (k, x) in xs.iter().enumerate() {
                if k > 0 {
                    out.push_str(sym);
                }
                write_expr(out, x, p);
            }
        }
        Expr::Implies(a, b) => {
            write_expr(out, a, 2);
            out.push_str(" -> ");
            write_expr(out, b, 1);
        }
        Expr::Quant(q, x, s, body) => {
            let _ = write!(out, "{} {x}: {s}. ", q.keyword());
            write_expr(out, body, 0);
        }
        Expr::MapComp(x, s, body) => {
            let _ = write!(out, "[forall {x}: {s}. ");
            write_expr(out, body, 0);
            out.push(']');
        }
    }
    if parens {
        out.push(')');
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = String::new();
        write_expr(&mut s, self, 0);
        f.write_str(&s)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.sorts() {
            writeln!(f, "sort {s}")?;
        }
        for v in self.vars() {
            writeln!(f, "var {} : {}", v.name, v.ty)?;
        }
        for (v, e) in self.init_decls() {
            writeln!(f, "init {v} = {e}")?;
        }
        for a in self.actions() {
            let params: Vec<String> = a.params.iter().map(|(p, s)| format!("{p}: {s}")).collect();
            writeln!(f, "action {}({}) {{", a.name, params.join(", "))?;
            writeln!(f, "  require {};", a.guard)?;
            for u in &a.updates {
                match &u.index {
                    Some(i) => writeln!(f, "  {}[{}] := {};", u.var, i, u.rhs)?,
                    None => writeln!(f, "  {} := {};", u.var, u.rhs)?,
                }
            }
            writeln!(f, "}}")?;
        }
        writeln!(f, "safety {}: {}", self.safety_name(), self.safety())
    }
}

impl fmt::Display for GrammarConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "template")?;
        for t in &self.template {
            write!(f, " {} {}: {}.", t.quant.keyword(), t.var, t.sort)?;
        }
        writeln!(f)?;
        for s in &self.seeds {
            writeln!(f, "seed {s}")?;
        }
        let terms: Vec<String> = self.max_terms.iter().map(|n| n.to_string()).collect();
        writeln!(f, "max_terms {}", terms.join(","))
    }
}
