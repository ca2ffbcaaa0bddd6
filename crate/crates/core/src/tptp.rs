//! TPTP first-order form: writing obligations for external provers, reading
//! FOF back (as a grammar check) and interpreting SZS status lines.
//!
//! Identifiers are encoded into the TPTP lexical classes reversibly: `_`
//! becomes `__`, `'` becomes `_prime`, other characters outside `[A-Za-z0-9]`
//! become `_u<hex>_`, and a name not starting with a lowercase ASCII letter
//! gets the prefix `n_0`. Variables use the same encoding with the first
//! letter in upper case.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use thiserror::Error;

use crate::fol::{Formula, Term};
use crate::obligation::Obligation;

/// Functor (predicate, function or constant) name in TPTP `lower_word` form.
pub fn encode_name(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars() {
        match c {
            '_' => out.push_str("__"),
            '\'' => out.push_str("_prime"),
            c if c.is_ascii_alphanumeric() => out.push(c),
            c => {
                let _ = write!(out, "_u{:x}_", c as u32);
            }
        }
    }
    if !out.starts_with(|c: char| c.is_ascii_lowercase()) {
        out.insert_str(0, "n_0");
    }
    out
}

/// Inverse of [`encode_name`]; `None` for strings it cannot produce.
pub fn decode_name(encoded: &str) -> Option<String> {
    let body = encoded.strip_prefix("n_0").unwrap_or(encoded);
    let mut out = String::new();
    let mut rest = body;
    while let Some(c) = rest.chars().next() {
        if c != '_' {
            if !c.is_ascii_alphanumeric() {
                return None;
            }
            out.push(c);
            rest = &rest[1..];
            continue;
        }
        if let Some(r) = rest.strip_prefix("__") {
            out.push('_');
            rest = r;
        } else if let Some(r) = rest.strip_prefix("_prime") {
            out.push('\'');
            rest = r;
        } else {
            let r = rest.strip_prefix("_u")?;
            let end = r.find('_')?;
            let code = u32::from_str_radix(&r[..end], 16).ok()?;
            let ch = char::from_u32(code)?;
            if ch.is_ascii_alphanumeric() || ch == '_' || ch == '\'' {
                return None;
            }
            out.push(ch);
            rest = &r[end + 1..];
        }
    }
    let prefixed = body.len() != encoded.len();
    let needs_prefix = !out.starts_with(|c: char| c.is_ascii_lowercase());
    (prefixed == needs_prefix && !out.is_empty()).then_some(out)
}

/// Variable name in TPTP `upper_word` form.
pub fn encode_var(name: &str) -> String {
    let mut e = encode_name(name);
    e[..1].make_ascii_uppercase();
    e
}

pub fn decode_var(encoded: &str) -> Option<String> {
    let mut e = encoded.to_string();
    if !e.starts_with(|c: char| c.is_ascii_uppercase()) {
        return None;
    }
    e[..1].make_ascii_lowercase();
    decode_name(&e)
}

fn term(t: &Term, out: &mut String) {
    match t {
        Term::Var(v) => out.push_str(&encode_var(v)),
        Term::Const(c) => out.push_str(&encode_name(c)),
        Term::App(f, args) => {
            out.push_str(&encode_name(f));
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                term(a, out);
            }
            out.push(')');
        }
    }
}

fn binary(f: &Formula) -> Option<(&Formula, &'static str, &Formula)> {
    match f {
        Formula::And(l, r) => Some((l, "&", r)),
        Formula::Or(l, r) => Some((l, "|", r)),
        Formula::Implies(l, r) => Some((l, "=>", r)),
        Formula::Iff(l, r) => Some((l, "<=>", r)),
        _ => None,
    }
}

/// A formula in TPTP FOF syntax. Binary subformulas are parenthesized.
pub fn formula_to_tptp(f: &Formula) -> String {
    let mut out = String::new();
    match binary(f) {
        Some((l, op, r)) => {
            unit(l, &mut out);
            let _ = write!(out, " {op} ");
            unit(r, &mut out);
        }
        None => unit(f, &mut out),
    }
    out
}

fn unit(f: &Formula, out: &mut String) {
    match f {
        Formula::Falsum => out.push_str("$false"),
        Formula::Pred(p, args) => {
            out.push_str(&encode_name(p));
            if !args.is_empty() {
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    term(a, out);
                }
                out.push(')');
            }
        }
        Formula::Eq(l, r) => {
            term(l, out);
            out.push_str(" = ");
            term(r, out);
        }
        Formula::Not(g) => match g.as_ref() {
            Formula::Eq(l, r) => {
                term(l, out);
                out.push_str(" != ");
                term(r, out);
            }
            _ => {
                out.push_str("~ ");
                unit(g, out);
            }
        },
        Formula::Forall(vs, body) | Formula::Exists(vs, body) => {
            out.push(if matches!(f, Formula::Forall(..)) { '!' } else { '?' });
            out.push('[');
            out.push_str(&vs.iter().map(|v| encode_var(v)).collect::<Vec<_>>().join(","));
            out.push_str("]: ");
            unit(body, out);
        }
        _ => {
            out.push('(');
            out.push_str(&formula_to_tptp(f));
            out.push(')');
        }
    }
}

/// Lowercase formula name for a premise label, unique among `taken`.
fn formula_name(label: &str, taken: &mut BTreeSet<String>) -> String {
    let mut base: String = label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    if !base.starts_with(|c: char| c.is_ascii_lowercase()) {
        base.insert(0, 'p');
    }
    let mut name = base.clone();
    let mut k = 1;
    while taken.contains(&name) || name == "goal" {
        k += 1;
        name = format!("{base}_{k}");
    }
    taken.insert(name.clone());
    name
}

/// The obligation as a TPTP problem: one axiom per premise (sorted by
/// label) and the goal as conjecture.
pub fn to_tptp(ob: &Obligation) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "% {}", ob.id);
    let mut premises: Vec<&(String, Formula)> = ob.premises.iter().collect();
    premises.sort_by(|a, b| a.0.cmp(&b.0));
    let mut taken = BTreeSet::new();
    for (label, f) in premises {
        let name = formula_name(label, &mut taken);
        let _ = writeln!(out, "fof({name}, axiom, {}).", formula_to_tptp(f));
    }
    let _ = writeln!(out, "fof(goal, conjecture, {}).", formula_to_tptp(&ob.goal));
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("TPTP line {line}: {message}")]
pub struct TptpError {
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Annotated {
    pub name: String,
    pub role: String,
    pub formula: Formula,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Lower(String),
    Upper(String),
    Dollar(String),
    Quoted(String),
    Number(String),
    Punct(&'static str),
}

const PUNCT: &[&str] = &["<=>", "<~>", "=>", "<=", "~|", "~&", "!=", "(", ")", "[", "]", ",", ".", ":", "!", "?", "~", "&", "|", "="];

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, TptpError> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line_no = n + 1;
        let mut rest = line;
        loop {
            rest = rest.trim_start();
            let Some(c) = rest.chars().next() else { break };
            if c == '%' {
                break;
            }
            if c == '\'' {
                let end = rest[1..].find('\'').ok_or(TptpError { line: line_no, message: "unterminated quote".into() })?;
                out.push((Tok::Quoted(rest[1..end + 1].to_string()), line_no));
                rest = &rest[end + 2..];
                continue;
            }
            if c.is_ascii_alphanumeric() || c == '$' {
                let len = rest[1..].find(|c: char| !(c.is_ascii_alphanumeric() || c == '_')).map_or(rest.len(), |i| i + 1);
                let word = rest[..len].to_string();
                let tok = if c == '$' {
                    Tok::Dollar(word)
                } else if c.is_ascii_digit() {
                    Tok::Number(word)
                } else if c.is_ascii_uppercase() {
                    Tok::Upper(word)
                } else {
                    Tok::Lower(word)
                };
                out.push((tok, line_no));
                rest = &rest[len..];
                continue;
            }
            match PUNCT.iter().find(|p| rest.starts_with(**p)) {
                Some(p) => {
                    out.push((Tok::Punct(p), line_no));
                    rest = &rest[p.len()..];
                }
                None => return Err(TptpError { line: line_no, message: format!("unexpected character `{c}`") }),
            }
        }
    }
    Ok(out)
}

struct FofParser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl FofParser {
    fn line(&self) -> usize {
        self.toks.get(self.pos).or(self.toks.last()).map_or(1, |t| t.1)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, TptpError> {
        Err(TptpError { line: self.line(), message: message.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.0)
    }

    fn eat(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), TptpError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`, found {:?}", self.peek()))
        }
    }

    fn annotated(&mut self) -> Result<Annotated, TptpError> {
        match self.peek() {
            Some(Tok::Lower(w)) if w == "fof" => self.pos += 1,
            other => return self.err(format!("expected `fof`, found {other:?}")),
        }
        self.expect("(")?;
        let name = match self.peek().cloned() {
            Some(Tok::Lower(w) | Tok::Quoted(w) | Tok::Number(w)) => {
                self.pos += 1;
                w
            }
            other => return self.err(format!("expected formula name, found {other:?}")),
        };
        self.expect(",")?;
        let role = match self.peek().cloned() {
            Some(Tok::Lower(w)) => {
                self.pos += 1;
                w
            }
            other => return self.err(format!("expected formula role, found {other:?}")),
        };
        const ROLES: &[&str] =
            &["axiom", "hypothesis", "definition", "assumption", "lemma", "theorem", "corollary", "conjecture", "negated_conjecture", "plain", "unknown"];
        if !ROLES.contains(&role.as_str()) {
            return self.err(format!("unknown role `{role}`"));
        }
        self.expect(",")?;
        let formula = self.logic(&BTreeSet::new())?;
        self.expect(")")?;
        self.expect(".")?;
        Ok(Annotated { name, role, formula })
    }

    fn logic(&mut self, bound: &BTreeSet<String>) -> Result<Formula, TptpError> {
        let first = self.unit(bound)?;
        for (op, mk) in [("&", Formula::and as fn(Formula, Formula) -> Formula), ("|", Formula::or)] {
            if matches!(self.peek(), Some(Tok::Punct(q)) if *q == op) {
                let mut acc = first;
                while self.eat(op) {
                    let next = self.unit(bound)?;
                    acc = mk(acc, next);
                }
                return Ok(acc);
            }
        }
        let op = match self.peek() {
            Some(Tok::Punct(q)) if ["<=>", "=>", "<=", "<~>", "~|", "~&"].contains(q) => *q,
            _ => return Ok(first),
        };
        self.pos += 1;
        let second = self.unit(bound)?;
        Ok(match op {
            "<=>" => Formula::iff(first, second),
            "=>" => Formula::implies(first, second),
            "<=" => Formula::implies(second, first),
            "<~>" => Formula::not(Formula::iff(first, second)),
            "~|" => Formula::not(Formula::or(first, second)),
            _ => Formula::not(Formula::and(first, second)),
        })
    }

    fn unit(&mut self, bound: &BTreeSet<String>) -> Result<Formula, TptpError> {
        if self.eat("(") {
            let f = self.logic(bound)?;
            self.expect(")")?;
            return Ok(f);
        }
        if self.eat("~") {
            return Ok(Formula::not(self.unit(bound)?));
        }
        for (q, universal) in [("!", true), ("?", false)] {
            if self.eat(q) {
                self.expect("[")?;
                let mut vars = Vec::new();
                loop {
                    match self.peek().cloned() {
                        Some(Tok::Upper(v)) => {
                            self.pos += 1;
                            vars.push(decode_var(&v).ok_or(TptpError { line: self.line(), message: format!("bad variable `{v}`") })?);
                        }
                        other => return self.err(format!("expected variable, found {other:?}")),
                    }
                    if !self.eat(",") {
                        break;
                    }
                }
                self.expect("]")?;
                self.expect(":")?;
                let mut inner = bound.clone();
                inner.extend(vars.iter().cloned());
                let body = self.unit(&inner)?;
                return Ok(if universal { Formula::Forall(vars, Box::new(body)) } else { Formula::Exists(vars, Box::new(body)) });
            }
        }
        self.atomic(bound)
    }

    fn atomic(&mut self, bound: &BTreeSet<String>) -> Result<Formula, TptpError> {
        if let Some(Tok::Dollar(w)) = self.peek().cloned() {
            self.pos += 1;
            return match w.as_str() {
                "$false" => Ok(Formula::Falsum),
                "$true" => Ok(Formula::not(Formula::Falsum)),
                _ => self.err(format!("unknown defined word `{w}`")),
            };
        }
        let lhs = self.term(bound)?;
        if self.eat("=") {
            return Ok(Formula::eq(lhs, self.term(bound)?));
        }
        if self.eat("!=") {
            return Ok(Formula::not(Formula::eq(lhs, self.term(bound)?)));
        }
        match lhs {
            Term::Const(p) => Ok(Formula::pred(p, vec![])),
            Term::App(p, args) => Ok(Formula::pred(p, args)),
            Term::Var(v) => self.err(format!("variable `{v}` used as a formula")),
        }
    }

    fn term(&mut self, bound: &BTreeSet<String>) -> Result<Term, TptpError> {
        match self.peek().cloned() {
            Some(Tok::Upper(v)) => {
                self.pos += 1;
                let name = decode_var(&v).ok_or(TptpError { line: self.line(), message: format!("bad variable `{v}`") })?;
                if !bound.contains(&name) {
                    return self.err(format!("unbound variable `{v}`"));
                }
                Ok(Term::Var(name))
            }
            Some(Tok::Lower(w)) => {
                self.pos += 1;
                let name = decode_name(&w).ok_or(TptpError { line: self.line(), message: format!("bad identifier `{w}`") })?;
                if self.eat("(") {
                    let mut args = vec![self.term(bound)?];
                    while self.eat(",") {
                        args.push(self.term(bound)?);
                    }
                    self.expect(")")?;
                    Ok(Term::App(name, args))
                } else {
                    Ok(Term::Const(name))
                }
            }
            other => self.err(format!("expected term, found {other:?}")),
        }
    }
}

/// Parses a FOF problem, checking the grammar. Identifiers are decoded.
pub fn parse_fof(text: &str) -> Result<Vec<Annotated>, TptpError> {
    let mut p = FofParser { toks: lex(text)?, pos: 0 };
    let mut out = Vec::new();
    while p.peek().is_some() {
        out.push(p.annotated()?);
    }
    Ok(out)
}

/// Obligation text of a parsed problem: axioms by name and the conjecture.
pub fn split_problem(items: &[Annotated]) -> (BTreeMap<String, Formula>, Option<Formula>) {
    let mut axioms = BTreeMap::new();
    let mut goal = None;
    for a in items {
        if a.role == "conjecture" {
            goal = Some(a.formula.clone());
        } else {
            axioms.insert(a.name.clone(), a.formula.clone());
        }
    }
    (axioms, goal)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SzsStatus {
    Theorem,
    CounterSatisfiable,
    Timeout,
    Unknown,
}

/// Interprets the first `SZS status` line of a prover's output.
pub fn parse_szs(output: &str) -> SzsStatus {
    for line in output.lines() {
        let Some(idx) = line.find("SZS status") else { continue };
        let status = line[idx + "SZS status".len()..].split_whitespace().next().unwrap_or("");
        return match status {
            "Theorem" | "Unsatisfiable" | "ContradictoryAxioms" => SzsStatus::Theorem,
            "CounterSatisfiable" | "Satisfiable" => SzsStatus::CounterSatisfiable,
            "Timeout" | "ResourceOut" => SzsStatus::Timeout,
            _ => SzsStatus::Unknown,
        };
    }
    SzsStatus::Unknown
}
