//! User-declared mixfix notations and atom resolution.

use std::fmt;

use thiserror::Error;

use crate::fol::{Formula, Term};
use crate::lexer::{Location, Token, TokenKind};
use crate::parser::{render_tokens, AtomSpan};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Element {
    /// Argument position; the index is the predicate argument it fills.
    Slot(usize),
    Literal(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct NotationPattern {
    pub name: String,
    pub elements: Vec<Element>,
    pub arity: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NotationError {
    #[error("{loc}: notation `{name}` uses slot `{slot}` twice")]
    DuplicateSlot { loc: Location, name: String, slot: String },
    #[error("{loc}: notation `{name}` needs at least one symbol and one slot")]
    Degenerate { loc: Location, name: String },
    #[error("{loc}: notation `{name}` conflicts with an existing notation of arity {existing}")]
    ConflictingNotation { loc: Location, name: String, existing: usize },
    #[error("{loc}: cannot read `{text}` as a proposition")]
    UnmatchedAtom { loc: Location, text: String },
    #[error("{loc}: `{text}` matches several notations ({})", candidates.join(", "))]
    AmbiguousMatch { loc: Location, text: String, candidates: Vec<String> },
}

impl NotationError {
    pub fn location(&self) -> Location {
        match self {
            NotationError::DuplicateSlot { loc, .. }
            | NotationError::Degenerate { loc, .. }
            | NotationError::ConflictingNotation { loc, .. }
            | NotationError::UnmatchedAtom { loc, .. }
            | NotationError::AmbiguousMatch { loc, .. } => *loc,
        }
    }
}

/// Compiles the body of `Notation <name>: <pattern>.`
///
/// Words become argument slots in order of first appearance; every other
/// token is a literal that must appear verbatim.
pub fn parse_notation(name: &str, pattern: &[Token]) -> Result<NotationPattern, NotationError> {
    let loc = pattern.first().map(|t| t.loc).unwrap_or_default();
    let mut slots: Vec<&str> = Vec::new();
    let mut elements = Vec::new();
    for tok in pattern {
        if tok.kind == TokenKind::Word {
            if slots.contains(&tok.text.as_str()) {
                return Err(NotationError::DuplicateSlot {
                    loc: tok.loc,
                    name: name.to_string(),
                    slot: tok.text.clone(),
                });
            }
            elements.push(Element::Slot(slots.len()));
            slots.push(&tok.text);
        } else {
            elements.push(Element::Literal(tok.text.clone()));
        }
    }
    let has_literal = elements.iter().any(|e| matches!(e, Element::Literal(_)));
    if slots.is_empty() || !has_literal {
        return Err(NotationError::Degenerate { loc, name: name.to_string() });
    }
    Ok(NotationPattern { name: name.to_string(), arity: slots.len(), elements })
}

impl NotationPattern {
    /// Renders an application back to surface syntax, e.g. `a-b ≡ c-d`.
    pub fn render(&self, args: &[Term]) -> String {
        let mut tokens = Vec::new();
        for e in &self.elements {
            let text = match e {
                Element::Slot(i) => render_term(&args[*i]),
                Element::Literal(s) => s.clone(),
            };
            let kind = match e {
                Element::Slot(_) => TokenKind::Word,
                Element::Literal(_) => TokenKind::Symbol,
            };
            tokens.push(Token { kind, text, loc: Location::default() });
        }
        render_tokens(&tokens)
    }

    fn try_match(&self, tokens: &[Token]) -> Option<Vec<Term>> {
        let mut args: Vec<Option<Term>> = vec![None; self.arity];
        let mut pos = 0;
        for e in &self.elements {
            match e {
                Element::Literal(lit) => {
                    let t = tokens.get(pos)?;
                    if t.text != *lit || t.kind == TokenKind::Word {
                        return None;
                    }
                    pos += 1;
                }
                Element::Slot(i) => {
                    let (term, next) = parse_slot_term(tokens, pos)?;
                    args[*i] = Some(term);
                    pos = next;
                }
            }
        }
        if pos != tokens.len() {
            return None;
        }
        args.into_iter().collect()
    }
}

impl fmt::Display for NotationPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<Term> = (0..self.arity)
            .map(|i| Term::var(slot_letter(i)))
            .collect();
        write!(f, "{}: {}", self.name, self.render(&args))
    }
}

fn slot_letter(i: usize) -> String {
    let letters = "abcdefghijklmnopqrstuvwxyz";
    let c = letters.chars().nth(i % 26).unwrap_or('x');
    if i < 26 {
        c.to_string()
    } else {
        format!("{c}{}", i / 26)
    }
}

fn render_term(t: &Term) -> String {
    match t {
        Term::Var(n) | Term::Const(n) => n.clone(),
        Term::App(..) => format!("({t})"),
    }
}

/// A term at a notation slot: an identifier, a function application, or a
/// parenthesized term.
fn parse_slot_term(tokens: &[Token], pos: usize) -> Option<(Term, usize)> {
    let t = tokens.get(pos)?;
    if t.is_symbol("(") {
        let (term, next) = parse_term(tokens, pos + 1)?;
        return tokens.get(next).filter(|c| c.is_symbol(")")).map(|_| (term, next + 1));
    }
    parse_term(tokens, pos)
}

/// Parses `name` or `name(t1, ..., tn)` starting at `pos`.
pub fn parse_term(tokens: &[Token], pos: usize) -> Option<(Term, usize)> {
    let t = tokens.get(pos)?;
    if t.is_symbol("(") {
        return parse_slot_term(tokens, pos);
    }
    if t.kind != TokenKind::Word {
        return None;
    }
    match tokens.get(pos + 1) {
        Some(open) if open.is_symbol("(") => {
            let (args, next) = parse_args(tokens, pos + 2)?;
            Some((Term::app(t.text.clone(), args), next))
        }
        _ => Some((Term::var(t.text.clone()), pos + 1)),
    }
}

/// Comma-separated terms up to and including the closing `)`.
fn parse_args(tokens: &[Token], mut pos: usize) -> Option<(Vec<Term>, usize)> {
    let mut args = Vec::new();
    if tokens.get(pos)?.is_symbol(")") {
        return Some((args, pos + 1));
    }
    loop {
        let (term, next) = parse_term(tokens, pos)?;
        args.push(term);
        let sep = tokens.get(next)?;
        if sep.kind == TokenKind::Comma {
            pos = next + 1;
        } else if sep.is_symbol(")") {
            return Some((args, next + 1));
        } else {
            return None;
        }
    }
}

/// Notations visible at some point of a document.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct NotationScope {
    patterns: Vec<NotationPattern>,
}

impl NotationScope {
    pub fn new() -> NotationScope {
        NotationScope::default()
    }

    pub fn patterns(&self) -> &[NotationPattern] {
        &self.patterns
    }

    /// Returns the scope extended by `pattern`; re-registering an identical
    /// pattern is a no-op.
    pub fn register(&self, pattern: NotationPattern, loc: Location) -> Result<NotationScope, NotationError> {
        let mut next = self.clone();
        next.register_in_place(pattern, loc)?;
        Ok(next)
    }

    pub fn register_in_place(&mut self, pattern: NotationPattern, loc: Location) -> Result<(), NotationError> {
        if self.patterns.contains(&pattern) {
            return Ok(());
        }
        if let Some(existing) = self.patterns.iter().find(|p| p.name == pattern.name && p.arity != pattern.arity) {
            return Err(NotationError::ConflictingNotation {
                loc,
                name: pattern.name.clone(),
                existing: existing.arity,
            });
        }
        self.patterns.push(pattern);
        Ok(())
    }

    pub fn arity_of(&self, name: &str) -> Option<usize> {
        self.patterns.iter().find(|p| p.name == name).map(|p| p.arity)
    }

    pub fn find(&self, name: &str) -> Option<&NotationPattern> {
        self.patterns.iter().find(|p| p.name == name)
    }
}

/// Resolves an atomic proposition.
///
/// Notations are tried longest first (declaration order breaks ties within a
/// length only when exactly one of them matches). Without a matching
/// notation the span is read as `p(t1,...,tn)`, `p`, `t1 = t2`, `t1 ≠ t2`, or
/// `contradiction`. Identifiers come back as variables; the caller decides
/// which of them denote fixed constants.
pub fn match_atom(span: &AtomSpan, scope: &NotationScope) -> Result<Formula, NotationError> {
    let tokens = &span.tokens;
    let mut sorted: Vec<&NotationPattern> = scope.patterns.iter().collect();
    sorted.sort_by_key(|p| std::cmp::Reverse(p.elements.len()));
    let mut i = 0;
    while i < sorted.len() {
        let len = sorted[i].elements.len();
        let group: Vec<&NotationPattern> = sorted[i..].iter().take_while(|p| p.elements.len() == len).copied().collect();
        i += group.len();
        let matches: Vec<(&NotationPattern, Vec<Term>)> =
            group.iter().filter_map(|p| p.try_match(tokens).map(|args| (*p, args))).collect();
        match matches.len() {
            0 => continue,
            1 => {
                let (p, args) = matches.into_iter().next().expect("one match");
                return Ok(Formula::pred(p.name.clone(), args));
            }
            _ => {
                let mut candidates: Vec<String> = matches.iter().map(|(p, _)| p.name.clone()).collect();
                candidates.dedup();
                if candidates.len() == 1 {
                    let (p, args) = matches.into_iter().next().expect("one match");
                    return Ok(Formula::pred(p.name.clone(), args));
                }
                return Err(NotationError::AmbiguousMatch { loc: span.loc, text: span.text(), candidates });
            }
        }
    }
    fallback(span).ok_or_else(|| NotationError::UnmatchedAtom { loc: span.loc, text: span.text() })
}

fn fallback(span: &AtomSpan) -> Option<Formula> {
    let tokens = &span.tokens;
    if tokens.len() == 1 && tokens[0].is_word("contradiction") {
        return Some(Formula::Falsum);
    }
    if let Some(first) = tokens.first().filter(|t| t.kind == TokenKind::Word) {
        if tokens.len() == 1 {
            return Some(Formula::pred(first.text.clone(), vec![]));
        }
        if tokens[1].is_symbol("(") {
            if let Some((args, next)) = parse_args(tokens, 2) {
                if next == tokens.len() {
                    return Some(Formula::pred(first.text.clone(), args));
                }
            }
        }
    }
    let (lhs, next) = parse_term(tokens, 0)?;
    let op = tokens.get(next)?;
    let (rhs, end) = parse_term(tokens, next + 1)?;
    if end != tokens.len() {
        return None;
    }
    if op.is_symbol("=") {
        Some(Formula::eq(lhs, rhs))
    } else if op.is_symbol("≠") {
        Some(Formula::not(Formula::eq(lhs, rhs)))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize;

    fn pattern(name: &str, src: &str) -> NotationPattern {
        parse_notation(name, &tokenize(src).unwrap()).unwrap()
    }

    fn geometry() -> NotationScope {
        let mut scope = NotationScope::new();
        for (name, src) in [
            ("between", "a-b-c"),
            ("equidistant", "a-b ≡ c-d"),
            ("parstr", "a-b|-|c-d"),
            ("parallel", "a-b||c-d"),
        ] {
            scope.register_in_place(pattern(name, src), Location::default()).unwrap();
        }
        scope
    }

    fn atom(src: &str, scope: &NotationScope) -> Result<Formula, NotationError> {
        let tokens = tokenize(src).unwrap();
        match_atom(&AtomSpan { loc: tokens[0].loc, tokens }, scope)
    }

    fn v(names: &[&str]) -> Vec<Term> {
        names.iter().map(|n| Term::var(*n)).collect()
    }

    #[test]
    fn pattern_shapes() {
        let p = pattern("between", "a-b-c");
        assert_eq!(p.arity, 3);
        assert_eq!(
            p.elements,
            [Element::Slot(0), Element::Literal("-".into()), Element::Slot(1), Element::Literal("-".into()), Element::Slot(2)]
        );
        assert_eq!(pattern("equidistant", "a-b ≡ c-d").arity, 4);
        let par = pattern("parallel", "a-b||c-d");
        assert_eq!(par.arity, 4);
        assert!(par.elements.contains(&Element::Literal("||".into())));
    }

    #[test]
    fn duplicate_slot_rejected() {
        let err = parse_notation("bad", &tokenize("a-a").unwrap()).unwrap_err();
        assert!(matches!(err, NotationError::DuplicateSlot { .. }));
    }

    #[test]
    fn primed_equidistance() {
        let f = atom("m-a' ≡ m-b'", &geometry()).unwrap();
        assert_eq!(f, Formula::pred("equidistant", v(&["m", "a'", "m", "b'"])));
    }

    #[test]
    fn prefix_fallback() {
        let f = atom("midpoint(m,b,c)", &geometry()).unwrap();
        assert_eq!(f, Formula::pred("midpoint", v(&["m", "b", "c"])));
    }

    #[test]
    fn betweenness_vs_equidistance() {
        let scope = geometry();
        assert_eq!(atom("a-b-c", &scope).unwrap(), Formula::pred("between", v(&["a", "b", "c"])));
        assert_eq!(atom("a-b ≡ c-d", &scope).unwrap(), Formula::pred("equidistant", v(&["a", "b", "c", "d"])));
        assert_eq!(atom("a-b|-|c-d", &scope).unwrap(), Formula::pred("parstr", v(&["a", "b", "c", "d"])));
        assert_eq!(atom("a-b||a'-b'", &scope).unwrap(), Formula::pred("parallel", v(&["a", "b", "a'", "b'"])));
    }

    #[test]
    fn equality_and_contradiction() {
        let scope = geometry();
        assert_eq!(atom("a' = b'", &scope).unwrap(), Formula::eq(Term::var("a'"), Term::var("b'")));
        assert_eq!(atom("b ≠ c", &scope).unwrap(), Formula::not(Formula::eq(Term::var("b"), Term::var("c"))));
        assert_eq!(atom("contradiction", &scope).unwrap(), Formula::Falsum);
    }

    #[test]
    fn user_subset_notation() {
        let scope = NotationScope::new().register(pattern("subset", "A ⊆ B"), Location::default()).unwrap();
        assert_eq!(atom("A ⊆ B", &scope).unwrap(), Formula::pred("subset", v(&["A", "B"])));
    }

    #[test]
    fn reregistration_is_idempotent_and_conflicts_detected() {
        let scope = geometry();
        let again = scope.register(pattern("between", "a-b-c"), Location::default()).unwrap();
        assert_eq!(again, scope);
        let err = scope.register(pattern("between", "a-b"), Location::default()).unwrap_err();
        assert!(matches!(err, NotationError::ConflictingNotation { existing: 3, .. }));
    }

    #[test]
    fn ambiguous_and_unmatched() {
        let scope = NotationScope::new()
            .register(pattern("p", "a + b"), Location::default())
            .unwrap()
            .register(pattern("q", "a + b"), Location::default())
            .unwrap();
        assert!(matches!(atom("x + y", &scope), Err(NotationError::AmbiguousMatch { .. })));
        assert!(matches!(atom("x * y", &scope), Err(NotationError::UnmatchedAtom { .. })));
    }

    #[test]
    fn slots_take_function_terms() {
        let f = atom("f(x)-b-(g(y))", &geometry()).unwrap();
        assert_eq!(
            f,
            Formula::pred(
                "between",
                vec![Term::app("f", v(&["x"])), Term::var("b"), Term::app("g", v(&["y"]))]
            )
        );
    }

    #[test]
    fn render_then_match_is_identity() {
        let scope = geometry();
        for p in scope.patterns() {
            let args: Vec<Term> = (0..p.arity).map(|i| Term::var(format!("p{i}'"))).collect();
            let text = p.render(&args);
            assert_eq!(atom(&text, &scope).unwrap(), Formula::pred(p.name.clone(), args), "{text}");
        }
    }
}
