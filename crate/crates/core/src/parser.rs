//! Surface syntax: documents, proof blocks and sentences.
//!
//! Atomic propositions are kept as raw token spans; resolving them against
//! notations happens during desugaring.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

use crate::lexer::{tokenize, LexError, Location, Token, TokenKind};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomSpan {
    pub tokens: Vec<Token>,
    pub loc: Location,
}

impl AtomSpan {
    pub fn text(&self) -> String {
        render_tokens(&self.tokens)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawFormula {
    Atom(AtomSpan),
    Not(Box<RawFormula>),
    And(Box<RawFormula>, Box<RawFormula>),
    Or(Box<RawFormula>, Box<RawFormula>),
    Implies(Box<RawFormula>, Box<RawFormula>),
    Iff(Box<RawFormula>, Box<RawFormula>),
    Forall(Vec<String>, Box<RawFormula>),
    Exists(Vec<String>, Box<RawFormula>),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sentence {
    pub formula: RawFormula,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawProof {
    pub steps: Vec<RawStep>,
    pub loc: Location,
    /// Location of the closing `qed`.
    pub end: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawStep {
    pub kind: RawStepKind,
    pub loc: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawStepKind {
    Assume(Sentence),
    Then { sentence: Sentence, since: Option<Sentence>, by: Option<Vec<String>> },
    Hence { sentence: Sentence, since: Option<Sentence>, by: Option<Vec<String>> },
    Note { goal: Sentence, proof: RawProof },
    Case { hypothesis: Sentence, proof: RawProof },
    Take { vars: Vec<String>, sentence: Sentence, by: Option<Vec<String>> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RawItem {
    Include { name: String, loc: Location },
    Notation { label: String, pattern: Vec<Token>, loc: Location },
    Definition { label: String, sentence: Sentence, loc: Location },
    Axiom { label: String, sentence: Sentence, loc: Location },
    Lemma { label: String, explicit_label: bool, sentence: Sentence, proof: Option<RawProof>, loc: Location },
}

impl RawItem {
    pub fn loc(&self) -> Location {
        match self {
            RawItem::Include { loc, .. }
            | RawItem::Notation { loc, .. }
            | RawItem::Definition { loc, .. }
            | RawItem::Axiom { loc, .. }
            | RawItem::Lemma { loc, .. } => *loc,
        }
    }

    pub fn label(&self) -> Option<&str> {
        match self {
            RawItem::Include { .. } => None,
            RawItem::Notation { label, .. }
            | RawItem::Definition { label, .. }
            | RawItem::Axiom { label, .. }
            | RawItem::Lemma { label, .. } => Some(label),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RawDocument {
    pub items: Vec<RawItem>,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error("{loc}: syntax error: expected {}, found {found}", expected.join(" or "))]
    Syntax { loc: Location, expected: Vec<String>, found: String },
    #[error("{0}: block opened here is never closed with `qed.`")]
    UnclosedBlock(Location),
    #[error("{loc}: label `{label}` is declared twice")]
    DuplicateLabel { loc: Location, label: String },
}

impl ParseError {
    pub fn location(&self) -> Location {
        match self {
            ParseError::Lex(LexError::InvalidCharacter(loc, _)) => *loc,
            ParseError::Syntax { loc, .. } | ParseError::DuplicateLabel { loc, .. } => *loc,
            ParseError::UnclosedBlock(loc) => *loc,
        }
    }
}

pub const AUTO_LEMMA_PREFIX: &str = "__lemma";

const CONNECTIVES: &[&str] = &["and", "or", "implies", "iff", "not"];
const SENTENCE_STOPS: &[&str] = &["since", "by", "such"];

pub fn parse_source(source: &str) -> Result<RawDocument, ParseError> {
    parse_document(&tokenize(source)?)
}

pub fn parse_document(tokens: &[Token]) -> Result<RawDocument, ParseError> {
    let mut p = Parser { tokens, pos: 0, lemmas: 0 };
    let mut items = Vec::new();
    let mut labels = HashSet::new();
    while !p.at_end() {
        let item = p.item()?;
        if let Some(label) = item.label() {
            if !labels.insert(label.to_string()) {
                return Err(ParseError::DuplicateLabel { loc: item.loc(), label: label.to_string() });
            }
        }
        items.push(item);
    }
    Ok(RawDocument { items })
}

/// Parses a single sentence (no trailing period required).
pub fn parse_sentence(source: &str) -> Result<Sentence, ParseError> {
    let tokens = tokenize(source)?;
    let mut p = Parser { tokens: &tokens, pos: 0, lemmas: 0 };
    let s = p.sentence()?;
    if p.peek_kind(TokenKind::Period) {
        p.pos += 1;
    }
    if !p.at_end() {
        return Err(p.unexpected(&["end of input"]));
    }
    Ok(s)
}

struct Parser<'a> {
    tokens: &'a [Token],
    pos: usize,
    lemmas: usize,
}

impl<'a> Parser<'a> {
    fn at_end(&self) -> bool {
        self.pos >= self.tokens.len()
    }

    fn peek(&self) -> Option<&'a Token> {
        self.tokens.get(self.pos)
    }

    fn peek_at(&self, offset: usize) -> Option<&'a Token> {
        self.tokens.get(self.pos + offset)
    }

    fn peek_word(&self, w: &str) -> bool {
        self.peek().is_some_and(|t| t.is_word(w))
    }

    fn peek_kind(&self, kind: TokenKind) -> bool {
        self.peek().is_some_and(|t| t.kind == kind)
    }

    fn here(&self) -> Location {
        self.peek()
            .or_else(|| self.tokens.last())
            .map(|t| t.loc)
            .unwrap_or(Location::new(1, 1))
    }

    fn unexpected(&self, expected: &[&str]) -> ParseError {
        ParseError::Syntax {
            loc: self.here(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
            found: self.peek().map(|t| format!("`{}`", t.text)).unwrap_or_else(|| "end of input".into()),
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<&'a Token, ParseError> {
        match self.peek() {
            Some(t) if t.is_word(w) => {
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.unexpected(&[&format!("`{w}`")])),
        }
    }

    fn expect_kind(&mut self, kind: TokenKind, what: &str) -> Result<&'a Token, ParseError> {
        match self.peek() {
            Some(t) if t.kind == kind => {
                self.pos += 1;
                Ok(t)
            }
            _ => Err(self.unexpected(&[what])),
        }
    }

    fn identifier(&mut self) -> Result<String, ParseError> {
        match self.peek() {
            Some(t) if t.kind == TokenKind::Word && !is_keyword(&t.text) => {
                self.pos += 1;
                Ok(t.text.clone())
            }
            _ => Err(self.unexpected(&["identifier"])),
        }
    }

    fn item(&mut self) -> Result<RawItem, ParseError> {
        let loc = self.here();
        let head = self.peek().map(|t| t.text.as_str()).unwrap_or("");
        match head {
            "Include" => {
                self.pos += 1;
                let name = self.identifier()?;
                self.expect_kind(TokenKind::Period, "`.`")?;
                Ok(RawItem::Include { name, loc })
            }
            "Notation" => {
                self.pos += 1;
                let label = self.identifier()?;
                self.expect_kind(TokenKind::Colon, "`:`")?;
                let start = self.pos;
                while !self.at_end() && !self.peek_kind(TokenKind::Period) {
                    self.pos += 1;
                }
                let pattern = self.tokens[start..self.pos].to_vec();
                if pattern.is_empty() {
                    return Err(self.unexpected(&["notation pattern"]));
                }
                self.expect_kind(TokenKind::Period, "`.`")?;
                Ok(RawItem::Notation { label, pattern, loc })
            }
            "Definition" | "Axiom" => {
                self.pos += 1;
                let label = self.identifier()?;
                self.expect_kind(TokenKind::Colon, "`:`")?;
                let sentence = self.sentence()?;
                self.expect_kind(TokenKind::Period, "`.`")?;
                Ok(if head == "Axiom" {
                    RawItem::Axiom { label, sentence, loc }
                } else {
                    RawItem::Definition { label, sentence, loc }
                })
            }
            "Lemma" => {
                self.pos += 1;
                let (label, explicit_label) = if self.peek_kind(TokenKind::Colon) {
                    self.lemmas += 1;
                    (format!("{AUTO_LEMMA_PREFIX}{}", self.lemmas), false)
                } else {
                    (self.identifier()?, true)
                };
                self.expect_kind(TokenKind::Colon, "`:`")?;
                let sentence = self.sentence()?;
                self.expect_kind(TokenKind::Period, "`.`")?;
                let proof = if self.peek_word("Proof") {
                    let open = self.here();
                    self.pos += 1;
                    self.expect_kind(TokenKind::Colon, "`:`")?;
                    Some(self.block(open)?)
                } else {
                    None
                };
                Ok(RawItem::Lemma { label, explicit_label, sentence, proof, loc })
            }
            _ => Err(self.unexpected(&["`Include`", "`Notation`", "`Definition`", "`Axiom`", "`Lemma`"])),
        }
    }

    /// Steps up to and including the closing `qed.`.
    fn block(&mut self, open: Location) -> Result<RawProof, ParseError> {
        let mut steps = Vec::new();
        loop {
            if self.at_end() {
                return Err(ParseError::UnclosedBlock(open));
            }
            if self.peek_word("qed") {
                let end = self.here();
                self.pos += 1;
                self.expect_kind(TokenKind::Period, "`.`")?;
                return Ok(RawProof { steps, loc: open, end });
            }
            steps.push(self.step()?);
        }
    }

    fn step(&mut self) -> Result<RawStep, ParseError> {
        let loc = self.here();
        let head = self.peek().map(|t| t.text.as_str()).unwrap_or("");
        let kind = match head {
            "Assume" => {
                self.pos += 1;
                let s = self.sentence()?;
                self.expect_kind(TokenKind::Period, "`.`")?;
                RawStepKind::Assume(s)
            }
            "Then" | "Hence" => {
                self.pos += 1;
                let sentence = self.sentence()?;
                let (mut since, mut by) = (None, None);
                for _ in 0..2 {
                    if since.is_none() && self.peek_word("since") {
                        self.pos += 1;
                        since = Some(self.sentence()?);
                    } else if by.is_none() && self.peek_word("by") {
                        self.pos += 1;
                        by = Some(self.labels()?);
                    }
                }
                self.expect_kind(TokenKind::Period, "`.`")?;
                if head == "Then" {
                    RawStepKind::Then { sentence, since, by }
                } else {
                    RawStepKind::Hence { sentence, since, by }
                }
            }
            "Note" | "Case" => {
                self.pos += 1;
                let s = self.sentence()?;
                self.expect_kind(TokenKind::Colon, "`:`")?;
                let proof = self.block(loc)?;
                if head == "Note" {
                    RawStepKind::Note { goal: s, proof }
                } else {
                    RawStepKind::Case { hypothesis: s, proof }
                }
            }
            "Take" => {
                self.pos += 1;
                let mut vars = vec![self.identifier()?];
                while self.peek_kind(TokenKind::Comma) {
                    self.pos += 1;
                    vars.push(self.identifier()?);
                }
                self.expect_word("such")?;
                self.expect_word("that")?;
                let sentence = self.sentence()?;
                let by = if self.peek_word("by") {
                    self.pos += 1;
                    Some(self.labels()?)
                } else {
                    None
                };
                self.expect_kind(TokenKind::Period, "`.`")?;
                RawStepKind::Take { vars, sentence, by }
            }
            _ => {
                return Err(self.unexpected(&[
                    "`Assume`", "`Then`", "`Hence`", "`Note`", "`Case`", "`Take`", "`qed`",
                ]))
            }
        };
        Ok(RawStep { kind, loc })
    }

    fn labels(&mut self) -> Result<Vec<String>, ParseError> {
        let mut labels = vec![self.identifier()?];
        while self.peek_kind(TokenKind::Comma) {
            self.pos += 1;
            labels.push(self.identifier()?);
        }
        Ok(labels)
    }

    fn sentence(&mut self) -> Result<Sentence, ParseError> {
        let loc = self.here();
        let formula = self.iff()?;
        Ok(Sentence { formula, loc })
    }

    fn iff(&mut self) -> Result<RawFormula, ParseError> {
        let lhs = self.implies()?;
        if self.peek_word("iff") {
            self.pos += 1;
            let rhs = self.iff()?;
            return Ok(RawFormula::Iff(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn implies(&mut self) -> Result<RawFormula, ParseError> {
        let lhs = self.or()?;
        if self.peek_word("implies") {
            self.pos += 1;
            let rhs = self.implies()?;
            return Ok(RawFormula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn or(&mut self) -> Result<RawFormula, ParseError> {
        let mut lhs = self.and()?;
        while self.peek_word("or") {
            self.pos += 1;
            let rhs = self.and()?;
            lhs = RawFormula::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<RawFormula, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek_word("and") {
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = RawFormula::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn quantifier_vars(&mut self) -> Result<Vec<String>, ParseError> {
        let mut vars = vec![self.identifier()?];
        while self.peek_kind(TokenKind::Comma) {
            self.pos += 1;
            vars.push(self.identifier()?);
        }
        self.expect_kind(TokenKind::QuantDot, "`.` after quantified variables")?;
        Ok(vars)
    }

    fn unary(&mut self) -> Result<RawFormula, ParseError> {
        if self.peek_word("not") {
            self.pos += 1;
            return Ok(RawFormula::Not(Box::new(self.unary()?)));
        }
        if self.peek_word("for") && self.peek_at(1).is_some_and(|t| t.is_word("all")) {
            self.pos += 2;
            let vars = self.quantifier_vars()?;
            let body = self.iff()?;
            return Ok(RawFormula::Forall(vars, Box::new(body)));
        }
        if self.peek_word("exists") {
            self.pos += 1;
            let vars = self.quantifier_vars()?;
            let body = self.iff()?;
            return Ok(RawFormula::Exists(vars, Box::new(body)));
        }
        if self.peek().is_some_and(|t| t.is_symbol("(")) && self.opens_group() {
            self.pos += 1;
            let inner = self.iff()?;
            match self.peek() {
                Some(t) if t.is_symbol(")") => self.pos += 1,
                _ => return Err(self.unexpected(&["`)`"])),
            }
            return Ok(inner);
        }
        self.atom()
    }

    /// Decides whether the `(` at the cursor opens a parenthesized formula
    /// rather than starting an atom such as `(a)-b-c`.
    fn opens_group(&self) -> bool {
        let mut depth = 0usize;
        let mut close = None;
        for (i, t) in self.tokens[self.pos..].iter().enumerate() {
            if t.is_symbol("(") {
                depth += 1;
            } else if t.is_symbol(")") {
                depth -= 1;
                if depth == 0 {
                    close = Some(self.pos + i);
                    break;
                }
            } else if t.kind == TokenKind::Word
                && (CONNECTIVES.contains(&t.text.as_str()) || t.text == "exists" || t.text == "for")
            {
                return true;
            } else if matches!(t.kind, TokenKind::Period | TokenKind::Colon) {
                return false;
            }
        }
        let Some(close) = close else { return false };
        match self.tokens.get(close + 1) {
            None => true,
            Some(t) => {
                matches!(t.kind, TokenKind::Period | TokenKind::Colon | TokenKind::Comma)
                    || t.is_symbol(")")
                    || (t.kind == TokenKind::Word
                        && (CONNECTIVES.contains(&t.text.as_str()) || SENTENCE_STOPS.contains(&t.text.as_str())))
            }
        }
    }

    fn atom(&mut self) -> Result<RawFormula, ParseError> {
        let start = self.pos;
        let mut depth = 0usize;
        while let Some(t) = self.peek() {
            if depth == 0 {
                let stop = matches!(
                    t.kind,
                    TokenKind::Period | TokenKind::QuantDot | TokenKind::Colon | TokenKind::Comma
                ) || t.is_symbol(")")
                    || (t.kind == TokenKind::Word
                        && (CONNECTIVES.contains(&t.text.as_str())
                            || SENTENCE_STOPS.contains(&t.text.as_str())
                            || t.text == "exists"
                            || (t.text == "for" && self.peek_at(1).is_some_and(|n| n.is_word("all")))));
                if stop {
                    break;
                }
            }
            if t.is_symbol("(") {
                depth += 1;
            } else if t.is_symbol(")") {
                depth -= 1;
            } else if depth > 0 && matches!(t.kind, TokenKind::Period | TokenKind::Colon) {
                break;
            }
            self.pos += 1;
        }
        if self.pos == start {
            return Err(self.unexpected(&["proposition"]));
        }
        if depth != 0 {
            return Err(self.unexpected(&["`)`"]));
        }
        let tokens = self.tokens[start..self.pos].to_vec();
        Ok(RawFormula::Atom(AtomSpan { loc: tokens[0].loc, tokens }))
    }
}

pub fn is_keyword(w: &str) -> bool {
    matches!(
        w,
        "Include"
            | "Notation"
            | "Definition"
            | "Axiom"
            | "Lemma"
            | "Proof"
            | "Assume"
            | "Then"
            | "Hence"
            | "Note"
            | "Case"
            | "Take"
            | "qed"
            | "since"
            | "by"
            | "such"
            | "that"
            | "exists"
            | "implies"
            | "iff"
            | "and"
            | "or"
            | "not"
            | "contradiction"
    )
}

/// Joins tokens back into compact source text (`midpoint(m,a,b)`, `a-b ≡ c-d`).
pub fn render_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            let prev = &tokens[i - 1];
            let tight = t.is_symbol(")")
                || t.kind == TokenKind::Comma
                || prev.kind == TokenKind::Comma
                || prev.is_symbol("(")
                || (t.is_symbol("(") && prev.kind == TokenKind::Word)
                || t.is_symbol("-")
                || prev.is_symbol("-")
                || ((t.is_symbol("||") || t.is_symbol("|-|")) && prev.kind == TokenKind::Word)
                || ((prev.is_symbol("||") || prev.is_symbol("|-|")) && t.kind == TokenKind::Word);
            if !tight {
                out.push(' ');
            }
        }
        out.push_str(&t.text);
    }
    out
}

impl RawFormula {
    fn is_simple(&self) -> bool {
        match self {
            RawFormula::Atom(_) => true,
            RawFormula::Not(inner) => inner.is_simple(),
            _ => false,
        }
    }

    fn fmt_operand(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_simple() {
            write!(f, "{self}")
        } else {
            write!(f, "({self})")
        }
    }

    /// Copy with every token location reset, for location-insensitive comparison.
    pub fn without_locations(&self) -> RawFormula {
        let b = |f: &RawFormula| Box::new(f.without_locations());
        match self {
            RawFormula::Atom(span) => RawFormula::Atom(AtomSpan {
                tokens: span
                    .tokens
                    .iter()
                    .map(|t| Token { loc: Location::default(), ..t.clone() })
                    .collect(),
                loc: Location::default(),
            }),
            RawFormula::Not(g) => RawFormula::Not(b(g)),
            RawFormula::And(l, r) => RawFormula::And(b(l), b(r)),
            RawFormula::Or(l, r) => RawFormula::Or(b(l), b(r)),
            RawFormula::Implies(l, r) => RawFormula::Implies(b(l), b(r)),
            RawFormula::Iff(l, r) => RawFormula::Iff(b(l), b(r)),
            RawFormula::Forall(vs, g) => RawFormula::Forall(vs.clone(), b(g)),
            RawFormula::Exists(vs, g) => RawFormula::Exists(vs.clone(), b(g)),
        }
    }
}

impl fmt::Display for RawFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let bin = |f: &mut fmt::Formatter<'_>, l: &RawFormula, op: &str, r: &RawFormula| {
            l.fmt_operand(f)?;
            write!(f, " {op} ")?;
            r.fmt_operand(f)
        };
        match self {
            RawFormula::Atom(span) => f.write_str(&span.text()),
            RawFormula::Not(g) => {
                f.write_str("not ")?;
                g.fmt_operand(f)
            }
            RawFormula::And(l, r) => bin(f, l, "and", r),
            RawFormula::Or(l, r) => bin(f, l, "or", r),
            RawFormula::Implies(l, r) => bin(f, l, "implies", r),
            RawFormula::Iff(l, r) => bin(f, l, "iff", r),
            RawFormula::Forall(vs, g) => write!(f, "for all {}. {g}", vs.join(",")),
            RawFormula::Exists(vs, g) => write!(f, "exists {}. {g}", vs.join(",")),
        }
    }
}

fn strip_sentence(s: &Sentence) -> Sentence {
    Sentence { formula: s.formula.without_locations(), loc: Location::default() }
}

fn strip_proof(p: &RawProof) -> RawProof {
    RawProof {
        steps: p.steps.iter().map(strip_step).collect(),
        loc: Location::default(),
        end: Location::default(),
    }
}

fn strip_step(s: &RawStep) -> RawStep {
    let kind = match &s.kind {
        RawStepKind::Assume(x) => RawStepKind::Assume(strip_sentence(x)),
        RawStepKind::Then { sentence, since, by } => RawStepKind::Then {
            sentence: strip_sentence(sentence),
            since: since.as_ref().map(strip_sentence),
            by: by.clone(),
        },
        RawStepKind::Hence { sentence, since, by } => RawStepKind::Hence {
            sentence: strip_sentence(sentence),
            since: since.as_ref().map(strip_sentence),
            by: by.clone(),
        },
        RawStepKind::Note { goal, proof } => {
            RawStepKind::Note { goal: strip_sentence(goal), proof: strip_proof(proof) }
        }
        RawStepKind::Case { hypothesis, proof } => {
            RawStepKind::Case { hypothesis: strip_sentence(hypothesis), proof: strip_proof(proof) }
        }
        RawStepKind::Take { vars, sentence, by } => {
            RawStepKind::Take { vars: vars.clone(), sentence: strip_sentence(sentence), by: by.clone() }
        }
    };
    RawStep { kind, loc: Location::default() }
}

impl RawDocument {
    /// Copy with all locations reset; two parses of equivalent text compare equal.
    pub fn without_locations(&self) -> RawDocument {
        let d = Location::default();
        let items = self
            .items
            .iter()
            .map(|item| match item {
                RawItem::Include { name, .. } => RawItem::Include { name: name.clone(), loc: d },
                RawItem::Notation { label, pattern, .. } => RawItem::Notation {
                    label: label.clone(),
                    pattern: pattern.iter().map(|t| Token { loc: d, ..t.clone() }).collect(),
                    loc: d,
                },
                RawItem::Definition { label, sentence, .. } => {
                    RawItem::Definition { label: label.clone(), sentence: strip_sentence(sentence), loc: d }
                }
                RawItem::Axiom { label, sentence, .. } => {
                    RawItem::Axiom { label: label.clone(), sentence: strip_sentence(sentence), loc: d }
                }
                RawItem::Lemma { label, explicit_label, sentence, proof, .. } => RawItem::Lemma {
                    label: label.clone(),
                    explicit_label: *explicit_label,
                    sentence: strip_sentence(sentence),
                    proof: proof.as_ref().map(strip_proof),
                    loc: d,
                },
            })
            .collect();
        RawDocument { items }
    }
}

fn write_labels(f: &mut fmt::Formatter<'_>, by: &Option<Vec<String>>) -> fmt::Result {
    if let Some(labels) = by {
        write!(f, " by {}", labels.join(", "))?;
    }
    Ok(())
}

fn write_proof(f: &mut fmt::Formatter<'_>, proof: &RawProof, depth: usize) -> fmt::Result {
    for step in &proof.steps {
        write_step(f, step, depth + 1)?;
    }
    writeln!(f, "{}qed.", "  ".repeat(depth))
}

fn write_step(f: &mut fmt::Formatter<'_>, step: &RawStep, depth: usize) -> fmt::Result {
    let indent = "  ".repeat(depth);
    match &step.kind {
        RawStepKind::Assume(s) => writeln!(f, "{indent}Assume {}.", s.formula),
        RawStepKind::Then { sentence, since, by } | RawStepKind::Hence { sentence, since, by } => {
            let kw = if matches!(step.kind, RawStepKind::Then { .. }) { "Then" } else { "Hence" };
            write!(f, "{indent}{kw} {}", sentence.formula)?;
            if let Some(s) = since {
                write!(f, " since {}", s.formula)?;
            }
            write_labels(f, by)?;
            writeln!(f, ".")
        }
        RawStepKind::Note { goal, proof } => {
            writeln!(f, "{indent}Note {}:", goal.formula)?;
            write_proof(f, proof, depth)
        }
        RawStepKind::Case { hypothesis, proof } => {
            writeln!(f, "{indent}Case {}:", hypothesis.formula)?;
            write_proof(f, proof, depth)
        }
        RawStepKind::Take { vars, sentence, by } => {
            write!(f, "{indent}Take {} such that {}", vars.join(", "), sentence.formula)?;
            write_labels(f, by)?;
            writeln!(f, ".")
        }
    }
}

impl fmt::Display for RawDocument {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for item in &self.items {
            match item {
                RawItem::Include { name, .. } => writeln!(f, "Include {name}.")?,
                RawItem::Notation { label, pattern, .. } => {
                    writeln!(f, "Notation {label}: {}.", render_tokens(pattern))?
                }
                RawItem::Definition { label, sentence, .. } => {
                    writeln!(f, "Definition {label}: {}.", sentence.formula)?
                }
                RawItem::Axiom { label, sentence, .. } => writeln!(f, "Axiom {label}: {}.", sentence.formula)?,
                RawItem::Lemma { label, explicit_label, sentence, proof, .. } => {
                    if *explicit_label {
                        writeln!(f, "Lemma {label}: {}.", sentence.formula)?;
                    } else {
                        writeln!(f, "Lemma: {}.", sentence.formula)?;
                    }
                    if let Some(proof) = proof {
                        writeln!(f, "Proof:")?;
                        write_proof(f, proof, 0)?;
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MIDPOINT: &str = "Include geometry.
Lemma MidpointExtension: for all a,b,c,d,m. midpoint(m,b,c) and a-b-c and b-c-d and a-b ≡ c-d and b ≠ c implies midpoint(m,a,d).
Proof:
  Assume midpoint(m,b,c) and a-b-c and b-c-d and a-b ≡ c-d and b ≠ c.
  Then a-m ≡ m-d since b-m ≡ m-c and a-b ≡ c-d.
  Note a-m-d:
    Then b-m-c by DefMidpoint.
    Then a-b-m since a-b-c and b-m-c.
    Then m-c-d since b-m-c and b-c-d.
  qed.
  Hence midpoint(m,a,d).
qed.
";

    fn lemma_steps(doc: &RawDocument) -> &[RawStep] {
        match &doc.items[1] {
            RawItem::Lemma { proof: Some(p), .. } => &p.steps,
            other => panic!("expected lemma with proof, got {other:?}"),
        }
    }

    #[test]
    fn midpoint_extension_structure() {
        let doc = parse_source(MIDPOINT).unwrap();
        assert_eq!(doc.items.len(), 2);
        assert!(matches!(&doc.items[0], RawItem::Include { name, .. } if name == "geometry"));
        let steps = lemma_steps(&doc);
        assert_eq!(steps.len(), 4);
        assert!(matches!(steps[0].kind, RawStepKind::Assume(_)));
        assert!(matches!(&steps[1].kind, RawStepKind::Then { since: Some(_), by: None, .. }));
        match &steps[2].kind {
            RawStepKind::Note { proof, .. } => {
                assert_eq!(proof.steps.len(), 3);
                assert!(matches!(&proof.steps[0].kind, RawStepKind::Then { by: Some(l), .. } if l == &["DefMidpoint"]));
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(steps[3].kind, RawStepKind::Hence { .. }));
        assert_eq!(steps[1].loc.line, 5);
    }

    #[test]
    fn axiom_declaration() {
        let doc = parse_source("Axiom A: for all a,b. a-b ≡ b-a.").unwrap();
        match &doc.items[0] {
            RawItem::Axiom { label, sentence, .. } => {
                assert_eq!(label, "A");
                assert!(matches!(&sentence.formula, RawFormula::Forall(vs, _) if vs == &["a", "b"]));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn incomplete_proof_still_parses() {
        let doc = parse_source("Lemma: p implies q.\nProof: Assume p. qed.").unwrap();
        match &doc.items[0] {
            RawItem::Lemma { label, proof: Some(p), .. } => {
                assert_eq!(label, "__lemma1");
                assert_eq!(p.steps.len(), 1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unclosed_note_reports_opening() {
        let err = parse_source("Lemma: p.\nProof:\n  Note q:\n    Then q.\n").unwrap_err();
        assert_eq!(err, ParseError::UnclosedBlock(Location::new(3, 3)));
        let err = parse_source("Lemma: p.\nProof:\n  Note q:\n    Then q.\nqed.").unwrap_err();
        assert_eq!(err, ParseError::UnclosedBlock(Location::new(2, 1)));
    }

    #[test]
    fn syntax_error_has_expected_set() {
        match parse_source("Lemma X for all a. p(a).") {
            Err(ParseError::Syntax { loc, expected, .. }) => {
                assert_eq!(loc, Location::new(1, 9));
                assert_eq!(expected, ["`:`"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn precedence_and_quantifier_scope() {
        let s = parse_sentence("a and b or c implies d implies e iff f").unwrap();
        assert_eq!(s.formula.to_string(), "(((a and b) or c) implies (d implies e)) iff f");
        let s = parse_sentence("for all a,b,c,p,q. a-p-c and b-q-c implies exists x. p-x-b and q-x-a").unwrap();
        assert_eq!(
            s.formula.to_string(),
            "for all a,b,c,p,q. (a-p-c and b-q-c) implies (exists x. p-x-b and q-x-a)"
        );
        let s = parse_sentence("not exists x. col(x,a,b) and col(x,a',b')").unwrap();
        assert_eq!(s.formula.to_string(), "not (exists x. col(x,a,b) and col(x,a',b'))");
    }

    #[test]
    fn parenthesized_groups() {
        let s = parse_sentence("(a-b-c and not a = b) implies (x-t-y)").unwrap();
        assert!(matches!(s.formula, RawFormula::Implies(..)));
        let s = parse_sentence("(a)-b-c").unwrap();
        assert!(matches!(s.formula, RawFormula::Atom(ref span) if span.tokens.len() == 7));
    }

    #[test]
    fn since_and_by_together() {
        let doc = parse_source("Lemma: p.\nProof: Then q since r by A, B. Hence p by C since q. qed.").unwrap();
        match &doc.items[0] {
            RawItem::Lemma { proof: Some(p), .. } => {
                assert!(matches!(&p.steps[0].kind, RawStepKind::Then { since: Some(_), by: Some(l), .. } if l.len() == 2));
                assert!(matches!(&p.steps[1].kind, RawStepKind::Hence { since: Some(_), by: Some(_), .. }));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn take_step() {
        let doc = parse_source("Lemma: p.\nProof: Take x' such that x-m-x' and m-x' ≡ m-x by SegmentConstr. qed.").unwrap();
        match &doc.items[0] {
            RawItem::Lemma { proof: Some(p), .. } => match &p.steps[0].kind {
                RawStepKind::Take { vars, by, .. } => {
                    assert_eq!(vars, &["x'"]);
                    assert_eq!(by.as_deref(), Some(&["SegmentConstr".to_string()][..]));
                }
                other => panic!("{other:?}"),
            },
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_labels_rejected() {
        let err = parse_source("Axiom A: p.\nAxiom A: q.").unwrap_err();
        assert!(matches!(err, ParseError::DuplicateLabel { .. }));
    }

    #[test]
    fn pretty_print_round_trip() {
        let doc = parse_source(MIDPOINT).unwrap();
        let printed = doc.to_string();
        let again = parse_source(&printed).unwrap();
        assert_eq!(doc.without_locations(), again.without_locations());
    }
}
