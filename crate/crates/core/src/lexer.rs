use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Location {
    pub line: u32,
    pub column: u32,
}

impl Location {
    pub fn new(line: u32, column: u32) -> Location {
        Location { line, column }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Word,
    /// ASCII operator or punctuation, including parentheses.
    Symbol,
    /// Non-ASCII mathematical symbol such as `≡` or `⊆`.
    UnicodeOp,
    Period,
    /// The dot closing a quantifier prefix, as in `for all a,b.`
    QuantDot,
    Colon,
    Comma,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub loc: Location,
}

impl Token {
    pub fn is_word(&self, w: &str) -> bool {
        self.kind == TokenKind::Word && self.text == w
    }

    pub fn is_symbol(&self, s: &str) -> bool {
        matches!(self.kind, TokenKind::Symbol | TokenKind::UnicodeOp) && self.text == s
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LexError {
    #[error("{0}: invalid character {1:?}")]
    InvalidCharacter(Location, char),
}

/// Multi-character operators, matched longest first.
const COMPOUND_SYMBOLS: &[&str] = &["|-|", "||"];

fn is_word_start(c: char) -> bool {
    c.is_alphabetic()
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || c == '\'' || c == '_'
}

fn is_ascii_symbol(c: char) -> bool {
    matches!(
        c,
        '(' | ')' | '[' | ']' | '{' | '}' | '-' | '+' | '*' | '/' | '<' | '>' | '=' | '|' | '&' | '^' | '~' | '!'
            | '?' | '#' | '%' | '@' | ';'
    )
}

fn is_math_symbol(c: char) -> bool {
    let cp = c as u32;
    matches!(cp,
        0x00AC | 0x00B1 | 0x00D7 | 0x00F7
        | 0x2016 | 0x2032..=0x2034
        | 0x2190..=0x21FF   // arrows
        | 0x2200..=0x22FF   // mathematical operators
        | 0x2300..=0x23FF   // miscellaneous technical
        | 0x25A0..=0x25FF   // geometric shapes
        | 0x27C0..=0x27EF
        | 0x2980..=0x2AFF)
}

/// Splits source text into tokens.
///
/// A `.` directly after `for all`/`exists` and a comma-separated identifier
/// list is a [`TokenKind::QuantDot`]; every other `.` is a sentence period.
pub fn tokenize(source: &str) -> Result<Vec<Token>, LexError> {
    let source = source.strip_prefix('\u{feff}').unwrap_or(source);
    let chars: Vec<char> = source.chars().collect();
    let mut tokens: Vec<Token> = Vec::new();
    let (mut line, mut column) = (1u32, 1u32);
    let mut i = 0;
    // Quantifier-prefix tracking: Some(expect_ident) while inside `for all x, y`.
    let mut quant: Option<bool> = None;

    while i < chars.len() {
        let c = chars[i];
        let loc = Location::new(line, column);
        if c == '\n' {
            line += 1;
            column = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            column += 1;
            i += 1;
            continue;
        }
        let (kind, len) = if is_word_start(c) {
            let mut j = i + 1;
            while j < chars.len() && is_word_char(chars[j]) {
                j += 1;
            }
            (TokenKind::Word, j - i)
        } else if c == '.' {
            let kind = if quant == Some(false) { TokenKind::QuantDot } else { TokenKind::Period };
            (kind, 1)
        } else if c == ':' {
            (TokenKind::Colon, 1)
        } else if c == ',' {
            (TokenKind::Comma, 1)
        } else if is_ascii_symbol(c) {
            let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
            let len = COMPOUND_SYMBOLS
                .iter()
                .find(|s| rest.starts_with(*s))
                .map(|s| s.chars().count())
                .unwrap_or(1);
            (TokenKind::Symbol, len)
        } else if is_math_symbol(c) {
            (TokenKind::UnicodeOp, 1)
        } else {
            return Err(LexError::InvalidCharacter(loc, c));
        };
        let text: String = chars[i..i + len].iter().collect();
        let token = Token { kind, text, loc };

        quant = match (quant, token.kind) {
            _ if token.is_word("exists") => Some(true),
            _ if token.is_word("all") && tokens.last().is_some_and(|t| t.is_word("for")) => Some(true),
            (Some(true), TokenKind::Word) => Some(false),
            (Some(false), TokenKind::Comma) => Some(true),
            _ => None,
        };

        tokens.push(token);
        column += len as u32;
        i += len;
    }
    Ok(tokens)
}
