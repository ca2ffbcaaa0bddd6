//! From source text to the list of proof obligations.

use thiserror::Error;

use crate::desugar::{desugar, DeclKind, Document, DesugarErrors, Scope};
use crate::lexer::Location;
use crate::library::{includes_of, LibraryError, LibraryStore};
use crate::obligation::{ambient_for, derive_obligations, Obligation};
use crate::parser::{parse_source, ParseError};
use crate::sequence::{build_sequence, SequenceOptions, Statement, StructureError};

#[derive(Debug, Error)]
pub enum PrepareError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error(transparent)]
    Desugar(#[from] DesugarErrors),
    #[error(transparent)]
    Structure(#[from] StructureError),
}

impl PrepareError {
    /// Source location of the (first) error, when it lies in the document.
    pub fn location(&self) -> Option<Location> {
        match self {
            PrepareError::Parse(e) => Some(e.location()),
            PrepareError::Library(_) => None,
            PrepareError::Desugar(e) => e.0.first().map(|e| e.location()),
            PrepareError::Structure(StructureError::AssumeMismatch { loc, .. }) => Some(*loc),
        }
    }
}

/// A declaration that is taken without checking.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Assumed {
    pub label: String,
    pub kind: DeclKind,
    pub line: u32,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub scope: Scope,
    pub document: Document,
    pub assumed: Vec<Assumed>,
    /// Statement sequence of every lemma, by label.
    pub sequences: Vec<(String, Statement)>,
    pub obligations: Vec<Obligation>,
}

pub fn prepare(text: &str, store: &LibraryStore, opts: SequenceOptions) -> Result<Prepared, PrepareError> {
    prepare_with(text, store, opts, &[])
}

/// Like [`prepare`], with `libraries` included ahead of the document's own
/// `Include` lines.
pub fn prepare_with(text: &str, store: &LibraryStore, opts: SequenceOptions, libraries: &[String]) -> Result<Prepared, PrepareError> {
    let raw = parse_source(text)?;
    let mut includes = libraries.to_vec();
    includes.extend(includes_of(&raw));
    let scope = store.scope(&includes)?;
    let document = desugar(&raw, &scope)?;
    let mut assumed = Vec::new();
    let mut sequences = Vec::new();
    let mut obligations = Vec::new();
    for (i, decl) in document.decls.iter().enumerate() {
        if decl.kind != DeclKind::Lemma {
            assumed.push(Assumed { label: decl.label.clone(), kind: decl.kind, line: decl.loc.line });
            continue;
        }
        let seq = build_sequence(decl, opts)?;
        let ambient = ambient_for(&scope.premises, &document.decls, i);
        obligations.extend(derive_obligations(&decl.label, &seq, &ambient));
        sequences.push((decl.label.clone(), seq));
    }
    Ok(Prepared { scope, document, assumed, sequences, obligations })
}
