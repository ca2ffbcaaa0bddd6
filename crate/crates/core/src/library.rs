//! Loading of included libraries: `Include geometry.` resolves to
//! `geometry.elfe` in the search path or among the bundled libraries.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use crate::desugar::{desugar, DeclKind, DesugarErrors, Premise, Scope};
use crate::notation::{NotationError, NotationPattern};
use crate::parser::{parse_source, ParseError, RawDocument, RawItem};

const BUNDLED: &[(&str, &str, Option<&str>)] = &[
    ("geometry", include_str!("../lib/geometry.elfe"), None),
    ("geometry_lemmas", include_str!("../lib/geometry_lemmas.elfe"), Some(include_str!("../lib/geometry_lemmas.manifest"))),
];

/// Names of the libraries shipped with the checker.
pub fn bundled_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|(n, _, _)| *n).collect()
}

/// Source text of a bundled library.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    BUNDLED.iter().find(|(n, _, _)| *n == name).map(|(_, s, _)| *s)
}

#[derive(Debug, Error)]
pub enum LibraryError {
    #[error("library `{name}` not found (searched {})", searched.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    NotFound { name: String, searched: Vec<PathBuf> },
    #[error("cyclic include: {}", .0.join(" -> "))]
    CyclicInclude(Vec<String>),
    #[error("cannot read library `{name}`: {source}")]
    Io { name: String, source: std::io::Error },
    #[error("in library `{name}`: {source}")]
    Parse { name: String, source: ParseError },
    #[error("in library `{name}`:\n{source}")]
    Desugar { name: String, source: DesugarErrors },
    #[error("in library `{name}`: {source}")]
    Notation { name: String, source: NotationError },
}

#[derive(Clone, Debug)]
pub struct Library {
    pub name: String,
    /// Libraries this one includes directly.
    pub includes: Vec<String>,
    pub notations: Vec<NotationPattern>,
    pub premises: Vec<Premise>,
    /// File path, or `<bundled>`.
    pub source: String,
    /// Lemmas marked as already verified in the manifest.
    pub preverified: BTreeSet<String>,
}

impl Library {
    pub fn count(&self, kind: DeclKind) -> usize {
        self.premises.iter().filter(|p| p.kind == kind).count()
    }

    /// Lemmas that are neither proved in the file nor marked preverified.
    pub fn unverified(&self) -> Vec<&str> {
        self.premises
            .iter()
            .filter(|p| p.kind == DeclKind::Lemma && !self.preverified.contains(&p.label))
            .map(|p| p.label.as_str())
            .collect()
    }
}

/// Lines of the form `preverified: <label>`; other lines are ignored.
pub fn parse_manifest(text: &str) -> BTreeSet<String> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix("preverified:"))
        .map(|l| l.trim().to_string())
        .filter(|l| !l.is_empty())
        .collect()
}

/// Resolves and caches libraries. Search paths are tried in order before the
/// bundled libraries.
#[derive(Debug, Default)]
pub struct LibraryStore {
    search: Vec<PathBuf>,
    cache: Mutex<HashMap<String, Arc<Library>>>,
}

impl LibraryStore {
    pub fn new(search: Vec<PathBuf>) -> LibraryStore {
        LibraryStore { search, cache: Mutex::new(HashMap::new()) }
    }

    pub fn search_paths(&self) -> &[PathBuf] {
        &self.search
    }

    /// Names of every library visible to this store, sorted.
    pub fn available(&self) -> Vec<String> {
        let mut names: BTreeSet<String> = bundled_names().into_iter().map(String::from).collect();
        for dir in &self.search {
            let Ok(entries) = fs::read_dir(dir) else { continue };
            for e in entries.flatten() {
                let path = e.path();
                if path.extension().is_some_and(|x| x == "elfe") {
                    if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                        names.insert(stem.to_string());
                    }
                }
            }
        }
        names.into_iter().collect()
    }

    /// Source text and origin of a library.
    pub fn source(&self, name: &str) -> Result<(String, String, Option<String>), LibraryError> {
        for dir in &self.search {
            let path = dir.join(format!("{name}.elfe"));
            if path.is_file() {
                let text = fs::read_to_string(&path).map_err(|source| LibraryError::Io { name: name.into(), source })?;
                let manifest = fs::read_to_string(dir.join(format!("{name}.manifest"))).ok();
                return Ok((text, path.display().to_string(), manifest));
            }
        }
        match BUNDLED.iter().find(|(n, _, _)| *n == name) {
            Some((_, text, manifest)) => Ok((text.to_string(), "<bundled>".into(), manifest.map(String::from))),
            None => Err(LibraryError::NotFound { name: name.into(), searched: self.search.clone() }),
        }
    }

    pub fn load(&self, name: &str) -> Result<Arc<Library>, LibraryError> {
        self.load_inner(name, &mut Vec::new())
    }

    fn load_inner(&self, name: &str, chain: &mut Vec<String>) -> Result<Arc<Library>, LibraryError> {
        if let Some(lib) = self.cache.lock().expect("library cache").get(name) {
            return Ok(lib.clone());
        }
        if chain.iter().any(|n| n == name) {
            let mut cycle = chain.clone();
            cycle.push(name.to_string());
            return Err(LibraryError::CyclicInclude(cycle));
        }
        let (text, source, manifest) = self.source(name)?;
        let raw = parse_source(&text).map_err(|source| LibraryError::Parse { name: name.into(), source })?;
        chain.push(name.to_string());
        let scope = self.scope_inner(&includes_of(&raw), chain);
        chain.pop();
        let scope = scope?;
        let doc = desugar(&raw, &scope).map_err(|source| LibraryError::Desugar { name: name.into(), source })?;
        let premises = doc
            .decls
            .iter()
            .map(|d| Premise { label: d.label.clone(), kind: d.kind, formula: d.formula.clone(), library: Some(name.to_string()) })
            .collect();
        let lib = Arc::new(Library {
            name: name.to_string(),
            includes: doc.includes,
            notations: doc.notations,
            premises,
            source,
            preverified: manifest.as_deref().map(parse_manifest).unwrap_or_default(),
        });
        self.cache.lock().expect("library cache").insert(name.to_string(), lib.clone());
        Ok(lib)
    }

    /// Ambient scope of a document with the given includes: notations and
    /// premises of every transitively included library, dependencies first.
    pub fn scope(&self, includes: &[String]) -> Result<Scope, LibraryError> {
        self.scope_inner(includes, &mut Vec::new())
    }

    fn scope_inner(&self, includes: &[String], chain: &mut Vec<String>) -> Result<Scope, LibraryError> {
        let mut order: Vec<Arc<Library>> = Vec::new();
        for name in includes {
            self.collect(name, chain, &mut order)?;
        }
        let mut scope = Scope::default();
        for lib in &order {
            for n in &lib.notations {
                scope
                    .notations
                    .register_in_place(n.clone(), Default::default())
                    .map_err(|source| LibraryError::Notation { name: lib.name.clone(), source })?;
            }
            scope.premises.extend(lib.premises.iter().cloned());
        }
        Ok(scope)
    }

    fn collect(&self, name: &str, chain: &mut Vec<String>, order: &mut Vec<Arc<Library>>) -> Result<(), LibraryError> {
        if order.iter().any(|l| l.name == name) {
            return Ok(());
        }
        let lib = self.load_inner(name, chain)?;
        chain.push(name.to_string());
        for inc in &lib.includes {
            self.collect(inc, chain, order)?;
        }
        chain.pop();
        if !order.iter().any(|l| l.name == name) {
            order.push(lib);
        }
        Ok(())
    }
}

/// `Include` targets of a document, in order.
pub fn includes_of(raw: &RawDocument) -> Vec<String> {
    raw.items
        .iter()
        .filter_map(|i| match i {
            RawItem::Include { name, .. } => Some(name.clone()),
            _ => None,
        })
        .collect()
}

/// Search path with the directory of `file` appended when it has one.
pub fn with_document_dir(search: &[PathBuf], file: &Path) -> Vec<PathBuf> {
    let mut out = search.to_vec();
    if let Some(dir) = file.parent().filter(|d| !d.as_os_str().is_empty()) {
        out.push(dir.to_path_buf());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometry_counts() {
        let store = LibraryStore::default();
        let lib = store.load("geometry").unwrap();
        assert_eq!(lib.notations.len(), 4);
        assert_eq!(lib.count(DeclKind::Axiom), 9);
        assert_eq!(lib.count(DeclKind::Definition), 5);
        assert_eq!(lib.count(DeclKind::Lemma), 0);
    }

    #[test]
    fn lemmas_library_sees_geometry() {
        let store = LibraryStore::default();
        let scope = store.scope(&["geometry_lemmas".into()]).unwrap();
        assert!(scope.premise("Pasch").is_some());
        assert!(scope.premise("ColTrans").is_some());
        let lib = store.load("geometry_lemmas").unwrap();
        assert!(lib.unverified().is_empty());
    }

    #[test]
    fn missing_library() {
        let store = LibraryStore::default();
        assert!(matches!(store.load("nosuch"), Err(LibraryError::NotFound { .. })));
    }

    #[test]
    fn cyclic_include() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.elfe"), "Include b.\nAxiom A: p.").unwrap();
        fs::write(dir.path().join("b.elfe"), "Include a.\nAxiom B: q.").unwrap();
        let store = LibraryStore::new(vec![dir.path().to_path_buf()]);
        match store.load("a") {
            Err(LibraryError::CyclicInclude(chain)) => assert_eq!(chain, ["a", "b", "a"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn search_path_shadows_bundled() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("geometry.elfe"), "Axiom Only: p.").unwrap();
        let store = LibraryStore::new(vec![dir.path().to_path_buf()]);
        assert_eq!(store.load("geometry").unwrap().premises.len(), 1);
    }

    #[test]
    fn manifest_lines() {
        let m = parse_manifest("# note\npreverified: A\npreverified:B\nother: C\n");
        assert_eq!(m.into_iter().collect::<Vec<_>>(), ["A", "B"]);
    }
}
