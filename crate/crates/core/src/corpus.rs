//! The example documents shipped with the checker and their expectations.

use serde::Deserialize;

const MANIFEST: &str = include_str!("../corpus/manifest.toml");

const FILES: &[(&str, &str)] = &[
    ("midpoint_extension.elfe", include_str!("../corpus/midpoint_extension.elfe")),
    ("line_extension.elfe", include_str!("../corpus/line_extension.elfe")),
    ("line_extension_short.elfe", include_str!("../corpus/line_extension_short.elfe")),
    ("midpoint_theorem.elfe", include_str!("../corpus/midpoint_theorem.elfe")),
    ("broken.elfe", include_str!("../corpus/broken.elfe")),
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Verified,
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize)]
pub struct ExampleEntry {
    /// Display name, e.g. "Midpoint Extension".
    pub name: String,
    pub file: String,
    pub expect: Expectation,
    /// Obligation ids the built-in prover is not expected to discharge.
    #[serde(default)]
    pub requires_external: Vec<String>,
}

#[derive(Deserialize)]
struct Manifest {
    example: Vec<ExampleEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub entry: ExampleEntry,
    pub text: &'static str,
}

/// Every bundled example, in manifest order.
pub fn examples() -> Vec<Example> {
    let manifest: Manifest = toml::from_str(MANIFEST).expect("bundled corpus manifest parses");
    manifest
        .example
        .into_iter()
        .map(|entry| {
            let text = FILES.iter().find(|(f, _)| *f == entry.file).map(|(_, t)| *t).expect("manifest entry has a bundled file");
            Example { entry, text }
        })
        .collect()
}

/// Looks an example up by display name or file stem.
pub fn example(name: &str) -> Option<Example> {
    examples().into_iter().find(|e| e.entry.name == name || e.entry.file.strip_suffix(".elfe") == Some(name))
}
