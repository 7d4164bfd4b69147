//! Bundled grammar and constraint specs.
//!
//! A spec is a directory holding `grammar.bnf` and `constraint.isla`. The
//! specs under `specs/` at the workspace root are compiled into the crate.

use std::path::Path;

use crate::error::Error;
use crate::formula::{parse_formula, Formula};
use crate::grammar::{parse_grammar, Grammar};
use crate::predicates::Registry;

macro_rules! bundled {
    ($($name:literal),* $(,)?) => {
        const BUNDLED: &[(&str, &str, &str, &str)] = &[$((
            $name,
            include_str!(concat!("../../../specs/", $name, "/grammar.bnf")),
            include_str!(concat!("../../../specs/", $name, "/constraint.isla")),
            include_str!(concat!("../../../specs/", $name, "/invalid.txt")),
        )),*];
    };
}

bundled!("xml", "rest", "csv", "tar-lite", "icmp-lite", "dot", "racket", "udp-lite");

/// A parsed and type-checked spec.
pub struct Spec {
    pub name: String,
    pub grammar: Grammar,
    pub formula: Formula,
    pub registry: Registry,
    /// A sample that parses but violates the constraint, if the spec has one.
    pub invalid_sample: Option<String>,
}

/// Names of the bundled specs.
pub fn spec_names() -> Vec<&'static str> {
    BUNDLED.iter().map(|b| b.0).collect()
}

pub fn from_texts(name: &str, grammar: &str, constraint: &str) -> Result<Spec, Error> {
    let registry = Registry::standard();
    let grammar = parse_grammar(grammar)?;
    let formula = parse_formula(constraint, &grammar, &registry)?;
    Ok(Spec { name: name.to_string(), grammar, formula, registry, invalid_sample: None })
}

pub fn load_spec(name: &str) -> Result<Spec, Error> {
    let (_, g, c, bad) = BUNDLED
        .iter()
        .find(|b| b.0 == name)
        .ok_or_else(|| Error::UnknownSpec(name.to_string()))?;
    let mut spec = from_texts(name, g, c)?;
    spec.invalid_sample = Some(bad.to_string());
    Ok(spec)
}

fn read(path: &Path) -> Result<String, Error> {
    std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Loads a spec directory.
pub fn load_spec_dir(dir: &Path) -> Result<Spec, Error> {
    let name = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let g = read(&dir.join("grammar.bnf"))?;
    let c = read(&dir.join("constraint.isla"))?;
    let mut spec = from_texts(&name, &g, &c)?;
    let bad = dir.join("invalid.txt");
    if bad.exists() {
        spec.invalid_sample = Some(read(&bad)?);
    }
    Ok(spec)
}
