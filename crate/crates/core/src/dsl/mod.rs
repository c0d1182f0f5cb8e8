//! Text format for terms and models. See `docs/dsl.md` for the grammar.

mod parse;
mod print;
pub mod random;

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{Model, ModelError};
use crate::term::{normalize, Term};
use crate::yeast::{FAST, SLOW, VERYFAST, VERYSLOW};

use parse::Parser;

/// Names with a fixed meaning that must be quoted when used as molecules.
const KEYWORDS: &[&str] = &[
    "loop", "empty", "eps", "half1", "half2", "getpos", "rate", "if", "and", "brane", "inf",
];

/// Built-in rate categories, usable in any expression.
const CATEGORIES: &[(&str, f64)] = &[
    ("veryfast", VERYFAST),
    ("fast", FAST),
    ("slow", SLOW),
    ("veryslow", VERYSLOW),
];

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{line}:{col}: {msg}")]
pub struct DslError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LoadError {
    #[error(transparent)]
    Syntax(#[from] DslError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl LoadError {
    /// Errors caused by bad parameter values rather than bad text.
    pub fn is_config(&self) -> bool {
        matches!(self, LoadError::Model(_))
    }
}

pub fn parse_term(text: &str) -> Result<Term, DslError> {
    let mut p = Parser::new(text);
    let t = p.term()?;
    if !p.at_end() {
        return Err(p.err("unexpected input after the term"));
    }
    Ok(normalize(&t))
}

/// Prints a term so that `parse_term` gives it back.
pub fn serialize_term(t: &Term) -> String {
    print::term(t)
}

pub fn parse_model(text: &str) -> Result<Model, LoadError> {
    parse_model_with(text, &BTreeMap::new())
}

/// Parses a model, replacing the values of the named `param`s. Every
/// override must name a parameter the model defines.
pub fn parse_model_with(
    text: &str,
    overrides: &BTreeMap<String, f64>,
) -> Result<Model, LoadError> {
    let mut p = Parser::new(text);
    let (model, used) = p.model(overrides)?;
    if let Some(k) = overrides.keys().find(|k| !used.contains(*k)) {
        return Err(ModelError::UnknownParam(k.clone()).into());
    }
    model.validate()?;
    Ok(model)
}

/// Prints a model so that `parse_model` gives it back.
pub fn serialize(model: &Model) -> String {
    print::model(model)
}

#[cfg(test)]
mod tests;
