//! Library side of the `scls-sim` command: loading models, running them
//! and writing the output files. The binary is a thin clap front end.

pub mod inspect;
pub mod output;
pub mod run;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use scls::dsl::{self, LoadError};
use scls::engine::EngineError;
use scls::model::Model;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
    #[error("{0}")]
    Mismatch(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Parse(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
            CliError::Mismatch(_) => 4,
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Model(_) | EngineError::Initial(_) | EngineError::Unsupported { .. } => {
                CliError::Config(e.to_string())
            }
            EngineError::Rewrite { .. } | EngineError::UnplacedCell { .. } => {
                CliError::Runtime(e.to_string())
            }
        }
    }
}

/// Splits `key=value` overrides and parses the values as numbers.
pub fn parse_overrides(items: &[String]) -> Result<BTreeMap<String, f64>, CliError> {
    let mut out = BTreeMap::new();
    for item in items {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--config `{item}`: expected key=value")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("--config `{item}`: `{v}` is not a number")))?;
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

/// Reads and parses a model file, applying parameter overrides.
pub fn load_model(path: &Path, overrides: &BTreeMap<String, f64>) -> Result<Model, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Parse(format!("{}: {e}", path.display())))?;
    dsl::parse_model_with(&text, overrides).map_err(|e| match e {
        LoadError::Syntax(e) => CliError::Parse(format!("{}:{e}", path.display())),
        LoadError::Model(e) => CliError::Config(format!("{}: {e}", path.display())),
    })
}
