//! A complete simulation model: initial term, rules, geometry and the
//! naming conventions the engine uses to find cells, stages and nuclei.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::rewrite::{Level, RewriteRule, RuleError};
use crate::term::{Element, Symbol, Term};

/// The sphere and its cube grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Geometry {
    /// 2 or 3.
    pub dim: usize,
    pub sphere_radius: f64,
    pub cube_size: f64,
    /// Largest radius any top-level object may take.
    pub max_object_radius: f64,
}

/// Symbols with a fixed meaning for the engine and the frame output.
#[derive(Clone, Debug, PartialEq)]
pub struct Conventions {
    /// Top-level compartments with this membrane symbol are cells.
    pub cell_membrane: Symbol,
    pub nucleus_membrane: Symbol,
    /// `stage1`, `stage2`, ... in a cell's content give its stage.
    pub stage_prefix: String,
    /// `visualised1`, ... mark a stage waiting to be shown.
    pub visual_prefix: String,
    pub virus: Symbol,
    pub virus_threshold: u64,
}

impl Default for Conventions {
    fn default() -> Self {
        Conventions {
            cell_membrane: Symbol::new("m"),
            nucleus_membrane: Symbol::new("n"),
            stage_prefix: "stage".into(),
            visual_prefix: "visualised".into(),
            virus: Symbol::new("virus"),
            virus_threshold: 5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub name: String,
    /// Numeric parameters the model was built from, echoed in outputs.
    pub params: BTreeMap<String, f64>,
    pub geometry: Geometry,
    pub conventions: Conventions,
    /// Contents of the bounding sphere: cells plus free environment.
    pub initial: Term,
    pub rules: Vec<RewriteRule>,
    /// Rates as written, e.g. `slow*s` or `1/40`, by rule id. Only used to
    /// print the model back; the rules carry the evaluated rates.
    pub rate_text: BTreeMap<String, String>,
    pub seed: u64,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error("duplicate rule id `{0}`")]
    DuplicateRule(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
    #[error("parameter `{name}`: {reason}")]
    BadParam { name: String, reason: String },
}

impl Model {
    pub fn validate(&self) -> Result<(), ModelError> {
        let g = &self.geometry;
        if !(g.dim == 2 || g.dim == 3) {
            return Err(ModelError::Geometry(format!("dimension must be 2 or 3, got {}", g.dim)));
        }
        for (name, v) in [
            ("sphere radius", g.sphere_radius),
            ("cube size", g.cube_size),
            ("max object radius", g.max_object_radius),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(ModelError::Geometry(format!("{name} must be positive, got {v}")));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for r in &self.rules {
            r.validate()?;
            if !seen.insert(r.id.as_str()) {
                return Err(ModelError::DuplicateRule(r.id.clone()));
            }
        }
        Ok(())
    }

    /// Rule counts per level, in visual, molecular, vertical order.
    pub fn level_counts(&self) -> [usize; 3] {
        let mut out = [0; 3];
        for r in &self.rules {
            out[match r.level {
                Level::Visual => 0,
                Level::Molecular => 1,
                Level::Vertical => 2,
            }] += 1;
        }
        out
    }

    pub fn rule(&self, id: &str) -> Option<&RewriteRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// True for a top-level compartment that counts as a cell.
    pub fn is_cell(&self, e: &Element) -> bool {
        e.as_compartment()
            .is_some_and(|c| c.has_membrane_symbol(&self.conventions.cell_membrane))
    }
}

/// Level of infection of a cell by its virus count.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Infection {
    Healthy,
    Light,
    Severe,
}

impl Infection {
    pub fn classify(viruses: u64, threshold: u64) -> Self {
        if viruses == 0 {
            Infection::Healthy
        } else if viruses < threshold {
            Infection::Light
        } else {
            Infection::Severe
        }
    }

    pub fn colour(self) -> &'static str {
        match self {
            Infection::Healthy => "orange",
            Infection::Light => "green",
            Infection::Severe => "blue",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn infection_boundaries() {
        assert_eq!(Infection::classify(0, 5), Infection::Healthy);
        assert_eq!(Infection::classify(4, 5), Infection::Light);
        assert_eq!(Infection::classify(5, 5), Infection::Severe);
        assert_eq!(Infection::classify(1, 1).colour(), "blue");
        assert_eq!(Infection::Healthy.colour(), "orange");
    }
}
