//! Spatial Calculus of Looping Sequences: terms, pattern rewriting, a
//! discrete spatial grid and a stochastic simulator, plus a budding-yeast
//! cell-cycle model and a small text format for models.

pub mod grid;
pub mod multiset;
pub mod oracle;
pub mod pattern;
pub mod pts;
pub mod rewrite;
pub mod term;
pub mod model;
pub mod engine;
pub mod yeast;
pub mod dsl;
