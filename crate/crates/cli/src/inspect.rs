//! `validate` and `oracle`: static checks and the brute-force comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use scls::engine::Engine;
use scls::grid::Grid;
use scls::model::Model;
use scls::multiset::Multiset;
use scls::oracle::brute_force_rule;
use scls::pattern::{InstantiateHooks, PatternError};
use scls::pts::step_distribution;
use scls::rewrite::{reactant_combinations, Rate};
use scls::term::{Compartment, Element, Sequence, Spatial, Symbol, Term};

use crate::CliError;

fn count_species(t: &Term, out: &mut BTreeMap<Sequence, u64>) {
    for (e, n) in t.0.iter() {
        match e {
            Element::Seq(s, _) => *out.entry(s.clone()).or_default() += n,
            Element::Comp(c) => {
                for (b, k) in c.brane.iter() {
                    *out.entry(b.seq.clone()).or_default() += k * n;
                }
                let mut inner = BTreeMap::new();
                count_species(&c.content, &mut inner);
                for (s, k) in inner {
                    *out.entry(s).or_default() += k * n;
                }
            }
        }
    }
}

/// Runs the static checks on a loaded model and describes it.
pub fn validate(model: &Model) -> Result<String, CliError> {
    let engine = Engine::new(model, model.seed)?;
    let g = &model.geometry;
    let [v, m, t] = model.level_counts();
    let mut species = BTreeMap::new();
    count_species(&model.initial, &mut species);
    let mut in_rules = BTreeSet::new();
    for r in &model.rules {
        r.lhs.symbols(&mut in_rules);
        r.rhs.symbols(&mut in_rules);
    }
    let initial_symbols: BTreeSet<Symbol> = species
        .keys()
        .flat_map(|s| s.symbols().iter().cloned())
        .collect();
    let mut out = String::new();
    let _ = writeln!(out, "model {}", model.name);
    let _ = writeln!(
        out,
        "geometry: {}D, sphere radius {}, cube size {}, {} cubes",
        g.dim,
        g.sphere_radius,
        g.cube_size,
        engine.grid().capacity()
    );
    let _ = writeln!(out, "{v} visual / {m} molecular / {t} vertical rules");
    let _ = writeln!(out, "cells: {}", engine.cells().count());
    let _ = writeln!(out, "species in the initial term: {}", species.len());
    for (s, n) in &species {
        let _ = writeln!(out, "  {s:<16} {n}");
    }
    let only: Vec<String> = in_rules
        .difference(&initial_symbols)
        .map(|s| s.to_string())
        .collect();
    if !only.is_empty() {
        let _ = writeln!(out, "symbols only produced or tested by rules: {}", only.join(" "));
    }
    Ok(out)
}

/// Caps the multiplicity of every element, membranes included, at `max`.
pub fn truncate(t: &Term, max: u64) -> Term {
    let mut out = Multiset::new();
    for (e, n) in t.0.iter() {
        let e = match e {
            Element::Comp(c) => {
                let mut brane = Multiset::new();
                for (b, k) in c.brane.iter() {
                    brane.insert(b.clone(), k.min(max));
                }
                Element::Comp(Box::new(Compartment {
                    brane,
                    spatial: c.spatial,
                    content: truncate(&c.content, max),
                }))
            }
            e => e.clone(),
        };
        out.insert(e, n.min(max));
    }
    Term(out)
}

/// Places newborn objects one cube along x from their parent; enough to
/// enumerate successors without a grid.
struct ShiftHooks {
    step: f64,
}

impl InstantiateHooks for ShiftHooks {
    fn getpos(&mut self, var: &str, near: &Spatial, radius: f64) -> Result<Spatial, PatternError> {
        let [x, y, z] = near
            .center()
            .ok_or_else(|| PatternError::NoPlacement(var.to_string()))?;
        Ok(Spatial::at([x + self.step, y, z], radius))
    }

    fn split(&mut self, n: u64) -> u64 {
        n / 2
    }
}

pub struct OracleReport {
    pub text: String,
    pub mismatches: usize,
}

fn close(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs())
}

/// Compares the fast combination counts with brute-force enumeration on
/// the (truncated) initial term, then checks that the one-step reaction
/// probabilities of the discrete semantics are proportional to `k·c`.
/// `fault` adds one to the first fast count, to exercise the failure path.
pub fn oracle(model: &Model, max_elements: u64, fault: bool) -> Result<OracleReport, CliError> {
    let t = truncate(&model.initial, max_elements);
    let mut text = String::new();
    let mut mismatches = 0;
    let _ = writeln!(text, "term: {t}");
    let _ = writeln!(text, "{:<10} {:>12} {:>12}", "rule", "comb/binom", "brute force");
    let mut fast = Vec::with_capacity(model.rules.len());
    for (j, r) in model.rules.iter().enumerate() {
        let mut c = reactant_combinations(r, &t);
        if fault && j == 0 {
            c += 1;
        }
        let b = brute_force_rule(r, &t);
        let mark = if c == b { "" } else { "  MISMATCH" };
        mismatches += usize::from(c != b);
        let _ = writeln!(text, "{:<10} {c:>12} {b:>12}{mark}", r.id);
        fast.push(c);
    }
    let n = model
        .rules
        .iter()
        .filter_map(|r| r.rate.finite())
        .fold(0.0, f64::max);
    if n > 0.0 {
        let mut hooks = ShiftHooks {
            step: model.geometry.cube_size,
        };
        let d = step_distribution(&t, &model.rules, n, &mut hooks)
            .map_err(|e| CliError::Runtime(format!("step distribution: {e}")))?;
        let _ = writeln!(
            text,
            "step distribution: N = {n}, m_T = {}, dt = {}, no reaction = {}, {} successors",
            d.combinations,
            d.dt,
            d.no_reaction_prob,
            d.entries.len()
        );
        let m: u128 = model
            .rules
            .iter()
            .zip(&fast)
            .filter(|(r, _)| matches!(r.rate, Rate::Finite(_)))
            .map(|(_, c)| *c)
            .sum();
        let _ = writeln!(text, "{:<10} {:>14} {:>14}", "rule", "P(step)", "k*c/(N*m)");
        for ((r, c), p) in model.rules.iter().zip(&fast).zip(&d.by_rule) {
            let Rate::Finite(k) = r.rate else { continue };
            let want = if m == 0 {
                0.0
            } else {
                k * *c as f64 / (n * m as f64)
            };
            let ok = close(*p, want);
            mismatches += usize::from(!ok);
            let mark = if ok { "" } else { "  MISMATCH" };
            let _ = writeln!(text, "{:<10} {p:>14.9e} {want:>14.9e}{mark}", r.id);
        }
    }
    let _ = writeln!(text, "{mismatches} mismatches");
    Ok(OracleReport { text, mismatches })
}

/// Number of usable cubes for a model's geometry.
pub fn capacity(model: &Model) -> Result<usize, CliError> {
    let g = &model.geometry;
    Grid::new(g.dim, g.cube_size, g.sphere_radius, g.max_object_radius)
        .map(|g| g.capacity())
        .map_err(|e| CliError::Config(e.to_string()))
}
