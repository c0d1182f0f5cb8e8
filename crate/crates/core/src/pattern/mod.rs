//! Left/right patterns, instantiations and matching.
//!
//! Items written without a position binder match only unplaced elements of
//! radius 0 (plain molecules), and produce such elements on the right-hand
//! side. Positional objects are matched through a named position variable,
//! which binds the element's full spatial information.

pub(crate) mod comb;
pub(crate) mod instantiate;
pub(crate) mod matcher;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::term::{Brane, Sequence, Spatial, Symbol, Term};

pub use comb::{binom, binomial, comb, Multiplicity};
pub use instantiate::{
    instantiate, instantiate_elements, instantiate_left, InstantiateHooks, PlainHooks,
};
pub use matcher::{match_brane_pattern, match_pattern, Bindings, Bound, Match, Site, SiteStep};

pub type Var = Arc<str>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SeqItem {
    Sym(Symbol),
    /// `x ∈ 𝓧`: exactly one symbol.
    SymVar(Var),
    /// `x̃ ∈ SV`: any contiguous subsequence, possibly ε.
    SeqVar(Var),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SeqPattern(pub Vec<SeqItem>);

impl SeqPattern {
    pub fn ground(seq: &Sequence) -> Self {
        SeqPattern(seq.0.iter().cloned().map(SeqItem::Sym).collect())
    }

    pub fn as_ground(&self) -> Option<Sequence> {
        self.0
            .iter()
            .map(|i| match i {
                SeqItem::Sym(s) => Some(s.clone()),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Sequence)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LeftItem {
    Seq {
        seq: SeqPattern,
        pos: Option<Var>,
    },
    Comp {
        brane: LeftPattern,
        pos: Option<Var>,
        content: LeftPattern,
    },
}

/// A layer pattern: items (with copy counts) plus an optional variable that
/// absorbs the rest of the layer. Used both for term layers (rest is a term
/// variable `X`) and for branes (rest is a brane variable `X̄`, items are
/// sequences only).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LeftPattern {
    pub items: Vec<(LeftItem, u64)>,
    pub rest: Option<Var>,
}

impl LeftPattern {
    /// Builds a pattern, merging identical items into counted copies.
    pub fn new(items: impl IntoIterator<Item = (LeftItem, u64)>, rest: Option<Var>) -> Self {
        let mut merged: Vec<(LeftItem, u64)> = Vec::new();
        for (item, n) in items {
            if n == 0 {
                continue;
            }
            match merged.iter_mut().find(|(i, _)| *i == item) {
                Some((_, m)) => *m += n,
                None => merged.push((item, n)),
            }
        }
        LeftPattern {
            items: merged,
            rest,
        }
    }

    pub fn molecules(names: &[&str]) -> Self {
        Self::new(
            names.iter().map(|n| {
                (
                    LeftItem::Seq {
                        seq: SeqPattern::ground(&Sequence::parse_dotted(n)),
                        pos: None,
                    },
                    1,
                )
            }),
            None,
        )
    }

    /// True when the pattern has no variables at all (no rest, no binders).
    pub fn is_flat_ground(&self) -> bool {
        self.rest.is_none()
            && self.items.iter().all(|(i, _)| match i {
                LeftItem::Seq { seq, pos } => pos.is_none() && seq.as_ground().is_some(),
                LeftItem::Comp { .. } => false,
            })
    }

    pub fn collect_vars(&self, out: &mut BTreeMap<Var, VarKind>, brane: bool) -> Result<(), Var> {
        if let Some(r) = &self.rest {
            add_var(out, r, if brane { VarKind::Brane } else { VarKind::Term })?;
        }
        for (item, _) in &self.items {
            match item {
                LeftItem::Seq { seq, pos } => {
                    seq_vars(seq, out)?;
                    if let Some(p) = pos {
                        add_var(out, p, VarKind::Position)?;
                    }
                }
                LeftItem::Comp {
                    brane,
                    pos,
                    content,
                } => {
                    brane.collect_vars(out, true)?;
                    if let Some(p) = pos {
                        add_var(out, p, VarKind::Position)?;
                    }
                    content.collect_vars(out, false)?;
                }
            }
        }
        Ok(())
    }

    /// Ground symbols mentioned anywhere in the pattern.
    pub fn symbols(&self, out: &mut BTreeSet<Symbol>) {
        for (item, _) in &self.items {
            match item {
                LeftItem::Seq { seq, .. } => seq_symbols(seq, out),
                LeftItem::Comp { brane, content, .. } => {
                    brane.symbols(out);
                    content.symbols(out);
                }
            }
        }
    }

    pub fn has_compartment_item(&self) -> bool {
        self.items
            .iter()
            .any(|(i, _)| matches!(i, LeftItem::Comp { .. }))
    }
}

fn seq_symbols(seq: &SeqPattern, out: &mut BTreeSet<Symbol>) {
    for i in &seq.0 {
        if let SeqItem::Sym(s) = i {
            out.insert(s.clone());
        }
    }
}

fn seq_vars(seq: &SeqPattern, out: &mut BTreeMap<Var, VarKind>) -> Result<(), Var> {
    for i in &seq.0 {
        match i {
            SeqItem::Sym(_) => {}
            SeqItem::SymVar(v) => add_var(out, v, VarKind::Symbol)?,
            SeqItem::SeqVar(v) => add_var(out, v, VarKind::Sequence)?,
        }
    }
    Ok(())
}

fn add_var(out: &mut BTreeMap<Var, VarKind>, v: &Var, kind: VarKind) -> Result<(), Var> {
    match out.get(v) {
        Some(k) if *k != kind => Err(v.clone()),
        _ => {
            out.insert(v.clone(), kind);
            Ok(())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum VarKind {
    Symbol,
    Sequence,
    Term,
    Brane,
    Position,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Half {
    First,
    Second,
}

/// Position-update function `g` on the right-hand side.
#[derive(Clone, Debug, PartialEq)]
pub enum PosFn {
    /// Unplaced with the given radius.
    Unplaced {
        radius: f64,
    },
    /// τ(var), optionally shifted and/or resized.
    Keep {
        var: Var,
        offset: Option<[f64; 3]>,
        radius: Option<f64>,
    },
    At {
        center: [f64; 3],
        radius: f64,
    },
    /// A free cube adjacent to τ(var), found by the grid's getpos.
    GetPos {
        var: Var,
        radius: f64,
    },
}

impl PosFn {
    pub const NONE: PosFn = PosFn::Unplaced { radius: 0.0 };

    pub fn var(&self) -> Option<&Var> {
        match self {
            PosFn::Keep { var, .. } | PosFn::GetPos { var, .. } => Some(var),
            _ => None,
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, PosFn::Unplaced { radius } if *radius == 0.0)
    }

    /// Whether this function can move an object to a new location.
    pub fn relocates(&self) -> bool {
        match self {
            PosFn::Unplaced { .. } => false,
            PosFn::Keep { offset, .. } => offset.is_some(),
            PosFn::At { .. } | PosFn::GetPos { .. } => true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BraneRef {
    Var(Var),
    Half(Var, Half),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RightBrane {
    pub items: Vec<(SeqPattern, PosFn, u64)>,
    pub vars: Vec<BraneRef>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum RightItem {
    Seq {
        seq: SeqPattern,
        pos: PosFn,
    },
    Comp {
        brane: RightBrane,
        pos: PosFn,
        content: RightPattern,
    },
    Var(Var),
    /// One of the two random halves of a term variable's multiset.
    Half(Var, Half),
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct RightPattern {
    pub items: Vec<(RightItem, u64)>,
}

impl RightPattern {
    pub fn molecules(names: &[&str]) -> Self {
        RightPattern {
            items: names
                .iter()
                .map(|n| {
                    (
                        RightItem::Seq {
                            seq: SeqPattern::ground(&Sequence::parse_dotted(n)),
                            pos: PosFn::NONE,
                        },
                        1,
                    )
                })
                .collect(),
        }
    }

    pub fn is_flat_ground(&self) -> bool {
        self.items.iter().all(|(i, _)| match i {
            RightItem::Seq { seq, pos } => pos.is_none() && seq.as_ground().is_some(),
            _ => false,
        })
    }

    /// Variables referenced, with the position functions that reference them.
    pub fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        for (item, _) in &self.items {
            match item {
                RightItem::Seq { seq, pos } => {
                    for s in &seq.0 {
                        match s {
                            SeqItem::SymVar(v) | SeqItem::SeqVar(v) => {
                                out.insert(v.clone());
                            }
                            SeqItem::Sym(_) => {}
                        }
                    }
                    if let Some(v) = pos.var() {
                        out.insert(v.clone());
                    }
                }
                RightItem::Comp {
                    brane,
                    pos,
                    content,
                } => {
                    for (seq, p, _) in &brane.items {
                        RightPattern {
                            items: vec![(
                                RightItem::Seq {
                                    seq: seq.clone(),
                                    pos: p.clone(),
                                },
                                1,
                            )],
                        }
                        .collect_vars(out);
                    }
                    for b in &brane.vars {
                        match b {
                            BraneRef::Var(v) | BraneRef::Half(v, _) => {
                                out.insert(v.clone());
                            }
                        }
                    }
                    if let Some(v) = pos.var() {
                        out.insert(v.clone());
                    }
                    content.collect_vars(out);
                }
                RightItem::Var(v) | RightItem::Half(v, _) => {
                    out.insert(v.clone());
                }
            }
        }
    }

    pub fn symbols(&self, out: &mut BTreeSet<Symbol>) {
        for (item, _) in &self.items {
            match item {
                RightItem::Seq { seq, .. } => seq_symbols(seq, out),
                RightItem::Comp { brane, content, .. } => {
                    for (s, _, _) in &brane.items {
                        seq_symbols(s, out);
                    }
                    content.symbols(out);
                }
                RightItem::Var(_) | RightItem::Half(..) => {}
            }
        }
    }

    /// Visits every position function in the pattern.
    pub fn pos_fns(&self, f: &mut impl FnMut(&PosFn)) {
        for (item, _) in &self.items {
            match item {
                RightItem::Seq { pos, .. } => f(pos),
                RightItem::Comp {
                    brane,
                    pos,
                    content,
                } => {
                    f(pos);
                    for (_, p, _) in &brane.items {
                        f(p);
                    }
                    content.pos_fns(f);
                }
                _ => {}
            }
        }
    }
}

/// A value bound to a non-position variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Value {
    Symbol(Symbol),
    Sequence(Sequence),
    Term(Term),
    Brane(Brane),
}

/// (τ, σ): position variables and all other variables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Instantiation {
    pub tau: BTreeMap<Var, Spatial>,
    pub sigma: BTreeMap<Var, Value>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PatternError {
    #[error("variable `{0}` is not bound by the instantiation")]
    Unbound(String),
    #[error("variable `{0}` is bound to a value of the wrong kind")]
    WrongKind(String),
    #[error("cannot offset unplaced position of `{0}`")]
    OffsetUnplaced(String),
    #[error("getpos requested for `{0}` but no placement hook is available")]
    NoPlacement(String),
    #[error("no free position next to `{0}`")]
    Full(String),
    #[error("binom has a zero denominator for element {0}")]
    ZeroDenominator(String),
}
