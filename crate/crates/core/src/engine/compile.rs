//! Per-rule analysis: which fast path computes its combination counts and
//! which molecule changes can affect them.

use std::collections::BTreeSet;

use crate::pattern::{LeftItem, LeftPattern, RightItem, RightPattern};
use crate::rewrite::{Rate, RewriteRule};
use crate::term::{Element, Sequence, Spatial};

use super::EngineError;

/// How the combination count of a pattern is computed on one layer.
#[derive(Clone, Debug)]
pub(crate) enum Shape {
    /// Ground unplaced molecules only: `Π C(count, k)`.
    Flat(Vec<(Element, u64)>),
    /// Ground unplaced molecules plus compartment items and no rest
    /// variable: `Π C(count, k)` times the count of `structure`, which only
    /// changes when compartments do.
    Factored {
        ground: Vec<(Element, u64)>,
        structure: LeftPattern,
    },
    Generic,
}

/// Sequences whose unplaced copies a count depends on.
#[derive(Clone, Debug)]
pub(crate) enum Sens {
    Any,
    Seqs(BTreeSet<Sequence>),
}

#[derive(Clone, Debug)]
pub(crate) struct Compiled {
    pub rate: f64,
    pub vertical: bool,
    pub brane: bool,
    pub materialize: bool,
    /// Shape of the left side on a content layer (the environment or a
    /// cell's content).
    pub top: Shape,
    /// Left and right sides used on the world layer, where the top-level
    /// rest variable (if any) is dropped: it only carries the untouched
    /// rest of the world along.
    pub lhs_world: LeftPattern,
    pub rhs_world: RightPattern,
    /// Shape for world-layer matches that take one cell; `None` when the
    /// left side has no compartment item.
    pub world: Option<Shape>,
    /// Molecules on a content layer that `top` depends on.
    pub sens_top: Sens,
    /// Molecules in a cell's content that world matches on it depend on.
    pub sens_content: Sens,
    pub getpos: bool,
    /// Net molecule change of a flat rule on its layer.
    pub flat_delta: Option<(Vec<(Element, u64)>, Vec<(Element, u64)>)>,
}

fn ground_unplaced(item: &LeftItem) -> Option<Element> {
    match item {
        LeftItem::Seq { seq, pos: None } => seq
            .as_ground()
            .map(|s| Element::Seq(s, Spatial::UNPLACED)),
        _ => None,
    }
}

fn right_flat(p: &RightPattern) -> Option<Vec<(Element, u64)>> {
    p.items
        .iter()
        .map(|(i, n)| match i {
            RightItem::Seq { seq, pos } if pos.is_none() => seq
                .as_ground()
                .map(|s| (Element::Seq(s, Spatial::UNPLACED), *n)),
            _ => None,
        })
        .collect()
}

fn shape(p: &LeftPattern, rhs: Option<&RightPattern>) -> Shape {
    if p.rest.is_some() {
        return Shape::Generic;
    }
    let mut ground = Vec::new();
    let mut structure = Vec::new();
    for (item, n) in &p.items {
        match ground_unplaced(item) {
            Some(e) => ground.push((e, *n)),
            None if matches!(item, LeftItem::Comp { .. }) => structure.push((item.clone(), *n)),
            None => return Shape::Generic,
        }
    }
    if structure.is_empty() && rhs.and_then(right_flat).is_some() {
        return Shape::Flat(ground);
    }
    Shape::Factored {
        ground,
        structure: LeftPattern::new(structure, None),
    }
}

fn sens_of(p: &LeftPattern) -> Sens {
    let mut out = BTreeSet::new();
    for (item, _) in &p.items {
        if let LeftItem::Seq { seq, .. } = item {
            match seq.as_ground() {
                Some(s) => {
                    out.insert(s);
                }
                None => return Sens::Any,
            }
        }
    }
    Sens::Seqs(out)
}

impl Compiled {
    pub fn new(rule: &RewriteRule) -> Result<Self, EngineError> {
        let unsupported = |why: &str| EngineError::Unsupported {
            rule: rule.id.clone(),
            reason: why.to_string(),
        };
        let (rate, vertical) = match rule.rate {
            Rate::Finite(k) => (k, false),
            Rate::Infinite => (0.0, true),
        };
        let comps: u64 = rule
            .lhs
            .items
            .iter()
            .filter(|(i, _)| matches!(i, LeftItem::Comp { .. }))
            .map(|(_, n)| n)
            .sum();
        if comps > 1 && !rule.brane {
            return Err(unsupported(
                "more than one compartment on the top level of the left side",
            ));
        }
        let (lhs_world, rhs_world) = match &rule.lhs.rest {
            None => (rule.lhs.clone(), rule.rhs.clone()),
            Some(x) => {
                let kept: Vec<_> = rule
                    .rhs
                    .items
                    .iter()
                    .filter(|(i, _)| matches!(i, RightItem::Var(v) if v == x))
                    .collect();
                if kept.len() != 1 || kept[0].1 != 1 || uses_var_inside(&rule.rhs, x) {
                    return Err(unsupported(
                        "a top-level rest variable must reappear once, unchanged, on the top level of the right side",
                    ));
                }
                let mut lhs = rule.lhs.clone();
                lhs.rest = None;
                let rhs = RightPattern {
                    items: rule
                        .rhs
                        .items
                        .iter()
                        .filter(|(i, _)| !matches!(i, RightItem::Var(v) if v == x))
                        .cloned()
                        .collect(),
                };
                (lhs, rhs)
            }
        };
        let (top, world, sens_top, sens_content) = if rule.brane {
            (
                Shape::Generic,
                None,
                Sens::Seqs(BTreeSet::new()),
                Sens::Seqs(BTreeSet::new()),
            )
        } else {
            let world = (comps == 1).then(|| shape(&lhs_world, None));
            let content = lhs_world.items.iter().find_map(|(i, _)| match i {
                LeftItem::Comp { content, .. } => Some(content),
                _ => None,
            });
            let sens_content = match content {
                None => Sens::Seqs(BTreeSet::new()),
                Some(c) if c.rest.is_none() => Sens::Any,
                Some(c) => sens_of(c),
            };
            (
                shape(&rule.lhs, Some(&rule.rhs)),
                world,
                sens_of(&rule.lhs),
                sens_content,
            )
        };
        let materialize = crate::pattern::matcher::needs_materialize(&rule.lhs);
        // repeated rest variables compare whole layers
        let (sens_top, sens_content) = if materialize {
            (Sens::Any, Sens::Any)
        } else {
            (sens_top, sens_content)
        };
        let flat_delta = match &top {
            Shape::Flat(ground) => Some((ground.clone(), right_flat(&rule.rhs).unwrap_or_default())),
            _ => None,
        };
        Ok(Compiled {
            rate,
            vertical,
            brane: rule.brane,
            materialize,
            top,
            lhs_world,
            rhs_world,
            world,
            sens_top,
            sens_content,
            getpos: rule.uses_getpos(),
            flat_delta,
        })
    }
}

fn uses_var_inside(p: &RightPattern, x: &str) -> bool {
    p.items.iter().any(|(i, _)| match i {
        RightItem::Half(v, _) => &**v == x,
        RightItem::Comp { content, .. } => {
            content
                .items
                .iter()
                .any(|(i, _)| matches!(i, RightItem::Var(v) | RightItem::Half(v, _) if &**v == x))
                || uses_var_inside(content, x)
        }
        _ => false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::SeqPattern;
    use crate::rewrite::{Level, Precondition};

    fn mol_item(s: &str) -> LeftItem {
        LeftItem::Seq {
            seq: SeqPattern::ground(&Sequence::parse_dotted(s)),
            pos: None,
        }
    }

    #[test]
    fn flat_rule_is_flat() {
        let r = RewriteRule::new(
            "S5",
            Level::Molecular,
            false,
            Precondition::default(),
            LeftPattern::molecules(&["Sic1", "Clb5"]),
            RightPattern::molecules(&["Sic1-Clb5"]),
            Rate::Finite(1.0),
        )
        .unwrap();
        let c = Compiled::new(&r).unwrap();
        assert!(matches!(c.top, Shape::Flat(ref g) if g.len() == 2));
        assert!(c.world.is_none());
        assert!(matches!(c.sens_top, Sens::Seqs(ref s) if s.len() == 2));
    }

    #[test]
    fn compartment_rule_is_factored() {
        let lhs = LeftPattern::new(
            [
                (mol_item("GF"), 1),
                (
                    LeftItem::Comp {
                        brane: LeftPattern::new([(mol_item("m"), 1)], Some("B".into())),
                        pos: Some("p".into()),
                        content: LeftPattern::new([], Some("X".into())),
                    },
                    1,
                ),
            ],
            None,
        );
        let r = RewriteRule::new(
            "S1",
            Level::Molecular,
            false,
            Precondition::default(),
            lhs,
            RightPattern::default(),
            Rate::Finite(1.0),
        )
        .unwrap();
        let c = Compiled::new(&r).unwrap();
        assert!(matches!(c.world, Some(Shape::Factored { ref ground, .. }) if ground.len() == 1));
        assert!(matches!(c.sens_content, Sens::Seqs(ref s) if s.is_empty()));
    }

    #[test]
    fn dropped_rest_is_unsupported() {
        let r = RewriteRule::new(
            "wipe",
            Level::Molecular,
            false,
            Precondition::default(),
            LeftPattern::new([(mol_item("a"), 1)], Some("X".into())),
            RightPattern::default(),
            Rate::Finite(1.0),
        )
        .unwrap();
        assert!(matches!(Compiled::new(&r), Err(EngineError::Unsupported { .. })));
    }
}
