use std::collections::BTreeMap;

use super::{
    BraneRef, Half, Instantiation, LeftItem, LeftPattern, PatternError, PosFn, RightBrane,
    RightItem, RightPattern, SeqItem, SeqPattern, Value, Var,
};
use crate::multiset::Multiset;
use crate::term::{Brane, BraneElement, Compartment, Element, Sequence, Spatial, Term};

/// Side effects needed while building a right-hand side: free positions on
/// the grid and random splitting of populations.
pub trait InstantiateHooks {
    /// A free position for an object of `radius` next to `near`.
    fn getpos(&mut self, var: &str, near: &Spatial, radius: f64) -> Result<Spatial, PatternError>;

    /// How many of `n` identical units go to the first half.
    fn split(&mut self, n: u64) -> u64;
}

/// No grid; halves split deterministically (first half gets `n / 2`).
pub struct PlainHooks;

impl InstantiateHooks for PlainHooks {
    fn getpos(&mut self, var: &str, _: &Spatial, _: f64) -> Result<Spatial, PatternError> {
        Err(PatternError::NoPlacement(var.to_string()))
    }

    fn split(&mut self, n: u64) -> u64 {
        n / 2
    }
}

fn seq_value(p: &SeqPattern, inst: &Instantiation) -> Result<Sequence, PatternError> {
    let mut out = Vec::with_capacity(p.0.len());
    for item in &p.0 {
        match item {
            SeqItem::Sym(s) => out.push(s.clone()),
            SeqItem::SymVar(v) => match inst.sigma.get(v) {
                Some(Value::Symbol(s)) => out.push(s.clone()),
                Some(_) => return Err(PatternError::WrongKind(v.to_string())),
                None => return Err(PatternError::Unbound(v.to_string())),
            },
            SeqItem::SeqVar(v) => match inst.sigma.get(v) {
                Some(Value::Sequence(s)) => out.extend(s.0.iter().cloned()),
                Some(_) => return Err(PatternError::WrongKind(v.to_string())),
                None => return Err(PatternError::Unbound(v.to_string())),
            },
        }
    }
    Ok(Sequence(out))
}

fn tau(inst: &Instantiation, v: &Var) -> Result<Spatial, PatternError> {
    inst.tau
        .get(v)
        .copied()
        .ok_or_else(|| PatternError::Unbound(v.to_string()))
}

fn left_pos(pos: &Option<Var>, inst: &Instantiation) -> Result<Spatial, PatternError> {
    match pos {
        None => Ok(Spatial::UNPLACED),
        Some(v) => tau(inst, v),
    }
}

/// `P_L τσ` for a term layer pattern, including its rest variable.
pub fn instantiate_left(p: &LeftPattern, inst: &Instantiation) -> Result<Term, PatternError> {
    let mut out = Multiset::new();
    for (item, n) in &p.items {
        let e = match item {
            LeftItem::Seq { seq, pos } => Element::Seq(seq_value(seq, inst)?, left_pos(pos, inst)?),
            LeftItem::Comp {
                brane,
                pos,
                content,
            } => Element::Comp(Box::new(Compartment {
                brane: instantiate_left_brane(brane, inst)?,
                spatial: left_pos(pos, inst)?,
                content: instantiate_left(content, inst)?,
            })),
        };
        out.insert(e, *n);
    }
    if let Some(r) = &p.rest {
        match inst.sigma.get(r) {
            Some(Value::Term(t)) => out.union(t.0.clone()),
            Some(_) => return Err(PatternError::WrongKind(r.to_string())),
            None => return Err(PatternError::Unbound(r.to_string())),
        }
    }
    Ok(Term(out))
}

pub(crate) fn instantiate_left_brane(
    p: &LeftPattern,
    inst: &Instantiation,
) -> Result<Brane, PatternError> {
    let mut out = Multiset::new();
    for (item, n) in &p.items {
        match item {
            LeftItem::Seq { seq, pos } => out.insert(
                BraneElement {
                    seq: seq_value(seq, inst)?,
                    spatial: left_pos(pos, inst)?,
                },
                *n,
            ),
            LeftItem::Comp { .. } => {
                return Err(PatternError::WrongKind("compartment in brane".into()))
            }
        }
    }
    if let Some(r) = &p.rest {
        match inst.sigma.get(r) {
            Some(Value::Brane(b)) => out.union(b.clone()),
            Some(_) => return Err(PatternError::WrongKind(r.to_string())),
            None => return Err(PatternError::Unbound(r.to_string())),
        }
    }
    Ok(out)
}

struct Builder<'a> {
    inst: &'a Instantiation,
    hooks: &'a mut dyn InstantiateHooks,
    term_halves: BTreeMap<Var, (Term, Term)>,
    brane_halves: BTreeMap<Var, (Brane, Brane)>,
}

fn split_multiset<T: Ord + Clone>(
    m: &Multiset<T>,
    hooks: &mut dyn InstantiateHooks,
) -> (Multiset<T>, Multiset<T>) {
    let mut first = Multiset::new();
    let mut second = Multiset::new();
    for (e, n) in m.iter() {
        let k = hooks.split(n).min(n);
        first.insert(e.clone(), k);
        second.insert(e.clone(), n - k);
    }
    (first, second)
}

impl Builder<'_> {
    fn pos(&mut self, f: &PosFn) -> Result<Spatial, PatternError> {
        match f {
            PosFn::Unplaced { radius } => Ok(Spatial::unplaced(*radius)),
            PosFn::At { center, radius } => Ok(Spatial::at(*center, *radius)),
            PosFn::Keep {
                var,
                offset,
                radius,
            } => {
                let d = tau(self.inst, var)?;
                let r = radius.unwrap_or(d.radius);
                match (offset, d.center()) {
                    (None, _) => Ok(Spatial {
                        placement: d.placement,
                        radius: r,
                    }),
                    (Some(o), Some(c)) => {
                        Ok(Spatial::at([c[0] + o[0], c[1] + o[1], c[2] + o[2]], r))
                    }
                    (Some(_), None) => Err(PatternError::OffsetUnplaced(var.to_string())),
                }
            }
            PosFn::GetPos { var, radius } => {
                let d = tau(self.inst, var)?;
                self.hooks.getpos(var, &d, *radius)
            }
        }
    }

    fn term_var(&self, v: &Var) -> Result<&Term, PatternError> {
        match self.inst.sigma.get(v) {
            Some(Value::Term(t)) => Ok(t),
            Some(_) => Err(PatternError::WrongKind(v.to_string())),
            None => Err(PatternError::Unbound(v.to_string())),
        }
    }

    fn brane_var(&self, v: &Var) -> Result<&Brane, PatternError> {
        match self.inst.sigma.get(v) {
            Some(Value::Brane(b)) => Ok(b),
            Some(_) => Err(PatternError::WrongKind(v.to_string())),
            None => Err(PatternError::Unbound(v.to_string())),
        }
    }

    fn term_half(&mut self, v: &Var, h: Half) -> Result<Term, PatternError> {
        if !self.term_halves.contains_key(v) {
            let whole = self.term_var(v)?.0.clone();
            let (a, b) = split_multiset(&whole, self.hooks);
            self.term_halves.insert(v.clone(), (Term(a), Term(b)));
        }
        let (a, b) = &self.term_halves[v];
        Ok(match h {
            Half::First => a.clone(),
            Half::Second => b.clone(),
        })
    }

    fn brane_half(&mut self, v: &Var, h: Half) -> Result<Brane, PatternError> {
        if !self.brane_halves.contains_key(v) {
            let whole = self.brane_var(v)?.clone();
            let (a, b) = split_multiset(&whole, self.hooks);
            self.brane_halves.insert(v.clone(), (a, b));
        }
        let (a, b) = &self.brane_halves[v];
        Ok(match h {
            Half::First => a.clone(),
            Half::Second => b.clone(),
        })
    }

    fn brane(&mut self, b: &RightBrane) -> Result<Brane, PatternError> {
        let mut out = Multiset::new();
        for (seq, pos, n) in &b.items {
            let e = BraneElement {
                seq: seq_value(seq, self.inst)?,
                spatial: self.pos(pos)?,
            };
            out.insert(e, *n);
        }
        for r in &b.vars {
            match r {
                BraneRef::Var(v) => out.union(self.brane_var(v)?.clone()),
                BraneRef::Half(v, h) => out.union(self.brane_half(v, *h)?),
            }
        }
        Ok(out)
    }

    fn elements(
        &mut self,
        p: &RightPattern,
        out: &mut Vec<(Element, u64)>,
    ) -> Result<(), PatternError> {
        for (item, n) in &p.items {
            match item {
                RightItem::Seq { seq, pos } => {
                    let s = seq_value(seq, self.inst)?;
                    if matches!(pos, PosFn::GetPos { .. }) {
                        // each copy gets its own free position
                        for _ in 0..*n {
                            let d = self.pos(pos)?;
                            out.push((Element::Seq(s.clone(), d), 1));
                        }
                    } else {
                        let d = self.pos(pos)?;
                        out.push((Element::Seq(s, d), *n));
                    }
                }
                RightItem::Comp {
                    brane,
                    pos,
                    content,
                } => {
                    let copies = if matches!(pos, PosFn::GetPos { .. }) {
                        *n
                    } else {
                        1
                    };
                    for _ in 0..copies {
                        let spatial = self.pos(pos)?;
                        let brane = self.brane(brane)?;
                        let content = Term(self.layer(content)?);
                        let k = if copies == 1 { *n } else { 1 };
                        out.push((
                            Element::Comp(Box::new(Compartment {
                                brane,
                                spatial,
                                content,
                            })),
                            k,
                        ));
                    }
                }
                RightItem::Var(v) => {
                    let t = self.term_var(v)?;
                    for _ in 0..*n {
                        out.extend(t.0.iter().map(|(e, k)| (e.clone(), k)));
                    }
                }
                RightItem::Half(v, h) => {
                    let t = self.term_half(v, *h)?;
                    for _ in 0..*n {
                        out.extend(t.0.iter().map(|(e, k)| (e.clone(), k)));
                    }
                }
            }
        }
        Ok(())
    }

    fn layer(&mut self, p: &RightPattern) -> Result<Multiset<Element>, PatternError> {
        let mut v = Vec::new();
        self.elements(p, &mut v)?;
        Ok(v.into_iter().collect())
    }
}

/// The top-layer elements produced by `P_R τσ`, in pattern order and not yet
/// merged, so that callers can tell which object came from which item.
pub fn instantiate_elements(
    p: &RightPattern,
    inst: &Instantiation,
    hooks: &mut dyn InstantiateHooks,
) -> Result<Vec<(Element, u64)>, PatternError> {
    let mut b = Builder {
        inst,
        hooks,
        term_halves: BTreeMap::new(),
        brane_halves: BTreeMap::new(),
    };
    let mut out = Vec::new();
    b.elements(p, &mut out)?;
    Ok(out)
}

/// `P_R τσ` as a normalized term.
pub fn instantiate(
    p: &RightPattern,
    inst: &Instantiation,
    hooks: &mut dyn InstantiateHooks,
) -> Result<Term, PatternError> {
    Ok(instantiate_elements(p, inst, hooks)?.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::SeqPattern;

    #[test]
    fn keep_with_offset_and_radius() {
        let mut inst = Instantiation::default();
        inst.tau
            .insert("u".into(), Spatial::at([1.0, 2.0, 0.0], 3.0));
        let p = RightPattern {
            items: vec![(
                RightItem::Seq {
                    seq: SeqPattern::ground(&Sequence::parse_dotted("a")),
                    pos: PosFn::Keep {
                        var: "u".into(),
                        offset: Some([-1.0, 0.0, 0.0]),
                        radius: Some(0.5),
                    },
                },
                1,
            )],
        };
        let t = instantiate(&p, &inst, &mut PlainHooks).unwrap();
        let (e, _) = t.0.get(0);
        assert_eq!(*e.spatial(), Spatial::at([0.0, 2.0, 0.0], 0.5));
    }

    #[test]
    fn halves_partition_the_variable() {
        let mut inst = Instantiation::default();
        let x: Term = [(Element::molecule("a"), 5), (Element::molecule("b"), 2)]
            .into_iter()
            .collect();
        inst.sigma.insert("X".into(), Value::Term(x.clone()));
        let p = RightPattern {
            items: vec![
                (RightItem::Half("X".into(), Half::First), 1),
                (RightItem::Half("X".into(), Half::Second), 1),
            ],
        };
        assert_eq!(instantiate(&p, &inst, &mut PlainHooks).unwrap(), x);
        let p1 = RightPattern {
            items: vec![(RightItem::Half("X".into(), Half::First), 1)],
        };
        let first = instantiate(&p1, &inst, &mut PlainHooks).unwrap();
        assert_eq!(first.molecule_count(&Sequence::parse_dotted("a")), 2);
    }

    #[test]
    fn getpos_without_hook_fails() {
        let mut inst = Instantiation::default();
        inst.tau.insert("u".into(), Spatial::at([0.0; 3], 1.0));
        let p = RightPattern {
            items: vec![(
                RightItem::Seq {
                    seq: SeqPattern::ground(&Sequence::parse_dotted("a")),
                    pos: PosFn::GetPos {
                        var: "u".into(),
                        radius: 1.0,
                    },
                },
                1,
            )],
        };
        assert!(matches!(
            instantiate(&p, &inst, &mut PlainHooks),
            Err(PatternError::NoPlacement(_))
        ));
    }
}
