//! Brute-force reference counts for reactant combinations.
//!
//! Every copy of every element gets its own identity, every copy of every
//! pattern item is assigned to a distinct element copy, and the distinct
//! sets of chosen copies (recursively through compartments) are counted per
//! site. Instantiations only decide whether a choice is valid; two
//! instantiations picking the same copies are one reactant combination.
//! This is exponential and only meant for small terms; it shares no
//! matching code with [`crate::pattern`].

pub mod random;

use std::collections::{BTreeMap, BTreeSet};

use crate::multiset::Multiset;
use crate::pattern::{LeftItem, LeftPattern, SeqItem, SeqPattern, Var};
use crate::rewrite::{Precondition, RewriteRule};
use crate::term::{BraneElement, Element, Spatial, Symbol, Term};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
enum OValue {
    Sym(Symbol),
    Seq(Vec<Symbol>),
    Pos(Spatial),
    Term(Multiset<Element>),
    Brane(Multiset<BraneElement>),
}

type Sigma = BTreeMap<Var, OValue>;

/// Identity of the chosen copies, recursively through compartments.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Key(Vec<(usize, Key, Key)>);

#[derive(Debug)]
struct Inst<'a> {
    elem: &'a Element,
    brane: Vec<BraneInst<'a>>,
    content: Vec<Inst<'a>>,
}

#[derive(Debug)]
struct BraneInst<'a> {
    elem: &'a BraneElement,
}

fn expand(t: &Term) -> Vec<Inst<'_>> {
    let mut out = Vec::new();
    for (e, n) in t.0.iter() {
        for _ in 0..n {
            let (brane, content) = match e {
                Element::Comp(c) => (
                    c.brane
                        .iter()
                        .flat_map(|(b, n)| (0..n).map(move |_| BraneInst { elem: b }))
                        .collect(),
                    expand(&c.content),
                ),
                Element::Seq(..) => (Vec::new(), Vec::new()),
            };
            out.push(Inst {
                elem: e,
                brane,
                content,
            });
        }
    }
    out
}

fn bind(sigma: &Sigma, var: &Var, v: OValue) -> Option<Sigma> {
    match sigma.get(var) {
        Some(old) if *old == v => Some(sigma.clone()),
        Some(_) => None,
        None => {
            let mut s = sigma.clone();
            s.insert(var.clone(), v);
            Some(s)
        }
    }
}

/// Generate-and-test sequence matching: try every symbol / contiguous
/// slice of `target` for each unbound variable, then compare.
fn seq_matches(p: &SeqPattern, target: &[Symbol], sigma: &Sigma) -> Vec<Sigma> {
    let mut vars: Vec<(Var, bool)> = Vec::new();
    for i in &p.0 {
        match i {
            SeqItem::SymVar(v) if !sigma.contains_key(v) && !vars.iter().any(|(w, _)| w == v) => {
                vars.push((v.clone(), false))
            }
            SeqItem::SeqVar(v) if !sigma.contains_key(v) && !vars.iter().any(|(w, _)| w == v) => {
                vars.push((v.clone(), true))
            }
            _ => {}
        }
    }
    let mut slices: Vec<Vec<Symbol>> = Vec::new();
    for i in 0..=target.len() {
        for j in i..=target.len() {
            slices.push(target[i..j].to_vec());
        }
    }
    slices.sort();
    slices.dedup();
    let mut out = Vec::new();
    let mut stack = vec![(0usize, sigma.clone())];
    while let Some((k, s)) = stack.pop() {
        if k == vars.len() {
            let mut built = Vec::new();
            let mut ok = true;
            for i in &p.0 {
                match i {
                    SeqItem::Sym(x) => built.push(x.clone()),
                    SeqItem::SymVar(v) => match s.get(v) {
                        Some(OValue::Sym(x)) => built.push(x.clone()),
                        _ => ok = false,
                    },
                    SeqItem::SeqVar(v) => match s.get(v) {
                        Some(OValue::Seq(x)) => built.extend(x.iter().cloned()),
                        _ => ok = false,
                    },
                }
            }
            if ok && built == target {
                out.push(s);
            }
            continue;
        }
        let (v, is_seq) = &vars[k];
        for sl in &slices {
            if !is_seq && sl.len() != 1 {
                continue;
            }
            let val = if *is_seq {
                OValue::Seq(sl.clone())
            } else {
                OValue::Sym(sl[0].clone())
            };
            let mut s2 = s.clone();
            s2.insert(v.clone(), val);
            stack.push((k + 1, s2));
        }
    }
    out
}

fn pos_ok(pos: &Option<Var>, d: &Spatial, sigma: &Sigma) -> Option<Sigma> {
    match pos {
        None => (*d == Spatial::UNPLACED).then(|| sigma.clone()),
        Some(v) => bind(sigma, v, OValue::Pos(*d)),
    }
}

fn item_matches(item: &LeftItem, inst: &Inst<'_>, sigma: &Sigma) -> Vec<(Key, Key, Sigma)> {
    match (item, inst.elem) {
        (LeftItem::Seq { seq, pos }, Element::Seq(s, d)) => {
            let Some(s0) = pos_ok(pos, d, sigma) else {
                return Vec::new();
            };
            seq_matches(seq, &s.0, &s0)
                .into_iter()
                .map(|s| (Key(Vec::new()), Key(Vec::new()), s))
                .collect()
        }
        (
            LeftItem::Comp {
                brane,
                pos,
                content,
            },
            Element::Comp(c),
        ) => {
            let Some(s0) = pos_ok(pos, &c.spatial, sigma) else {
                return Vec::new();
            };
            let mut out = Vec::new();
            for (bk, s1) in brane_layer(brane, &inst.brane, &s0) {
                for (ck, s2) in term_layer(content, &inst.content, true, &s1) {
                    out.push((bk.clone(), ck, s2));
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

fn expand_items(p: &LeftPattern) -> Vec<&LeftItem> {
    p.items
        .iter()
        .flat_map(|(i, n)| (0..*n).map(move |_| i))
        .collect()
}

fn term_layer(
    p: &LeftPattern,
    insts: &[Inst<'_>],
    exact: bool,
    sigma: &Sigma,
) -> Vec<(Key, Sigma)> {
    let copies = expand_items(p);
    let mut found = BTreeSet::new();
    let mut used = vec![false; insts.len()];
    assign(
        &copies,
        0,
        insts,
        &mut used,
        &mut Vec::new(),
        sigma,
        &mut |chosen, s| {
            let rest: Multiset<Element> = insts
                .iter()
                .enumerate()
                .filter(|(i, _)| !chosen.iter().any(|(c, _, _)| c == i))
                .map(|(_, inst)| inst.elem.clone())
                .collect();
            let s = match &p.rest {
                Some(v) => match bind(s, v, OValue::Term(rest)) {
                    Some(s) => s,
                    None => return,
                },
                None if exact && !rest.is_empty() => return,
                None => s.clone(),
            };
            let mut key = chosen.to_vec();
            key.sort();
            found.insert((Key(key), s));
        },
    );
    found.into_iter().collect()
}

fn assign(
    copies: &[&LeftItem],
    k: usize,
    insts: &[Inst<'_>],
    used: &mut Vec<bool>,
    chosen: &mut Vec<(usize, Key, Key)>,
    sigma: &Sigma,
    done: &mut dyn FnMut(&[(usize, Key, Key)], &Sigma),
) {
    if k == copies.len() {
        done(chosen, sigma);
        return;
    }
    for i in 0..insts.len() {
        if used[i] {
            continue;
        }
        for (bk, ck, s) in item_matches(copies[k], &insts[i], sigma) {
            used[i] = true;
            chosen.push((i, bk, ck));
            assign(copies, k + 1, insts, used, chosen, &s, done);
            chosen.pop();
            used[i] = false;
        }
    }
}

fn brane_layer(p: &LeftPattern, insts: &[BraneInst<'_>], sigma: &Sigma) -> Vec<(Key, Sigma)> {
    let copies = expand_items(p);
    let mut found = BTreeSet::new();
    let mut used = vec![false; insts.len()];
    brane_assign(
        &copies,
        0,
        insts,
        &mut used,
        &mut Vec::new(),
        sigma,
        &mut |chosen, s| {
            let rest: Multiset<BraneElement> = insts
                .iter()
                .enumerate()
                .filter(|(i, _)| !chosen.contains(i))
                .map(|(_, b)| b.elem.clone())
                .collect();
            let s = match &p.rest {
                Some(v) => match bind(s, v, OValue::Brane(rest)) {
                    Some(s) => s,
                    None => return,
                },
                None if !rest.is_empty() => return,
                None => s.clone(),
            };
            let mut key: Vec<usize> = chosen.to_vec();
            key.sort();
            found.insert((
                Key(key
                    .into_iter()
                    .map(|i| (i, Key(Vec::new()), Key(Vec::new())))
                    .collect()),
                s,
            ));
        },
    );
    found.into_iter().collect()
}

fn brane_assign(
    copies: &[&LeftItem],
    k: usize,
    insts: &[BraneInst<'_>],
    used: &mut Vec<bool>,
    chosen: &mut Vec<usize>,
    sigma: &Sigma,
    done: &mut dyn FnMut(&[usize], &Sigma),
) {
    if k == copies.len() {
        done(chosen, sigma);
        return;
    }
    let LeftItem::Seq { seq, pos } = copies[k] else {
        return;
    };
    for i in 0..insts.len() {
        if used[i] {
            continue;
        }
        let b = insts[i].elem;
        let Some(s0) = pos_ok(pos, &b.spatial, sigma) else {
            continue;
        };
        for s in seq_matches(seq, &b.seq.0, &s0) {
            used[i] = true;
            chosen.push(i);
            brane_assign(copies, k + 1, insts, used, chosen, &s, done);
            chosen.pop();
            used[i] = false;
        }
    }
}

fn precondition_ok(pre: &Precondition, s: &Sigma) -> bool {
    pre.0.iter().all(|c| match s.get(&c.var) {
        Some(OValue::Pos(d)) => c.holds(d),
        _ => false,
    })
}

fn distinct_choices(found: Vec<(Key, Sigma)>, pre: &Precondition) -> u128 {
    found
        .into_iter()
        .filter(|(_, s)| precondition_ok(pre, s))
        .map(|(k, _)| k)
        .collect::<BTreeSet<Key>>()
        .len() as u128
}

fn count_sites(p: &LeftPattern, pre: &Precondition, insts: &[Inst<'_>], brane_sites: bool) -> u128 {
    let mut total: u128 = 0;
    if !brane_sites {
        total += distinct_choices(term_layer(p, insts, false, &Sigma::new()), pre);
    }
    for inst in insts {
        if brane_sites && matches!(inst.elem, Element::Comp(_)) {
            // a brane site: the membrane as a layer of sequences, with context
            let as_terms: Vec<Element> = inst
                .brane
                .iter()
                .map(|b| Element::Seq(b.elem.seq.clone(), b.elem.spatial))
                .collect();
            let layer: Vec<Inst<'_>> = as_terms
                .iter()
                .map(|e| Inst {
                    elem: e,
                    brane: Vec::new(),
                    content: Vec::new(),
                })
                .collect();
            total += distinct_choices(term_layer(p, &layer, false, &Sigma::new()), pre);
        }
        if matches!(inst.elem, Element::Comp(_)) {
            total += count_sites(p, pre, &inst.content, brane_sites);
        }
    }
    total
}

/// Brute-force `m_T^(R)` for a content pattern anywhere in `t`.
pub fn brute_force_combinations(p: &LeftPattern, t: &Term) -> u128 {
    count_sites(p, &Precondition::default(), &expand(t), false)
}

/// Brute-force `m_T^(R)` for a rule, honouring its precondition and
/// whether it rewrites membranes.
pub fn brute_force_rule(rule: &RewriteRule, t: &Term) -> u128 {
    count_sites(&rule.lhs, &rule.precondition, &expand(t), rule.brane)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::match_pattern;
    use crate::term::{Compartment, Sequence};

    fn mols(items: &[(&str, u64)]) -> Term {
        items
            .iter()
            .map(|(s, n)| (Element::molecule(s), *n))
            .collect()
    }

    #[test]
    fn single_and_pairs() {
        assert_eq!(
            brute_force_combinations(&LeftPattern::molecules(&["a"]), &mols(&[("a", 3)])),
            3
        );
        assert_eq!(
            brute_force_combinations(
                &LeftPattern::molecules(&["Sic1", "Clb5"]),
                &mols(&[("Sic1", 2), ("Clb5", 2)])
            ),
            4
        );
        assert_eq!(
            brute_force_combinations(&LeftPattern::molecules(&["a", "a"]), &mols(&[("a", 4)])),
            6
        );
    }

    #[test]
    fn rest_variable_choice() {
        // a | X on a|a: which copy is the explicit reactant
        let p = LeftPattern::new(
            [(
                LeftItem::Seq {
                    seq: SeqPattern::ground(&Sequence::parse_dotted("a")),
                    pos: None,
                },
                1,
            )],
            Some("X".into()),
        );
        let t = Term::element(Element::Comp(Box::new(Compartment {
            brane: [BraneElement::unplaced(Sequence::parse_dotted("m"))]
                .into_iter()
                .collect(),
            spatial: Spatial::UNPLACED,
            content: mols(&[("a", 2)]),
        })));
        let comp = LeftPattern::new(
            [(
                LeftItem::Comp {
                    brane: LeftPattern::molecules(&["m"]),
                    pos: None,
                    content: p,
                },
                1,
            )],
            None,
        );
        assert_eq!(brute_force_combinations(&comp, &t), 2);
        let fast: u128 = match_pattern(&comp, &t)
            .iter()
            .map(|m| m.multiplicity)
            .sum();
        assert_eq!(fast, 2);
    }

    fn comp(content: Term) -> Element {
        Element::Comp(Box::new(Compartment {
            brane: [BraneElement::unplaced(Sequence::parse_dotted("m"))]
                .into_iter()
                .collect(),
            spatial: Spatial::UNPLACED,
            content,
        }))
    }

    fn comp_item(content: LeftPattern) -> LeftItem {
        LeftItem::Comp {
            brane: LeftPattern::molecules(&["m"]),
            pos: None,
            content,
        }
    }

    fn with_rest(names: &[&str], rest: &str) -> LeftPattern {
        LeftPattern {
            rest: Some(rest.into()),
            ..LeftPattern::molecules(names)
        }
    }

    #[test]
    fn swapped_instantiations_are_one_combination() {
        // ~x and ~y can be bound either way round; same copies either way
        let seq = |v: &str| LeftItem::Seq {
            seq: SeqPattern(vec![SeqItem::Sym("cr".into()), SeqItem::SeqVar(v.into())]),
            pos: None,
        };
        let p = LeftPattern::new(
            [(
                comp_item(LeftPattern::new([(seq("x"), 1), (seq("y"), 1)], None)),
                1,
            )],
            None,
        );
        let t = Term::element(comp(mols(&[("cr.g1", 1), ("cr.g2", 1)])));
        assert_eq!(brute_force_combinations(&p, &t), 1);
        let fast: u128 = match_pattern(&p, &t).iter().map(|m| m.multiplicity).sum();
        assert_eq!(fast, 1);
    }

    #[test]
    fn distinct_items_on_identical_compartments() {
        let p = LeftPattern::new(
            [
                (comp_item(with_rest(&["a"], "X")), 1),
                (comp_item(with_rest(&["b"], "Y")), 1),
            ],
            None,
        );
        let t: Term = [(comp(mols(&[("a", 1), ("b", 1)])), 3)]
            .into_iter()
            .collect();
        // an ordered pair of distinct compartments: 3 * 2
        assert_eq!(brute_force_combinations(&p, &t), 6);
        let found = match_pattern(&p, &t);
        let fast: u128 = found.iter().map(|m| m.multiplicity).sum();
        assert_eq!(fast, 6);
        let rule = RewriteRule::new(
            "r",
            crate::rewrite::Level::Molecular,
            false,
            Precondition::default(),
            p,
            Default::default(),
            crate::rewrite::Rate::Finite(1.0),
        )
        .unwrap();
        let by_def: num_rational::Ratio<u128> = found
            .iter()
            .map(|m| crate::rewrite::multiplicity_by_definition(&rule, &t, m).unwrap())
            .sum();
        assert_eq!(by_def, num_rational::Ratio::from_integer(6));
    }
}
