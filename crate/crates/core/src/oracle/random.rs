//! Random small terms and patterns for oracle comparisons.
//!
//! Terms have at most `max_layer` element copies per layer and at most
//! `max_depth` layers. Patterns are mostly carved out of the term they will
//! be matched against (so that matches exist), with symbols, positions and
//! layer remainders generalised into variables at random.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::multiset::Multiset;
use crate::pattern::{LeftItem, LeftPattern, SeqItem, SeqPattern, Var};
use crate::term::{BraneElement, Compartment, Element, Sequence, Spatial, Symbol, Term};

const SYMBOLS: [&str; 3] = ["a", "b", "c"];
const MEMBRANES: [&str; 2] = ["m", "n"];

#[derive(Clone, Copy, Debug)]
pub struct Limits {
    pub max_layer: usize,
    pub max_depth: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_layer: 6,
            max_depth: 3,
        }
    }
}

fn spatial<R: Rng + ?Sized>(rng: &mut R) -> Spatial {
    match rng.gen_range(0..6) {
        0 => Spatial::at([0.0, 0.0, 0.0], 1.0),
        1 => Spatial::at([2.0, 0.0, 0.0], 1.0),
        _ => Spatial::UNPLACED,
    }
}

fn sequence<R: Rng + ?Sized>(rng: &mut R) -> Sequence {
    let len = rng.gen_range(1..=3);
    Sequence(
        (0..len)
            .map(|_| Symbol::new(SYMBOLS.choose(rng).unwrap()))
            .collect(),
    )
}

fn brane<R: Rng + ?Sized>(rng: &mut R) -> Multiset<BraneElement> {
    let mut b = Multiset::new();
    b.insert(
        BraneElement::unplaced(Sequence::parse_dotted(MEMBRANES.choose(rng).unwrap())),
        1,
    );
    for _ in 0..rng.gen_range(0..3) {
        let seq = if rng.gen_bool(0.5) {
            Sequence::parse_dotted(SYMBOLS.choose(rng).unwrap())
        } else {
            sequence(rng)
        };
        b.insert(BraneElement::unplaced(seq), 1);
    }
    b
}

/// A random term within `limits`.
pub fn term<R: Rng + ?Sized>(rng: &mut R, limits: Limits) -> Term {
    layer(rng, limits.max_layer, limits.max_depth)
}

fn layer<R: Rng + ?Sized>(rng: &mut R, max_layer: usize, depth: usize) -> Term {
    let mut out = Multiset::new();
    let n = rng.gen_range(0..=max_layer);
    let mut pool: Vec<Element> = Vec::new();
    for _ in 0..n {
        // reuse earlier elements often so that layers hold identical copies
        if !pool.is_empty() && rng.gen_bool(0.4) {
            let e = pool.choose(rng).unwrap().clone();
            out.insert(e, 1);
            continue;
        }
        let e = if depth > 1 && rng.gen_bool(0.45) {
            Element::Comp(Box::new(Compartment {
                brane: brane(rng),
                spatial: spatial(rng),
                content: layer(rng, max_layer, depth - 1),
            }))
        } else if rng.gen_bool(0.6) {
            Element::Seq(
                Sequence::parse_dotted(SYMBOLS.choose(rng).unwrap()),
                Spatial::UNPLACED,
            )
        } else {
            Element::Seq(sequence(rng), spatial(rng))
        };
        pool.push(e.clone());
        out.insert(e, 1);
    }
    Term(out)
}

struct Vars {
    sym: [&'static str; 2],
    seq: [&'static str; 2],
    pos: [&'static str; 2],
    term: [&'static str; 2],
    brane: [&'static str; 2],
}

const VARS: Vars = Vars {
    sym: ["x", "y"],
    seq: ["s", "w"],
    pos: ["u", "v"],
    term: ["X", "Y"],
    brane: ["B", "C"],
};

fn var<R: Rng + ?Sized>(rng: &mut R, pool: &[&'static str; 2]) -> Var {
    Var::from(*pool.choose(rng).unwrap())
}

fn generalize_seq<R: Rng + ?Sized>(rng: &mut R, s: &Sequence) -> SeqPattern {
    let mut items = Vec::new();
    let mut i = 0;
    while i < s.0.len() {
        match rng.gen_range(0..10) {
            0 | 1 => {
                items.push(SeqItem::SymVar(var(rng, &VARS.sym)));
                i += 1;
            }
            2 => {
                // a sequence variable swallowing 0..=2 symbols
                let take = rng.gen_range(0..=2).min(s.0.len() - i);
                items.push(SeqItem::SeqVar(var(rng, &VARS.seq)));
                i += take;
            }
            _ => {
                items.push(SeqItem::Sym(s.0[i].clone()));
                i += 1;
            }
        }
    }
    if rng.gen_bool(0.1) {
        items.push(SeqItem::SeqVar(var(rng, &VARS.seq)));
    }
    SeqPattern(items)
}

fn pos_binder<R: Rng + ?Sized>(rng: &mut R, d: &Spatial) -> Option<Var> {
    if *d == Spatial::UNPLACED && rng.gen_bool(0.8) {
        None
    } else {
        Some(var(rng, &VARS.pos))
    }
}

fn item_from<R: Rng + ?Sized>(rng: &mut R, e: &Element, depth: usize) -> LeftItem {
    match e {
        Element::Seq(s, d) => LeftItem::Seq {
            seq: generalize_seq(rng, s),
            pos: pos_binder(rng, d),
        },
        Element::Comp(c) => {
            let mut bitems = Vec::new();
            let mut whole = true;
            for (b, n) in c.brane.iter() {
                let k = rng.gen_range(0..=n);
                whole &= k == n;
                if k > 0 {
                    bitems.push((
                        LeftItem::Seq {
                            seq: generalize_seq(rng, &b.seq),
                            pos: pos_binder(rng, &b.spatial),
                        },
                        k,
                    ));
                }
            }
            let brest = (!whole || rng.gen_bool(0.3)).then(|| var(rng, &VARS.brane));
            LeftItem::Comp {
                brane: LeftPattern::new(bitems, brest),
                pos: pos_binder(rng, &c.spatial),
                content: layer_pattern(rng, &c.content, depth.saturating_sub(1), true),
            }
        }
    }
}

fn layer_pattern<R: Rng + ?Sized>(
    rng: &mut R,
    t: &Term,
    depth: usize,
    inside: bool,
) -> LeftPattern {
    let mut items = Vec::new();
    let mut whole = true;
    for (e, n) in t.0.iter() {
        let k = if rng.gen_bool(0.5) {
            rng.gen_range(0..=n.min(2))
        } else {
            0
        };
        whole &= k == n;
        if k == 0 {
            continue;
        }
        if matches!(e, Element::Comp(_)) && depth == 0 {
            whole = false;
            continue;
        }
        items.push((item_from(rng, e, depth), k));
    }
    // inside compartments, an absent rest variable means the content is exact
    let rest = if inside {
        (!whole || rng.gen_bool(0.3)).then(|| var(rng, &VARS.term))
    } else {
        rng.gen_bool(0.2).then(|| var(rng, &VARS.term))
    };
    if items.is_empty() && rest.is_none() && !inside {
        let extra = LeftItem::Seq {
            seq: SeqPattern(vec![SeqItem::SymVar(var(rng, &VARS.sym))]),
            pos: None,
        };
        return LeftPattern::new([(extra, 1)], None);
    }
    LeftPattern::new(items, rest)
}

/// A random left pattern, usually carved out of `t` or one of its
/// compartments so that it has matches.
pub fn pattern<R: Rng + ?Sized>(rng: &mut R, t: &Term, limits: Limits) -> LeftPattern {
    let mut source = t.clone();
    // descend into a random compartment now and then
    while rng.gen_bool(0.3) {
        let comps: Vec<Term> = source
            .0
            .iter()
            .filter_map(|(e, _)| e.as_compartment().map(|c| c.content.clone()))
            .collect();
        match comps.choose(rng) {
            Some(c) => source = c.clone(),
            None => break,
        }
    }
    if rng.gen_bool(0.15) {
        source = term(
            rng,
            Limits {
                max_layer: 3,
                max_depth: 2,
            },
        );
    }
    layer_pattern(rng, &source, limits.max_depth.saturating_sub(1), false)
}

fn collect_branes(t: &Term, out: &mut Vec<Multiset<BraneElement>>) {
    for (e, _) in t.0.iter() {
        if let Element::Comp(c) = e {
            out.push(c.brane.clone());
            collect_branes(&c.content, out);
        }
    }
}

/// A random pattern for brane sites, carved out of one of the membranes
/// in `t`.
pub fn brane_pattern<R: Rng + ?Sized>(rng: &mut R, t: &Term) -> LeftPattern {
    let mut branes = Vec::new();
    collect_branes(t, &mut branes);
    let b = branes.choose(rng).cloned().unwrap_or_else(|| brane(rng));
    let mut items = Vec::new();
    for (e, n) in b.iter() {
        let k = rng.gen_range(0..=n);
        if k > 0 {
            items.push((
                LeftItem::Seq {
                    seq: generalize_seq(rng, &e.seq),
                    pos: pos_binder(rng, &e.spatial),
                },
                k,
            ));
        }
    }
    if items.is_empty() {
        items.push((
            LeftItem::Seq {
                seq: SeqPattern(vec![SeqItem::SymVar(var(rng, &VARS.sym))]),
                pos: None,
            },
            1,
        ));
    }
    let rest = rng.gen_bool(0.3).then(|| var(rng, &VARS.brane));
    LeftPattern::new(items, rest)
}
