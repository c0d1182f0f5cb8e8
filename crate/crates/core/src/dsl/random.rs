//! Random models for round-trip tests. They need not be simulable, only
//! well-formed: every right-hand variable is bound on the left with the
//! right kind.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::model::{Conventions, Geometry, Model};
use crate::multiset::Multiset;
use crate::oracle::random::{self as base, Limits};
use crate::pattern::{
    BraneRef, Half, LeftPattern, PosFn, RightBrane, RightItem, RightPattern, SeqItem, SeqPattern,
    Var, VarKind,
};
use crate::rewrite::{Attr, CmpOp, Condition, Level, Precondition, Rate, RewriteRule};
use crate::term::{BraneElement, Compartment, Element, Sequence, Spatial, Symbol, Term};

/// Names that need quoting or sit close to the grammar's edges.
const ODD_SYMBOLS: [&str; 9] = [
    "loop", "a b", "x-y", "2cr", "q\"t", "back\\slash", "tab\there", "Cdc14'", "é",
];

fn float<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    match rng.gen_range(0..5) {
        0 => rng.gen_range(-10..10) as f64,
        1 => rng.gen_range(-1.0..1.0),
        2 => rng.gen::<f64>() * 10f64.powi(rng.gen_range(-12..12)),
        _ => rng.gen_range(0..40) as f64 / 8.0,
    }
}

fn positive<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let x = float(rng).abs();
    if x > 0.0 {
        x
    } else {
        0.5
    }
}

fn spatial<R: Rng + ?Sized>(rng: &mut R) -> Spatial {
    if rng.gen_bool(0.3) {
        Spatial::unplaced(positive(rng))
    } else {
        Spatial::at([float(rng), float(rng), float(rng)], positive(rng))
    }
}

fn odd_symbol<R: Rng + ?Sized>(rng: &mut R) -> Symbol {
    Symbol::new(ODD_SYMBOLS.choose(rng).unwrap())
}

/// Rewrites some symbols and spatial information of a base term.
fn decorate<R: Rng + ?Sized>(rng: &mut R, t: &Term) -> Term {
    let mut out = Multiset::new();
    for (e, n) in t.0.iter() {
        let e = match e {
            Element::Seq(s, d) => {
                let s = if rng.gen_bool(0.2) {
                    Sequence(vec![odd_symbol(rng)])
                } else if rng.gen_bool(0.05) {
                    Sequence::epsilon()
                } else {
                    s.clone()
                };
                let d = if rng.gen_bool(0.2) { spatial(rng) } else { *d };
                Element::Seq(s, d)
            }
            Element::Comp(c) => {
                let mut brane = Multiset::new();
                for (b, k) in c.brane.iter() {
                    let spatial = if rng.gen_bool(0.3) {
                        spatial(rng)
                    } else {
                        b.spatial
                    };
                    brane.insert(
                        BraneElement {
                            seq: b.seq.clone(),
                            spatial,
                        },
                        k,
                    );
                }
                if rng.gen_bool(0.1) {
                    brane = Multiset::new();
                }
                Element::Comp(Box::new(Compartment {
                    brane,
                    spatial: if rng.gen_bool(0.3) { spatial(rng) } else { c.spatial },
                    content: decorate(rng, &c.content),
                }))
            }
        };
        out.insert(e, n);
    }
    Term(out)
}

pub fn term<R: Rng + ?Sized>(rng: &mut R) -> Term {
    let t = base::term(rng, Limits::default());
    decorate(rng, &t)
}

fn vars_of(lhs: &LeftPattern, brane: bool) -> BTreeMap<VarKind, Vec<Var>> {
    let mut kinds = BTreeMap::new();
    let _ = lhs.collect_vars(&mut kinds, brane);
    let mut out: BTreeMap<VarKind, Vec<Var>> = BTreeMap::new();
    for (v, k) in kinds {
        out.entry(k).or_default().push(v);
    }
    out
}

struct Rhs<'a> {
    vars: &'a BTreeMap<VarKind, Vec<Var>>,
}

impl Rhs<'_> {
    fn pick<R: Rng + ?Sized>(&self, rng: &mut R, k: VarKind) -> Option<Var> {
        self.vars.get(&k).and_then(|v| v.choose(rng)).cloned()
    }

    fn seq<R: Rng + ?Sized>(&self, rng: &mut R) -> SeqPattern {
        let len = rng.gen_range(0..=3);
        SeqPattern(
            (0..len)
                .map(|_| match rng.gen_range(0..6) {
                    0 => self
                        .pick(rng, VarKind::Symbol)
                        .map_or_else(|| SeqItem::Sym(odd_symbol(rng)), SeqItem::SymVar),
                    1 => self
                        .pick(rng, VarKind::Sequence)
                        .map_or_else(|| SeqItem::Sym(Symbol::new("b")), SeqItem::SeqVar),
                    2 => SeqItem::Sym(odd_symbol(rng)),
                    _ => SeqItem::Sym(Symbol::new(["a", "b", "c"].choose(rng).unwrap())),
                })
                .collect(),
        )
    }

    fn pos<R: Rng + ?Sized>(&self, rng: &mut R) -> PosFn {
        let var = self.pick(rng, VarKind::Position);
        match (rng.gen_range(0..7), var) {
            (0, _) => PosFn::Unplaced {
                radius: positive(rng),
            },
            (1, _) => PosFn::At {
                center: [float(rng), float(rng), float(rng)],
                radius: positive(rng),
            },
            (2, Some(var)) => PosFn::Keep {
                var,
                offset: None,
                radius: None,
            },
            (3, Some(var)) => PosFn::Keep {
                var,
                offset: rng
                    .gen_bool(0.5)
                    .then(|| [float(rng), float(rng), float(rng)]),
                radius: rng.gen_bool(0.7).then(|| positive(rng)),
            },
            (4, Some(var)) => PosFn::GetPos {
                var,
                radius: positive(rng),
            },
            _ => PosFn::NONE,
        }
    }

    fn half<R: Rng + ?Sized>(rng: &mut R) -> Half {
        if rng.gen_bool(0.5) {
            Half::First
        } else {
            Half::Second
        }
    }

    fn pattern<R: Rng + ?Sized>(&self, rng: &mut R, depth: usize) -> RightPattern {
        let n = rng.gen_range(0..=4);
        let mut items = Vec::new();
        for _ in 0..n {
            let item = match rng.gen_range(0..6) {
                0 if depth > 0 => {
                    let mut b = RightBrane::default();
                    for _ in 0..rng.gen_range(0..3) {
                        b.items.push((self.seq(rng), self.pos(rng), rng.gen_range(1..3)));
                    }
                    if let Some(v) = self.pick(rng, VarKind::Brane) {
                        b.vars.push(if rng.gen_bool(0.5) {
                            BraneRef::Var(v)
                        } else {
                            BraneRef::Half(v, Self::half(rng))
                        });
                    }
                    RightItem::Comp {
                        brane: b,
                        pos: self.pos(rng),
                        content: self.pattern(rng, depth - 1),
                    }
                }
                1 => match self.pick(rng, VarKind::Term) {
                    Some(v) if rng.gen_bool(0.5) => RightItem::Var(v),
                    Some(v) => RightItem::Half(v, Self::half(rng)),
                    None => continue,
                },
                _ => RightItem::Seq {
                    seq: self.seq(rng),
                    pos: self.pos(rng),
                },
            };
            items.push((item, rng.gen_range(0..3)));
        }
        RightPattern { items }
    }

    fn brane_rhs<R: Rng + ?Sized>(&self, rng: &mut R) -> RightPattern {
        let mut items = Vec::new();
        for _ in 0..rng.gen_range(0..3) {
            items.push((
                RightItem::Seq {
                    seq: self.seq(rng),
                    pos: self.pos(rng),
                },
                rng.gen_range(1..3),
            ));
        }
        if let Some(v) = self.pick(rng, VarKind::Brane) {
            items.insert(rng.gen_range(0..=items.len()), (RightItem::Var(v), 1));
        }
        RightPattern { items }
    }
}

fn precondition<R: Rng + ?Sized>(rng: &mut R, pos: Option<&Vec<Var>>) -> Precondition {
    let Some(pos) = pos else {
        return Precondition::default();
    };
    let attrs = [Attr::X, Attr::Y, Attr::Z, Attr::Radius];
    let ops = [
        CmpOp::Eq,
        CmpOp::Ne,
        CmpOp::Lt,
        CmpOp::Le,
        CmpOp::Gt,
        CmpOp::Ge,
    ];
    Precondition(
        (0..rng.gen_range(0..3))
            .map(|_| Condition {
                var: pos.choose(rng).unwrap().clone(),
                attr: *attrs.choose(rng).unwrap(),
                op: *ops.choose(rng).unwrap(),
                value: float(rng),
            })
            .collect(),
    )
}

/// A rate and, sometimes, the expression it was written as.
fn rate<R: Rng + ?Sized>(rng: &mut R, params: &BTreeMap<String, f64>) -> (f64, Option<String>) {
    let texts = ["1/40", "slow*s", "veryfast*s", "k*2", "(k+1)/4", "fast"];
    if rng.gen_bool(0.5) {
        let t = texts.choose(rng).unwrap();
        if let Some(v) = super::parse::eval(t, params).filter(|v| *v > 0.0) {
            return (v, Some(t.to_string()));
        }
    }
    (positive(rng), None)
}

/// A random well-formed model.
pub fn model<R: Rng + ?Sized>(rng: &mut R) -> Model {
    let mut params = BTreeMap::new();
    params.insert("s".to_string(), positive(rng));
    params.insert("k".to_string(), positive(rng));
    for key in ["cell.A", "x_2", "env.GF"] {
        if rng.gen_bool(0.5) {
            params.insert(key.to_string(), float(rng));
        }
    }
    let initial = term(rng);
    let mut rules = Vec::new();
    let mut rate_text = BTreeMap::new();
    let n = rng.gen_range(0..8);
    let mut attempts = 0;
    while rules.len() < n && attempts < 100 {
        attempts += 1;
        let level = *[Level::Visual, Level::Molecular, Level::Vertical]
            .choose(rng)
            .unwrap();
        let brane = rng.gen_bool(0.15);
        let lhs = if brane {
            base::brane_pattern(rng, &initial)
        } else {
            base::pattern(rng, &initial, Limits::default())
        };
        let vars = vars_of(&lhs, brane);
        let gen = Rhs { vars: &vars };
        let rhs = if brane {
            gen.brane_rhs(rng)
        } else {
            gen.pattern(rng, 2)
        };
        let (r, text) = match level {
            Level::Vertical => (Rate::Infinite, None),
            _ => {
                let (k, t) = rate(rng, &params);
                (Rate::Finite(k), t)
            }
        };
        let pre = precondition(rng, vars.get(&VarKind::Position));
        let id = format!("{}{}", ["R", "S", "T"][rules.len() % 3], rules.len());
        if let Ok(rule) = RewriteRule::new(id.clone(), level, brane, pre, lhs, rhs, r) {
            if let Some(t) = text {
                rate_text.insert(id, t);
            }
            rules.push(rule);
        }
    }
    Model {
        name: ["m", "toy_2", "with space", "loop"].choose(rng).unwrap().to_string(),
        params,
        geometry: Geometry {
            dim: rng.gen_range(2..=3),
            sphere_radius: positive(rng),
            cube_size: positive(rng),
            max_object_radius: positive(rng),
        },
        conventions: Conventions::default(),
        initial,
        rules,
        rate_text,
        seed: rng.gen(),
    }
}
