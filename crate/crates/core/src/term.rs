//! Spatial CLS terms, branes and sequences.
//!
//! A [`Term`] is a layer: a multiset of [`Element`]s, each either a
//! (possibly positional) sequence or a looping-containment compartment.
//! Parallel composition is multiset union and λ is the empty multiset, so
//! every `Term` value is already in canonical flattened form. The grammar's
//! tree shape is kept separately as [`TermTree`] and canonicalised by
//! [`normalize`].

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use crate::multiset::Multiset;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Symbol(Arc<str>);

impl Symbol {
    pub fn new(name: &str) -> Self {
        assert!(!name.is_empty(), "symbol names are non-empty");
        Symbol(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Symbol {
    fn from(s: &str) -> Self {
        Symbol::new(s)
    }
}

/// An ordered sequence of symbols; the empty sequence is ε.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sequence(pub Vec<Symbol>);

impl Sequence {
    pub fn epsilon() -> Self {
        Sequence(Vec::new())
    }

    /// Parses `a.b.c`; `eps` (or an empty string) is ε.
    pub fn parse_dotted(text: &str) -> Self {
        if text.is_empty() || text == "eps" {
            return Self::epsilon();
        }
        Sequence(text.split('.').map(Symbol::new).collect())
    }

    pub fn symbols(&self) -> &[Symbol] {
        &self.0
    }

    pub fn is_epsilon(&self) -> bool {
        self.0.is_empty()
    }

    pub fn concat(&self, other: &Sequence) -> Sequence {
        let mut v = self.0.clone();
        v.extend(other.0.iter().cloned());
        Sequence(v)
    }
}

impl fmt::Debug for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Sequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("eps");
        }
        for (i, s) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            f.write_str(s.as_str())?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
pub enum Placement {
    /// The `.` case: no quantitative position.
    Unplaced,
    At([f64; 3]),
}

/// Spatial information `d`: placement plus radius. Unplaced objects carry
/// radius 0 by convention and are never checked for collisions.
#[derive(Clone, Copy, Debug)]
pub struct Spatial {
    pub placement: Placement,
    pub radius: f64,
}

fn canon(x: f64) -> f64 {
    // folds -0.0 onto 0.0 so that equality and ordering agree
    x + 0.0
}

impl Spatial {
    pub const UNPLACED: Spatial = Spatial {
        placement: Placement::Unplaced,
        radius: 0.0,
    };

    pub fn at(center: [f64; 3], radius: f64) -> Self {
        Spatial {
            placement: Placement::At(center.map(canon)),
            radius: canon(radius),
        }
    }

    pub fn unplaced(radius: f64) -> Self {
        Spatial {
            placement: Placement::Unplaced,
            radius: canon(radius),
        }
    }

    pub fn center(&self) -> Option<[f64; 3]> {
        match self.placement {
            Placement::At(c) => Some(c),
            Placement::Unplaced => None,
        }
    }

    pub fn is_positional(&self) -> bool {
        matches!(self.placement, Placement::At(_))
    }

    fn key(&self) -> (u8, [u64; 3], u64) {
        let bits = |x: f64| {
            // total order on floats, as an unsigned key
            let b = canon(x).to_bits();
            if b >> 63 == 1 {
                !b
            } else {
                b | (1 << 63)
            }
        };
        match self.placement {
            Placement::Unplaced => (0, [0; 3], bits(self.radius)),
            Placement::At(c) => (1, c.map(bits), bits(self.radius)),
        }
    }
}

impl PartialEq for Spatial {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Spatial {}

impl Hash for Spatial {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.key().hash(state);
    }
}

impl PartialOrd for Spatial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Spatial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

impl Default for Spatial {
    fn default() -> Self {
        Spatial::UNPLACED
    }
}

/// One element of a brane: `(S)_d`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BraneElement {
    pub seq: Sequence,
    pub spatial: Spatial,
}

impl BraneElement {
    pub fn unplaced(seq: Sequence) -> Self {
        BraneElement {
            seq,
            spatial: Spatial::UNPLACED,
        }
    }
}

/// A flat multiset of sequences forming a membrane.
pub type Brane = Multiset<BraneElement>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Compartment {
    pub brane: Brane,
    pub spatial: Spatial,
    pub content: Term,
}

impl Compartment {
    /// True iff a brane element consists of exactly `symbol`.
    pub fn has_membrane_symbol(&self, symbol: &Symbol) -> bool {
        self.brane
            .iter()
            .any(|(e, _)| e.seq.0.len() == 1 && &e.seq.0[0] == symbol)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Element {
    Seq(Sequence, Spatial),
    Comp(Box<Compartment>),
}

impl Element {
    pub fn molecule(name: &str) -> Self {
        Element::Seq(Sequence::parse_dotted(name), Spatial::UNPLACED)
    }

    pub fn spatial(&self) -> &Spatial {
        match self {
            Element::Seq(_, d) => d,
            Element::Comp(c) => &c.spatial,
        }
    }

    pub fn spatial_mut(&mut self) -> &mut Spatial {
        match self {
            Element::Seq(_, d) => d,
            Element::Comp(c) => &mut c.spatial,
        }
    }

    pub fn as_compartment(&self) -> Option<&Compartment> {
        match self {
            Element::Comp(c) => Some(c),
            Element::Seq(..) => None,
        }
    }

    pub fn as_sequence(&self) -> Option<&Sequence> {
        match self {
            Element::Seq(s, _) => Some(s),
            Element::Comp(_) => None,
        }
    }
}

/// A normalized term: the multiset of top-layer elements.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term(pub Multiset<Element>);

impl Term {
    /// λ
    pub fn empty() -> Self {
        Term(Multiset::new())
    }

    pub fn element(e: Element) -> Self {
        Term(Multiset::singleton(e))
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn layer(&self) -> &Multiset<Element> {
        &self.0
    }

    pub fn layer_mut(&mut self) -> &mut Multiset<Element> {
        &mut self.0
    }

    /// `self | other`
    pub fn par(mut self, other: Term) -> Term {
        self.0.union(other.0);
        self
    }

    /// Number of copies of the unplaced molecule `seq` at top layer.
    pub fn molecule_count(&self, seq: &Sequence) -> u64 {
        self.0.count(&Element::Seq(seq.clone(), Spatial::UNPLACED))
    }
}

impl FromIterator<(Element, u64)> for Term {
    fn from_iter<I: IntoIterator<Item = (Element, u64)>>(iter: I) -> Self {
        Term(iter.into_iter().collect())
    }
}

impl FromIterator<Element> for Term {
    fn from_iter<I: IntoIterator<Item = Element>>(iter: I) -> Self {
        Term(iter.into_iter().collect())
    }
}

/// Terms as produced by the grammar, before flattening.
#[derive(Clone, Debug, PartialEq)]
pub enum TermTree {
    Empty,
    Seq(Sequence, Spatial),
    Comp {
        brane: Vec<BraneTree>,
        spatial: Spatial,
        content: Box<TermTree>,
    },
    Par(Vec<TermTree>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum BraneTree {
    Empty,
    Seq(Sequence, Spatial),
    Par(Vec<BraneTree>),
}

/// Flattens parallel composition, drops λ, and merges equal components at
/// every layer.
pub fn normalize(t: &TermTree) -> Term {
    let mut out = Multiset::new();
    collect_term(t, &mut out);
    Term(out)
}

fn collect_term(t: &TermTree, out: &mut Multiset<Element>) {
    match t {
        TermTree::Empty => {}
        TermTree::Seq(s, d) => out.insert(Element::Seq(s.clone(), *d), 1),
        TermTree::Comp {
            brane,
            spatial,
            content,
        } => {
            let mut b = Multiset::new();
            for bt in brane {
                collect_brane(bt, &mut b);
            }
            out.insert(
                Element::Comp(Box::new(Compartment {
                    brane: b,
                    spatial: *spatial,
                    content: normalize(content),
                })),
                1,
            );
        }
        TermTree::Par(children) => {
            for c in children {
                collect_term(c, out);
            }
        }
    }
}

fn collect_brane(b: &BraneTree, out: &mut Brane) {
    match b {
        BraneTree::Empty => {}
        BraneTree::Seq(s, d) => out.insert(
            BraneElement {
                seq: s.clone(),
                spatial: *d,
            },
            1,
        ),
        BraneTree::Par(children) => {
            for c in children {
                collect_brane(c, out);
            }
        }
    }
}

impl Term {
    /// Back to the grammar's tree shape (one child per copy).
    pub fn to_tree(&self) -> TermTree {
        let mut children = Vec::new();
        for (e, n) in self.0.iter() {
            for _ in 0..n {
                children.push(match e {
                    Element::Seq(s, d) => TermTree::Seq(s.clone(), *d),
                    Element::Comp(c) => TermTree::Comp {
                        brane: c
                            .brane
                            .iter()
                            .flat_map(|(b, n)| {
                                std::iter::repeat(BraneTree::Seq(b.seq.clone(), b.spatial))
                                    .take(n as usize)
                            })
                            .collect(),
                        spatial: c.spatial,
                        content: Box::new(c.content.to_tree()),
                    },
                });
            }
        }
        match children.len() {
            0 => TermTree::Empty,
            1 => children.pop().unwrap(),
            _ => TermTree::Par(children),
        }
    }
}

/// 𝐧(t1, t2): how many times `t1` appears at the top layer of `t2`.
///
/// For a single-element `t1` this is the element's multiplicity in `t2`;
/// for a larger `t1` it is the number of disjoint copies of `t1` that fit in
/// `t2`. λ appears zero times.
pub fn count_top(t1: &Term, t2: &Term) -> u64 {
    if t1.is_empty() {
        return 0;
    }
    t1.0.iter()
        .map(|(e, n)| t2.0.count(e) / n)
        .min()
        .unwrap_or(0)
}

/// T̄: the multiset of top-layer elements.
pub fn top_multiset(t: &Term) -> &Multiset<Element> {
    &t.0
}

pub(crate) fn fmt_num(x: f64) -> String {
    format!("{}", x + 0.0)
}

impl fmt::Display for Spatial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.placement {
            Placement::Unplaced => write!(f, "@(.; {})", fmt_num(self.radius)),
            Placement::At([x, y, z]) => write!(
                f,
                "@({},{},{}; {})",
                fmt_num(x),
                fmt_num(y),
                fmt_num(z),
                fmt_num(self.radius)
            ),
        }
    }
}

fn fmt_count(f: &mut fmt::Formatter<'_>, n: u64) -> fmt::Result {
    if n > 1 {
        write!(f, "^{n}")?;
    }
    Ok(())
}

impl fmt::Display for Compartment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("loop(")?;
        if self.brane.is_empty() {
            f.write_str("empty")?;
        }
        for (i, (b, n)) in self.brane.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{}", b.seq)?;
            fmt_count(f, n)?;
        }
        if self.spatial != Spatial::UNPLACED {
            write!(f, " {}", self.spatial)?;
        }
        write!(f, ")[ {} ]", self.content)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Element::Seq(s, d) => {
                write!(f, "{s}")?;
                if *d != Spatial::UNPLACED {
                    write!(f, " {d}")?;
                }
                Ok(())
            }
            Element::Comp(c) => write!(f, "{c}"),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("empty");
        }
        for (i, (e, n)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" | ")?;
            }
            write!(f, "{e}")?;
            fmt_count(f, n)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(s: &str) -> TermTree {
        TermTree::Seq(Sequence::parse_dotted(s), Spatial::UNPLACED)
    }

    fn mol(s: &str) -> Term {
        Term::element(Element::molecule(s))
    }

    #[test]
    fn normalize_flattens_and_drops_lambda() {
        let t = TermTree::Par(vec![seq("a"), TermTree::Par(vec![seq("b"), seq("c")])]);
        let n = normalize(&t);
        assert_eq!(n.0.size(), 3);
        assert_eq!(n, mol("a").par(mol("b")).par(mol("c")));

        let t = TermTree::Par(vec![TermTree::Empty, seq("a")]);
        assert_eq!(normalize(&t), mol("a"));
    }

    #[test]
    fn count_top_examples() {
        let aab = mol("a").par(mol("a")).par(mol("b"));
        assert_eq!(count_top(&mol("a"), &aab), 2);

        let comp = |inner: Term| {
            Term::element(Element::Comp(Box::new(Compartment {
                brane: [BraneElement::unplaced(Sequence::parse_dotted("m"))]
                    .into_iter()
                    .collect(),
                spatial: Spatial::UNPLACED,
                content: inner,
            })))
        };
        assert_eq!(count_top(&mol("a"), &comp(mol("a"))), 0);
        let both = comp(mol("a")).par(comp(mol("b")));
        assert_eq!(count_top(&comp(mol("a")), &both), 1);
    }

    #[test]
    fn top_multiset_examples() {
        let aab = mol("a").par(mol("a")).par(mol("b"));
        let m = top_multiset(&aab);
        assert_eq!(m.count(&Element::molecule("a")), 2);
        assert_eq!(m.count(&Element::molecule("b")), 1);
        assert!(top_multiset(&Term::empty()).is_empty());
    }

    #[test]
    fn negative_zero_is_zero() {
        assert_eq!(
            Spatial::at([-0.0, 0.0, 0.0], 1.0),
            Spatial::at([0.0; 3], 1.0)
        );
    }

    #[test]
    fn display_uses_dsl_syntax() {
        assert_eq!(Term::empty().to_string(), "empty");
        let t = mol("a").par(mol("a")).par(mol("b.c"));
        assert_eq!(t.to_string(), "a^2 | b.c");
    }
}
