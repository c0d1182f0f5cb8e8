use super::{Instantiation, LeftItem, LeftPattern, Multiplicity, SeqItem, Value, Var};
use crate::pattern::comb::binomial;
use crate::term::{BraneElement, Compartment, Element, Sequence, Spatial, Symbol, Term};

/// A variable binding produced while matching.
#[derive(Clone, Debug, PartialEq)]
pub enum Bound {
    Sym(Symbol),
    Seq(Vec<Symbol>),
    Pos(Spatial),
    /// Rest of a term layer; `None` when matching only to count.
    Rest(Option<Vec<(Element, u64)>>),
    BraneRest(Option<Vec<(BraneElement, u64)>>),
}

impl Bound {
    fn agrees(&self, other: &Bound) -> bool {
        match (self, other) {
            (Bound::Rest(None), Bound::Rest(_)) | (Bound::Rest(_), Bound::Rest(None)) => true,
            (Bound::BraneRest(None), Bound::BraneRest(_))
            | (Bound::BraneRest(_), Bound::BraneRest(None)) => true,
            _ => self == other,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Bindings {
    entries: Vec<(Var, Bound)>,
}

impl Bindings {
    pub fn get(&self, name: &str) -> Option<&Bound> {
        self.entries
            .iter()
            .find(|(v, _)| &**v == name)
            .map(|(_, b)| b)
    }

    pub fn position(&self, name: &str) -> Option<Spatial> {
        match self.get(name) {
            Some(Bound::Pos(d)) => Some(*d),
            _ => None,
        }
    }

    /// Binds `var`, or checks agreement if it is already bound.
    pub(crate) fn bind(&mut self, var: &Var, value: Bound) -> bool {
        match self.get(var) {
            Some(old) => old.agrees(&value),
            None => {
                self.entries.push((var.clone(), value));
                true
            }
        }
    }

    pub(crate) fn mark(&self) -> usize {
        self.entries.len()
    }

    pub(crate) fn reset(&mut self, mark: usize) {
        self.entries.truncate(mark);
    }

    pub fn to_instantiation(&self) -> Instantiation {
        let mut inst = Instantiation::default();
        for (v, b) in &self.entries {
            match b {
                Bound::Pos(d) => {
                    inst.tau.insert(v.clone(), *d);
                }
                Bound::Sym(s) => {
                    inst.sigma.insert(v.clone(), Value::Symbol(s.clone()));
                }
                Bound::Seq(s) => {
                    inst.sigma
                        .insert(v.clone(), Value::Sequence(Sequence(s.clone())));
                }
                Bound::Rest(Some(r)) => {
                    inst.sigma
                        .insert(v.clone(), Value::Term(r.iter().cloned().collect()));
                }
                Bound::BraneRest(Some(r)) => {
                    inst.sigma
                        .insert(v.clone(), Value::Brane(r.iter().cloned().collect()));
                }
                Bound::Rest(None) | Bound::BraneRest(None) => {}
            }
        }
        inst
    }
}

pub(crate) enum View<'a> {
    Seq(&'a Sequence, &'a Spatial),
    Comp(&'a Compartment),
}

pub(crate) trait LayerElement: Clone + Ord {
    fn view(&self) -> View<'_>;
    fn rest(v: Option<Vec<(Self, u64)>>) -> Bound;
}

impl LayerElement for Element {
    fn view(&self) -> View<'_> {
        match self {
            Element::Seq(s, d) => View::Seq(s, d),
            Element::Comp(c) => View::Comp(c),
        }
    }

    fn rest(v: Option<Vec<(Self, u64)>>) -> Bound {
        Bound::Rest(v)
    }
}

impl LayerElement for BraneElement {
    fn view(&self) -> View<'_> {
        View::Seq(&self.seq, &self.spatial)
    }

    fn rest(v: Option<Vec<(Self, u64)>>) -> Bound {
        Bound::BraneRest(v)
    }
}

/// Which element copies a match picks, up to the identity of copies of the
/// same element: for each picked layer entry, the selection made inside it
/// (brane and content for compartments) and how many copies were picked.
/// Two enumerations with the same selection stand for the same reactant
/// combinations, whatever their instantiations.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Selection(pub Vec<(usize, Vec<Selection>, u64)>);

pub(crate) type Emit<'e> = dyn FnMut(&mut Bindings, &[u64], &Selection, Multiplicity) + 'e;

/// Enumerates matches of `pat` against one layer. For each match, `out`
/// receives the bindings, the number of copies taken from each layer entry,
/// the selection, and the number of distinct copy choices it stands for in
/// this layer and everything inside it.
///
/// With `exact`, the layer must be consumed entirely when there is no rest
/// variable (compartment contents); otherwise untouched entries are context.
pub(crate) fn match_layer<E: LayerElement>(
    pat: &LeftPattern,
    layer: &[(&E, u64)],
    exact: bool,
    materialize: bool,
    b: &mut Bindings,
    out: &mut Emit<'_>,
) {
    let mut s = LayerSearch {
        items: &pat.items,
        layer,
        rest: pat.rest.as_ref(),
        exact,
        materialize,
        taken: vec![0; layer.len()],
        picks: Vec::new(),
    };
    s.search(0, b, out);
}

struct LayerSearch<'s, E> {
    items: &'s [(LeftItem, u64)],
    layer: &'s [(&'s E, u64)],
    rest: Option<&'s Var>,
    exact: bool,
    materialize: bool,
    taken: Vec<u64>,
    /// (entry, inner selection, copies, inner multiplicity per copy)
    picks: Vec<(usize, Vec<Selection>, u64, Multiplicity)>,
}

impl<'s, E: LayerElement> LayerSearch<'s, E> {
    fn search(&mut self, k: usize, b: &mut Bindings, out: &mut Emit<'_>) {
        let items = self.items;
        if k == items.len() {
            self.finish(b, out);
            return;
        }
        let (item, copies) = (&items[k].0, items[k].1);
        let layer = self.layer;
        for (e, &(elem, n)) in layer.iter().enumerate() {
            if n - self.taken[e] < copies {
                continue;
            }
            let materialize = self.materialize;
            let mark = b.mark();
            match_item(item, elem, materialize, b, &mut |b, inner, ci| {
                self.taken[e] += copies;
                self.picks.push((e, inner, copies, ci));
                self.search(k + 1, b, out);
                self.picks.pop();
                self.taken[e] -= copies;
            });
            b.reset(mark);
        }
    }

    fn finish(&mut self, b: &mut Bindings, out: &mut Emit<'_>) {
        let leftover = self.layer.iter().zip(&self.taken).any(|((_, n), t)| n > t);
        let mark = b.mark();
        match self.rest {
            Some(var) => {
                let value = self.materialize.then(|| {
                    self.layer
                        .iter()
                        .zip(&self.taken)
                        .filter(|((_, n), t)| n > *t)
                        .map(|((e, n), t)| ((*e).clone(), n - t))
                        .collect()
                });
                if !b.bind(var, E::rest(value)) {
                    return;
                }
            }
            None if self.exact && leftover => return,
            None => {}
        }
        let mut picks = self.picks.clone();
        picks.sort_by(|a, b| (a.0, &a.1).cmp(&(b.0, &b.1)));
        let mut groups: Vec<(usize, Vec<Selection>, u64, Multiplicity)> = Vec::new();
        for p in picks {
            match groups.last_mut() {
                Some(g) if g.0 == p.0 && g.1 == p.1 => g.2 += p.2,
                _ => groups.push(p),
            }
        }
        // copies of one entry are handed out to groups with distinct inner
        // selections: a multinomial choice
        let mut total: Multiplicity = 1;
        let mut remaining: Option<(usize, u64)> = None;
        for (e, _, k, ci) in &groups {
            let left = match remaining {
                Some((prev, left)) if prev == *e => left,
                _ => self.layer[*e].1,
            };
            total = total.saturating_mul(binomial(left, *k));
            for _ in 0..*k {
                total = total.saturating_mul(*ci);
            }
            remaining = Some((*e, left - k));
        }
        let sel = Selection(groups.into_iter().map(|(e, i, k, _)| (e, i, k)).collect());
        out(b, &self.taken, &sel, total);
        b.reset(mark);
    }
}

fn bind_pos(pos: &Option<Var>, d: &Spatial, b: &mut Bindings) -> bool {
    match pos {
        None => *d == Spatial::UNPLACED,
        Some(v) => b.bind(v, Bound::Pos(*d)),
    }
}

fn match_item<E: LayerElement>(
    item: &LeftItem,
    elem: &E,
    materialize: bool,
    b: &mut Bindings,
    k: &mut dyn FnMut(&mut Bindings, Vec<Selection>, Multiplicity),
) {
    match (item, elem.view()) {
        (LeftItem::Seq { seq, pos }, View::Seq(s, d)) => {
            if !bind_pos(pos, d, b) {
                return;
            }
            match_seq(&seq.0, &s.0, b, &mut |b| k(b, Vec::new(), 1));
        }
        (
            LeftItem::Comp {
                brane,
                pos,
                content,
            },
            View::Comp(comp),
        ) => {
            if !bind_pos(pos, &comp.spatial, b) {
                return;
            }
            let bview: Vec<(&BraneElement, u64)> = comp.brane.iter().collect();
            let cview: Vec<(&Element, u64)> = comp.content.0.iter().collect();
            match_layer(brane, &bview, true, materialize, b, &mut |b, _, bs, cb| {
                match_layer(
                    content,
                    &cview,
                    true,
                    materialize,
                    b,
                    &mut |b, _, cs, cc| k(b, vec![bs.clone(), cs.clone()], cb.saturating_mul(cc)),
                );
            });
        }
        _ => {}
    }
}

pub(crate) fn match_seq(
    pat: &[SeqItem],
    seq: &[Symbol],
    b: &mut Bindings,
    k: &mut dyn FnMut(&mut Bindings),
) {
    let Some((first, rest)) = pat.split_first() else {
        if seq.is_empty() {
            k(b);
        }
        return;
    };
    match first {
        SeqItem::Sym(s) => {
            if seq.first() == Some(s) {
                match_seq(rest, &seq[1..], b, k);
            }
        }
        SeqItem::SymVar(x) => {
            if let Some(head) = seq.first() {
                let mark = b.mark();
                if b.bind(x, Bound::Sym(head.clone())) {
                    match_seq(rest, &seq[1..], b, k);
                }
                b.reset(mark);
            }
        }
        SeqItem::SeqVar(x) => {
            if let Some(Bound::Seq(v)) = b.get(x) {
                let n = v.len();
                if seq.len() >= n && seq[..n] == v[..] {
                    match_seq(rest, &seq[n..], b, k);
                }
                return;
            }
            // the remaining fixed-length part bounds the split point
            for i in 0..=seq.len() {
                let mark = b.mark();
                b.bind(x, Bound::Seq(seq[..i].to_vec()));
                match_seq(rest, &seq[i..], b, k);
                b.reset(mark);
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteStep {
    /// Into the content of the compartment at this index of the layer.
    Content(usize),
    /// The brane of the compartment at this index of the layer.
    Brane(usize),
}

/// Where a match happened: the path of compartments from the term's top
/// layer. The empty path is the top layer itself.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Site(pub Vec<SiteStep>);

/// One entry of `Appl`: a site, a representative instantiation, the
/// reactants taken from the site's layer and the multiplicity `c`: the
/// number of distinct reactant copy choices with this selection, identical
/// enclosing compartments included.
#[derive(Clone, Debug, PartialEq)]
pub struct Match {
    pub site: Site,
    pub inst: Instantiation,
    pub reactants: Term,
    pub selection: Selection,
    pub multiplicity: Multiplicity,
}

fn repeated_rest(p: &LeftPattern, seen: &mut Vec<Var>) -> bool {
    if let Some(r) = &p.rest {
        if seen.contains(r) {
            return true;
        }
        seen.push(r.clone());
    }
    p.items.iter().any(|(i, _)| match i {
        LeftItem::Comp { brane, content, .. } => {
            repeated_rest(brane, seen) || repeated_rest(content, seen)
        }
        LeftItem::Seq { .. } => false,
    })
}

/// True when matching must materialize rest bindings to stay correct
/// (a rest variable that occurs more than once must be compared).
pub(crate) fn needs_materialize(p: &LeftPattern) -> bool {
    repeated_rest(p, &mut Vec::new())
}

pub(crate) type SiteEmit<'e> = dyn FnMut(&Site, &Bindings, Term, &Selection, Multiplicity) + 'e;

/// Visits every distinct (site, selection) of `p` anywhere in `t` whose
/// bindings pass `accept`: content layers when `brane_sites` is false,
/// membranes of compartments otherwise. The first accepted enumeration of
/// each selection supplies the bindings.
pub(crate) fn for_each_site_match(
    p: &LeftPattern,
    t: &Term,
    brane_sites: bool,
    materialize: bool,
    accept: &dyn Fn(&Bindings) -> bool,
    f: &mut SiteEmit<'_>,
) {
    let mut path = Vec::new();
    let cx = Walk {
        p,
        brane_sites,
        materialize,
        accept,
        skip_content: None,
        reactants: true,
    };
    cx.walk(t, 1, &mut path, f);
}

struct Walk<'a> {
    p: &'a LeftPattern,
    brane_sites: bool,
    materialize: bool,
    accept: &'a dyn Fn(&Bindings) -> bool,
    /// Leave out the content site at this path depth.
    skip_content: Option<usize>,
    reactants: bool,
}

impl Walk<'_> {
    fn site<E: LayerElement>(
        &self,
        view: &[(&E, u64)],
        site: &Site,
        factor: Multiplicity,
        as_element: &dyn Fn(&E) -> Element,
        f: &mut SiteEmit<'_>,
    ) {
        let mut seen: Vec<Selection> = Vec::new();
        let mut b = Bindings::default();
        match_layer(
            self.p,
            view,
            false,
            self.materialize,
            &mut b,
            &mut |b, taken, sel, c| {
                if !(self.accept)(b) || seen.contains(sel) {
                    return;
                }
                seen.push(sel.clone());
                let reactants = if !self.reactants {
                    Term::empty()
                } else {
                    view.iter()
                        .zip(taken)
                        .filter(|(_, n)| **n > 0)
                        .map(|((e, _), n)| (as_element(e), *n))
                        .collect()
                };
                f(site, b, reactants, sel, c.saturating_mul(factor));
            },
        );
    }

    fn walk(&self, t: &Term, factor: Multiplicity, path: &mut Vec<SiteStep>, f: &mut SiteEmit<'_>) {
        let view: Vec<(&Element, u64)> = t.0.iter().collect();
        if !self.brane_sites && self.skip_content != Some(path.len()) {
            self.site(
                &view,
                &Site(path.clone()),
                factor,
                &|e: &Element| e.clone(),
                f,
            );
        }
        for (i, (e, n)) in view.iter().enumerate() {
            if let Element::Comp(c) = e {
                self.inside(c, i, factor.saturating_mul(*n as Multiplicity), path, f);
            }
        }
    }

    fn inside(
        &self,
        c: &Compartment,
        i: usize,
        factor: Multiplicity,
        path: &mut Vec<SiteStep>,
        f: &mut SiteEmit<'_>,
    ) {
        if self.brane_sites {
            path.push(SiteStep::Brane(i));
            let bview: Vec<(&BraneElement, u64)> = c.brane.iter().collect();
            let as_elem = |e: &BraneElement| Element::Seq(e.seq.clone(), e.spatial);
            self.site(&bview, &Site(path.clone()), factor, &as_elem, f);
            path.pop();
        }
        path.push(SiteStep::Content(i));
        self.walk(&c.content, factor, path, f);
        path.pop();
    }
}

/// Sites strictly below the top layer of `t`: everything inside its
/// compartments, membranes included when `brane_sites`. Reactant terms
/// are not built.
pub(crate) fn for_each_site_below(
    p: &LeftPattern,
    t: &Term,
    brane_sites: bool,
    materialize: bool,
    accept: &dyn Fn(&Bindings) -> bool,
    f: &mut SiteEmit<'_>,
) {
    let cx = Walk {
        p,
        brane_sites,
        materialize,
        accept,
        skip_content: Some(0),
        reactants: false,
    };
    cx.walk(t, 1, &mut Vec::new(), f);
}

/// Sites inside `c` other than its content layer: its membrane (for brane
/// patterns) and everything nested in its content. Paths are as if `c`
/// were the only element of a term. Reactant terms are not built.
pub(crate) fn for_each_site_inside(
    p: &LeftPattern,
    c: &Compartment,
    brane_sites: bool,
    materialize: bool,
    accept: &dyn Fn(&Bindings) -> bool,
    f: &mut SiteEmit<'_>,
) {
    let cx = Walk {
        p,
        brane_sites,
        materialize,
        accept,
        skip_content: Some(1),
        reactants: false,
    };
    cx.inside(c, 0, 1, &mut Vec::new(), f);
}

/// Distinct selections of `p` in one explicit layer view (top-level
/// context allowed).
pub(crate) fn for_each_layer_match(
    p: &LeftPattern,
    view: &[(&Element, u64)],
    materialize: bool,
    accept: &dyn Fn(&Bindings) -> bool,
    f: &mut dyn FnMut(&Bindings, &[u64], &Selection, Multiplicity),
) {
    let mut seen: Vec<Selection> = Vec::new();
    let mut b = Bindings::default();
    match_layer(
        p,
        view,
        false,
        materialize,
        &mut b,
        &mut |b, taken, sel, c| {
            if !accept(b) || seen.contains(sel) {
                return;
            }
            seen.push(sel.clone());
            f(b, taken, sel, c);
        },
    );
}

/// All matches of a content pattern in `t`, one per distinct
/// (site, selection).
pub fn match_pattern(p: &LeftPattern, t: &Term) -> Vec<Match> {
    collect_matches(p, t, false, &|_| true)
}

pub fn match_brane_pattern(p: &LeftPattern, t: &Term) -> Vec<Match> {
    collect_matches(p, t, true, &|_| true)
}

pub(crate) fn collect_matches(
    p: &LeftPattern,
    t: &Term,
    brane_sites: bool,
    accept: &dyn Fn(&Bindings) -> bool,
) -> Vec<Match> {
    let mut out: Vec<Match> = Vec::new();
    for_each_site_match(
        p,
        t,
        brane_sites,
        true,
        accept,
        &mut |site, b, reactants, sel, c| {
            out.push(Match {
                site: site.clone(),
                inst: b.to_instantiation(),
                reactants,
                selection: sel.clone(),
                multiplicity: c,
            });
        },
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::SeqPattern;
    use crate::term::Sequence;

    fn mol(s: &str) -> Element {
        Element::molecule(s)
    }

    fn term(items: &[(&str, u64)]) -> Term {
        items.iter().map(|(s, n)| (mol(s), *n)).collect()
    }

    fn seq_item(items: Vec<SeqItem>) -> LeftItem {
        LeftItem::Seq {
            seq: SeqPattern(items),
            pos: None,
        }
    }

    #[test]
    fn ground_pair_counts_combinations() {
        let p = LeftPattern::molecules(&["a", "b"]);
        let m = match_pattern(&p, &term(&[("a", 3), ("b", 2), ("c", 1)]));
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].multiplicity, 6);

        let p = LeftPattern::molecules(&["a", "a"]);
        let m = match_pattern(&p, &term(&[("a", 4)]));
        assert_eq!(m[0].multiplicity, 6);
    }

    #[test]
    fn sequence_variables_split() {
        let x: Var = "x".into();
        let y: Var = "y".into();
        let p = LeftPattern::new(
            [(
                seq_item(vec![
                    SeqItem::SeqVar(x.clone()),
                    SeqItem::Sym("g".into()),
                    SeqItem::SeqVar(y.clone()),
                ]),
                1,
            )],
            None,
        );
        let t = term(&[("cr.g.b", 1)]);
        let m = match_pattern(&p, &t);
        assert_eq!(m.len(), 1);
        assert_eq!(
            m[0].inst.sigma[&x],
            Value::Sequence(Sequence::parse_dotted("cr"))
        );
        assert_eq!(
            m[0].inst.sigma[&y],
            Value::Sequence(Sequence::parse_dotted("b"))
        );
    }

    #[test]
    fn nested_sites_scale_by_identical_compartments() {
        let cell = Element::Comp(Box::new(Compartment {
            brane: [BraneElement::unplaced(Sequence::parse_dotted("m"))]
                .into_iter()
                .collect(),
            spatial: Spatial::UNPLACED,
            content: term(&[("a", 2)]),
        }));
        let t: Term = [(cell, 3)].into_iter().collect();
        let m = match_pattern(&LeftPattern::molecules(&["a"]), &t);
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].site, Site(vec![SiteStep::Content(0)]));
        assert_eq!(m[0].multiplicity, 6);
    }

    #[test]
    fn unbinder_items_need_unplaced_elements() {
        let placed = Element::Seq(Sequence::parse_dotted("a"), Spatial::at([0.0; 3], 1.0));
        let t = Term::element(placed);
        assert!(match_pattern(&LeftPattern::molecules(&["a"]), &t).is_empty());
        let p = LeftPattern::new(
            [(
                LeftItem::Seq {
                    seq: SeqPattern::ground(&Sequence::parse_dotted("a")),
                    pos: Some("u".into()),
                },
                1,
            )],
            None,
        );
        let m = match_pattern(&p, &t);
        assert_eq!(m[0].inst.tau[&Var::from("u")], Spatial::at([0.0; 3], 1.0));
    }
}
