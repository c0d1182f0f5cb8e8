//! Rewrite rules, their applications to terms, and reactant counts.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::Ratio;
use thiserror::Error;

use crate::multiset::Multiset;
use crate::pattern::matcher::for_each_site_match;
use crate::pattern::{
    binom, comb, instantiate, instantiate_left, Bindings, BraneRef, InstantiateHooks,
    Instantiation, LeftItem, LeftPattern, Multiplicity, PatternError, PosFn, RightItem,
    RightPattern, SeqItem, SeqPattern, Site, SiteStep, Var, VarKind,
};
use crate::term::{BraneElement, Element, Spatial, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    /// Horizontal rules on cell shape, size and position.
    Visual,
    /// Horizontal rules on molecules.
    Molecular,
    /// Instantaneous rules linking molecular conditions to visual stages.
    Vertical,
}

impl Level {
    pub fn name(self) -> &'static str {
        match self {
            Level::Visual => "visual",
            Level::Molecular => "molecular",
            Level::Vertical => "vertical",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Rate {
    /// Per minute.
    Finite(f64),
    Infinite,
}

impl Rate {
    pub fn finite(self) -> Option<f64> {
        match self {
            Rate::Finite(k) => Some(k),
            Rate::Infinite => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Attr {
    X,
    Y,
    Z,
    Radius,
}

impl Attr {
    pub fn name(self) -> &'static str {
        match self {
            Attr::X => "x",
            Attr::Y => "y",
            Attr::Z => "z",
            Attr::Radius => "radius",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// One clause of a precondition: `attr(var) op value`.
#[derive(Clone, Debug, PartialEq)]
pub struct Condition {
    pub var: Var,
    pub attr: Attr,
    pub op: CmpOp,
    pub value: f64,
}

const TOLERANCE: f64 = 1e-9;

impl Condition {
    pub fn holds(&self, d: &Spatial) -> bool {
        let x = match self.attr {
            Attr::Radius => d.radius,
            Attr::X | Attr::Y | Attr::Z => match d.center() {
                Some(c) => c[self.attr as usize],
                None => return false,
            },
        };
        let eq = (x - self.value).abs() <= TOLERANCE * self.value.abs().max(1.0);
        match self.op {
            CmpOp::Eq => eq,
            CmpOp::Ne => !eq,
            CmpOp::Lt => x < self.value && !eq,
            CmpOp::Le => x < self.value || eq,
            CmpOp::Gt => x > self.value && !eq,
            CmpOp::Ge => x > self.value || eq,
        }
    }
}

/// `f_c`: a conjunction of conditions over position variables.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Precondition(pub Vec<Condition>);

impl Precondition {
    pub fn holds(&self, inst: &Instantiation) -> bool {
        self.0
            .iter()
            .all(|c| inst.tau.get(&c.var).is_some_and(|d| c.holds(d)))
    }

    pub fn holds_on(&self, b: &Bindings) -> bool {
        self.0
            .iter()
            .all(|c| b.position(&c.var).is_some_and(|d| c.holds(&d)))
    }

    pub fn is_trivial(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RuleError {
    #[error("rule {rule}: variable `{var}` on the right is not bound on the left")]
    Unbound { rule: String, var: String },
    #[error("rule {rule}: variable `{var}` is used as more than one kind")]
    KindMismatch { rule: String, var: String },
    #[error("rule {rule}: only vertical rules may have an infinite rate")]
    InfiniteRate { rule: String },
    #[error("rule {rule}: vertical rules must have an infinite rate")]
    FiniteVertical { rule: String },
    #[error("rule {rule}: rate must be positive and finite, got {rate}")]
    BadRate { rule: String, rate: f64 },
    #[error("rule {rule}: brane rules may only contain sequences and brane variables")]
    BraneShape { rule: String },
    #[error("rule {rule}: precondition refers to `{var}`, which is not a position variable")]
    PreconditionVar { rule: String, var: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RewriteRule {
    pub id: String,
    pub level: Level,
    /// Applies to membranes instead of compartment contents.
    pub brane: bool,
    pub precondition: Precondition,
    pub lhs: LeftPattern,
    pub rhs: RightPattern,
    pub rate: Rate,
}

fn right_uses(p: &RightPattern, brane: bool, out: &mut Vec<(Var, VarKind)>) {
    fn seq_uses(s: &SeqPattern, out: &mut Vec<(Var, VarKind)>) {
        for i in &s.0 {
            match i {
                SeqItem::Sym(_) => {}
                SeqItem::SymVar(v) => out.push((v.clone(), VarKind::Symbol)),
                SeqItem::SeqVar(v) => out.push((v.clone(), VarKind::Sequence)),
            }
        }
    }
    fn pos_uses(f: &PosFn, out: &mut Vec<(Var, VarKind)>) {
        if let Some(v) = f.var() {
            out.push((v.clone(), VarKind::Position));
        }
    }
    for (item, _) in &p.items {
        match item {
            RightItem::Seq { seq, pos } => {
                seq_uses(seq, out);
                pos_uses(pos, out);
            }
            RightItem::Comp {
                brane: b,
                pos,
                content,
            } => {
                for (s, f, _) in &b.items {
                    seq_uses(s, out);
                    pos_uses(f, out);
                }
                for r in &b.vars {
                    match r {
                        BraneRef::Var(v) | BraneRef::Half(v, _) => {
                            out.push((v.clone(), VarKind::Brane))
                        }
                    }
                }
                pos_uses(pos, out);
                right_uses(content, false, out);
            }
            RightItem::Var(v) | RightItem::Half(v, _) => out.push((
                v.clone(),
                if brane { VarKind::Brane } else { VarKind::Term },
            )),
        }
    }
}

impl RewriteRule {
    /// Checks the well-formedness conditions and builds the rule.
    pub fn new(
        id: impl Into<String>,
        level: Level,
        brane: bool,
        precondition: Precondition,
        lhs: LeftPattern,
        rhs: RightPattern,
        rate: Rate,
    ) -> Result<Self, RuleError> {
        let rule = RewriteRule {
            id: id.into(),
            level,
            brane,
            precondition,
            lhs,
            rhs,
            rate,
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<(), RuleError> {
        let rule = || self.id.clone();
        match (self.rate, self.level) {
            (Rate::Infinite, Level::Vertical) => {}
            (Rate::Infinite, _) => return Err(RuleError::InfiniteRate { rule: rule() }),
            (Rate::Finite(_), Level::Vertical) => {
                return Err(RuleError::FiniteVertical { rule: rule() })
            }
            (Rate::Finite(k), _) if !(k > 0.0 && k.is_finite()) => {
                return Err(RuleError::BadRate {
                    rule: rule(),
                    rate: k,
                })
            }
            _ => {}
        }
        if self.brane {
            let lhs_ok = self
                .lhs
                .items
                .iter()
                .all(|(i, _)| matches!(i, LeftItem::Seq { .. }));
            let rhs_ok = self
                .rhs
                .items
                .iter()
                .all(|(i, _)| matches!(i, RightItem::Seq { .. } | RightItem::Var(_)));
            if !lhs_ok || !rhs_ok {
                return Err(RuleError::BraneShape { rule: rule() });
            }
        }
        let mut kinds = BTreeMap::new();
        self.lhs
            .collect_vars(&mut kinds, self.brane)
            .map_err(|v| RuleError::KindMismatch {
                rule: rule(),
                var: v.to_string(),
            })?;
        let mut uses = Vec::new();
        right_uses(&self.rhs, self.brane, &mut uses);
        for (v, kind) in uses {
            match kinds.get(&v) {
                None => {
                    return Err(RuleError::Unbound {
                        rule: rule(),
                        var: v.to_string(),
                    })
                }
                Some(k) if *k != kind => {
                    return Err(RuleError::KindMismatch {
                        rule: rule(),
                        var: v.to_string(),
                    })
                }
                _ => {}
            }
        }
        for c in &self.precondition.0 {
            if kinds.get(&c.var) != Some(&VarKind::Position) {
                return Err(RuleError::PreconditionVar {
                    rule: rule(),
                    var: c.var.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn uses_getpos(&self) -> bool {
        let mut found = false;
        self.rhs
            .pos_fns(&mut |f| found |= matches!(f, PosFn::GetPos { .. }));
        found
    }
}

impl fmt::Display for RewriteRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.id, self.level.name())
    }
}

/// One element of `Appl(R, T)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Application {
    pub site: Site,
    pub inst: Instantiation,
    /// `Tr`: the reactants taken from the site's layer.
    pub reactants: Term,
    /// `c`: how many distinct reactant combinations this application stands for.
    pub multiplicity: Multiplicity,
    /// `T″`: the whole term after the rewrite, with placements resolved.
    pub result: Term,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewriteError {
    #[error(transparent)]
    Pattern(#[from] PatternError),
    #[error("matched reactants are not present at the site")]
    MissingReactants,
    #[error("site path does not lead to a compartment")]
    BadSite,
}

fn brane_as_layer(b: &Multiset<BraneElement>) -> Multiset<Element> {
    b.iter()
        .map(|(e, n)| (Element::Seq(e.seq.clone(), e.spatial), n))
        .collect()
}

fn layer_as_brane(l: Multiset<Element>) -> Result<Multiset<BraneElement>, RewriteError> {
    l.into_entries()
        .into_iter()
        .map(|(e, n)| match e {
            Element::Seq(seq, spatial) => Ok((BraneElement { seq, spatial }, n)),
            Element::Comp(_) => Err(RewriteError::BadSite),
        })
        .collect()
}

/// Rewrites the layer at `site` with `f`, rebuilding the enclosing
/// compartments. Only one copy of each enclosing compartment changes.
pub fn rewrite_at(
    t: &Term,
    site: &[SiteStep],
    f: &mut dyn FnMut(&Multiset<Element>) -> Result<Multiset<Element>, RewriteError>,
) -> Result<Term, RewriteError> {
    let Some((step, rest)) = site.split_first() else {
        return Ok(Term(f(&t.0)?));
    };
    let (SiteStep::Content(i) | SiteStep::Brane(i)) = *step;
    if i >= t.0.len() {
        return Err(RewriteError::BadSite);
    }
    let (old, _) = t.0.get(i);
    let Element::Comp(c) = old else {
        return Err(RewriteError::BadSite);
    };
    let mut c = c.clone();
    match step {
        SiteStep::Content(_) => c.content = rewrite_at(&c.content, rest, f)?,
        SiteStep::Brane(_) => {
            if !rest.is_empty() {
                return Err(RewriteError::BadSite);
            }
            c.brane = layer_as_brane(f(&brane_as_layer(&c.brane))?)?;
        }
    }
    let mut layer = t.0.clone();
    layer.remove(old, 1);
    layer.insert(Element::Comp(c), 1);
    Ok(Term(layer))
}

/// Replaces `P_Lτσ` by `P_Rτσ` in one layer.
pub fn replace_in_layer(
    layer: &Multiset<Element>,
    consumed: &Term,
    produced: Term,
) -> Result<Multiset<Element>, RewriteError> {
    let mut out = layer.clone();
    for (e, n) in consumed.0.iter() {
        if !out.remove(e, n) {
            return Err(RewriteError::MissingReactants);
        }
    }
    out.union(produced.0);
    Ok(out)
}

pub(crate) fn consumed_by(rule: &RewriteRule, inst: &Instantiation) -> Result<Term, PatternError> {
    if rule.brane {
        let b = crate::pattern::instantiate::instantiate_left_brane(&rule.lhs, inst)?;
        Ok(Term(brane_as_layer(&b)))
    } else {
        instantiate_left(&rule.lhs, inst)
    }
}

/// `Appl(R, T)`. Applications whose placement fails (no room for a new
/// object) are left out, as are those whose precondition fails.
pub fn applications(
    rule: &RewriteRule,
    t: &Term,
    hooks: &mut dyn InstantiateHooks,
) -> Result<Vec<Application>, RewriteError> {
    let mut out = Vec::new();
    for m in matches(rule, t) {
        let consumed = consumed_by(rule, &m.inst)?;
        let produced = match instantiate(&rule.rhs, &m.inst, hooks) {
            Ok(p) => p,
            Err(PatternError::Full(_)) => continue,
            Err(e) => return Err(e.into()),
        };
        let mut produced = Some(produced);
        let result = rewrite_at(t, &m.site.0, &mut |layer| {
            replace_in_layer(layer, &consumed, produced.take().unwrap_or_default())
        })?;
        out.push(Application {
            site: m.site,
            inst: m.inst,
            reactants: m.reactants,
            multiplicity: m.multiplicity,
            result,
        });
    }
    Ok(out)
}

/// Matches of the rule's left side that pass its precondition, one per
/// distinct (site, selection).
pub fn matches(rule: &RewriteRule, t: &Term) -> Vec<crate::pattern::Match> {
    crate::pattern::matcher::collect_matches(&rule.lhs, t, rule.brane, &|b| {
        rule.precondition.holds_on(b)
    })
}

/// `m_T^(R)`: the number of distinct reactant combinations enabled in `t`.
pub fn reactant_combinations(rule: &RewriteRule, t: &Term) -> Multiplicity {
    let mut total: Multiplicity = 0;
    let materialize = crate::pattern::matcher::needs_materialize(&rule.lhs);
    let accept = |b: &Bindings| rule.precondition.holds_on(b);
    for_each_site_match(
        &rule.lhs,
        t,
        rule.brane,
        materialize,
        &accept,
        &mut |_, _, _, _, c| {
            total = total.saturating_add(c);
        },
    );
    total
}

/// The multiplicity of one match computed from its definition: `comb` of
/// the left side times the `binom` correction for the context of each layer
/// on the way down to the site. Agrees with `Match::multiplicity`.
pub fn multiplicity_by_definition(
    rule: &RewriteRule,
    t: &Term,
    m: &crate::pattern::Match,
) -> Result<Ratio<u128>, RewriteError> {
    let mut acc = Ratio::from_integer(comb(&rule.lhs, &m.inst)?);
    let mut layer = t.0.clone();
    for step in &m.site.0 {
        let (SiteStep::Content(i) | SiteStep::Brane(i)) = *step;
        if i >= layer.len() {
            return Err(RewriteError::BadSite);
        }
        let (e, _) = layer.get(i);
        let e = e.clone();
        let one = Term::element(e.clone());
        let mut ctx = layer.clone();
        ctx.remove(&e, 1);
        acc *= binom(&one, &one, &Term(ctx))?;
        let Element::Comp(c) = e else {
            return Err(RewriteError::BadSite);
        };
        layer = match step {
            SiteStep::Content(_) => c.content.0,
            SiteStep::Brane(_) => brane_as_layer(&c.brane),
        };
    }
    let consumed = consumed_by(rule, &m.inst)?;
    let mut ctx = layer;
    for (e, n) in consumed.0.iter() {
        if !ctx.remove(e, n) {
            return Err(RewriteError::MissingReactants);
        }
    }
    acc *= binom(&consumed, &consumed, &Term(ctx))?;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::PlainHooks;

    fn mols(items: &[(&str, u64)]) -> Term {
        items
            .iter()
            .map(|(s, n)| (Element::molecule(s), *n))
            .collect()
    }

    fn flat(id: &str, lhs: &[&str], rhs: &[&str], k: f64) -> RewriteRule {
        RewriteRule::new(
            id,
            Level::Molecular,
            false,
            Precondition::default(),
            LeftPattern::molecules(lhs),
            RightPattern::molecules(rhs),
            Rate::Finite(k),
        )
        .unwrap()
    }

    #[test]
    fn complexation_counts() {
        let s5 = flat("S5", &["Sic1", "Clb5"], &["Sic1-Clb5"], 5.0);
        let apps = applications(&s5, &mols(&[("Sic1", 2), ("Clb5", 1)]), &mut PlainHooks).unwrap();
        assert_eq!(apps.len(), 1);
        assert_eq!(apps[0].multiplicity, 2);
        assert_eq!(apps[0].result, mols(&[("Sic1", 1), ("Sic1-Clb5", 1)]));
        assert_eq!(
            reactant_combinations(&s5, &mols(&[("Sic1", 2), ("Clb5", 2)])),
            4
        );
        assert!(applications(&s5, &mols(&[("Sic1", 2)]), &mut PlainHooks)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn validation_rejects_bad_rules() {
        let lhs = LeftPattern::molecules(&["a"]);
        let rhs = RightPattern {
            items: vec![(RightItem::Var("Y".into()), 1)],
        };
        let err = RewriteRule::new(
            "bad",
            Level::Molecular,
            false,
            Precondition::default(),
            lhs.clone(),
            rhs,
            Rate::Finite(1.0),
        )
        .unwrap_err();
        assert!(matches!(err, RuleError::Unbound { .. }));
        let err = RewriteRule::new(
            "inf",
            Level::Molecular,
            false,
            Precondition::default(),
            lhs.clone(),
            RightPattern::default(),
            Rate::Infinite,
        )
        .unwrap_err();
        assert!(matches!(err, RuleError::InfiniteRate { .. }));
        let err = RewriteRule::new(
            "zero",
            Level::Molecular,
            false,
            Precondition::default(),
            lhs,
            RightPattern::default(),
            Rate::Finite(0.0),
        )
        .unwrap_err();
        assert!(matches!(err, RuleError::BadRate { .. }));
    }

    #[test]
    fn conditions_compare_with_tolerance() {
        let d = Spatial::at([0.5, 0.0, 0.0], 0.75);
        let c = |attr, op, value| Condition {
            var: "p".into(),
            attr,
            op,
            value,
        };
        assert!(c(Attr::Radius, CmpOp::Eq, 0.75 + 1e-12).holds(&d));
        assert!(c(Attr::X, CmpOp::Gt, 0.0).holds(&d));
        assert!(!c(Attr::X, CmpOp::Lt, 0.5).holds(&d));
        assert!(c(Attr::X, CmpOp::Le, 0.5).holds(&d));
        assert!(!c(Attr::X, CmpOp::Eq, 0.0).holds(&Spatial::UNPLACED));
    }
}
