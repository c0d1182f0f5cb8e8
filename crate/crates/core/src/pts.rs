//! One-step distribution of the discrete-time probabilistic transition
//! system. Only used as a reference for the SSA engine on small models.

use thiserror::Error;

use crate::pattern::InstantiateHooks;
use crate::rewrite::{applications, Rate, RewriteError, RewriteRule};
use crate::term::Term;

#[derive(Clone, Debug, PartialEq)]
pub struct StepDistribution {
    /// Distinct successor terms reached by some reaction, with probabilities.
    pub entries: Vec<(Term, f64)>,
    /// `p̄_T`: probability that nothing happens during `dt`.
    pub no_reaction_prob: f64,
    /// `δt`, minutes.
    pub dt: f64,
    /// Total reaction probability contributed by each rule, in rule order.
    pub by_rule: Vec<f64>,
    /// `m_T`.
    pub combinations: u128,
}

#[derive(Debug, Error)]
pub enum PtsError {
    #[error("N = {n} violates 0 < k/N <= 1 for rule {rule} (k = {k})")]
    RateBound { rule: String, k: f64, n: f64 },
    #[error(transparent)]
    Rewrite(#[from] RewriteError),
}

/// The distribution over successors of `t` for step scale `n` (`N`).
/// Rules with infinite rate are not part of this semantics and are skipped.
pub fn step_distribution(
    t: &Term,
    rules: &[RewriteRule],
    n: f64,
    hooks: &mut dyn InstantiateHooks,
) -> Result<StepDistribution, PtsError> {
    let mut per_rule = Vec::with_capacity(rules.len());
    for r in rules {
        let Rate::Finite(k) = r.rate else {
            per_rule.push((0.0, Vec::new()));
            continue;
        };
        if !(k / n > 0.0 && k / n <= 1.0) {
            return Err(PtsError::RateBound {
                rule: r.id.clone(),
                k,
                n,
            });
        }
        per_rule.push((k, applications(r, t, hooks)?));
    }
    let m: u128 = per_rule
        .iter()
        .flat_map(|(_, apps)| apps.iter().map(|a| a.multiplicity))
        .fold(0u128, |a, b| a.saturating_add(b));
    let dt = 1.0 / (n * (m.max(1) as f64));
    let mut entries: Vec<(Term, f64)> = Vec::new();
    let mut by_rule = Vec::with_capacity(rules.len());
    for (k, apps) in per_rule {
        let mut rule_total = 0.0;
        for a in apps {
            let p = k / (n * m as f64) * a.multiplicity as f64;
            rule_total += p;
            match entries.iter_mut().find(|(t2, _)| *t2 == a.result) {
                Some((_, q)) => *q += p,
                None => entries.push((a.result, p)),
            }
        }
        by_rule.push(rule_total);
    }
    let no_reaction_prob = 1.0 - by_rule.iter().sum::<f64>();
    Ok(StepDistribution {
        entries,
        no_reaction_prob,
        dt,
        by_rule,
        combinations: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pattern::{LeftPattern, PlainHooks, RightPattern};
    use crate::rewrite::{Level, Precondition};
    use crate::term::Element;

    fn rule(id: &str, lhs: &[&str], rhs: &[&str], k: f64) -> RewriteRule {
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

    fn mols(names: &[&str]) -> Term {
        names.iter().map(|s| Element::molecule(s)).collect()
    }

    #[test]
    fn single_rule_always_fires() {
        let d = step_distribution(
            &mols(&["a"]),
            &[rule("r", &["a"], &["b"], 1.0)],
            1.0,
            &mut PlainHooks,
        )
        .unwrap();
        assert_eq!(d.dt, 1.0);
        assert_eq!(d.entries, vec![(mols(&["b"]), 1.0)]);
        assert_eq!(d.no_reaction_prob, 0.0);
    }

    #[test]
    fn nothing_applicable() {
        let d = step_distribution(
            &mols(&["c"]),
            &[rule("r", &["a"], &["b"], 1.0)],
            2.0,
            &mut PlainHooks,
        )
        .unwrap();
        assert_eq!(d.dt, 0.5);
        assert_eq!(d.no_reaction_prob, 1.0);
        assert!(d.entries.is_empty());
    }

    #[test]
    fn two_rules_split_probability() {
        let rules = [
            rule("r1", &["a"], &["c"], 1.0),
            rule("r2", &["b"], &["c"], 3.0),
        ];
        let d = step_distribution(&mols(&["a", "b"]), &rules, 4.0, &mut PlainHooks).unwrap();
        assert_eq!(d.by_rule, vec![0.125, 0.375]);
        assert_eq!(d.no_reaction_prob, 0.5);
        assert_eq!(d.dt, 0.125);
    }

    #[test]
    fn rate_bound_is_checked() {
        let r = rule("r", &["a"], &["b"], 2.0);
        assert!(matches!(
            step_distribution(&mols(&["a"]), &[r], 1.0, &mut PlainHooks),
            Err(PtsError::RateBound { .. })
        ));
    }
}
