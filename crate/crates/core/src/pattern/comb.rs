//! The multiplicity functions `comb` and `binom`.

use std::collections::BTreeMap;

use num_rational::Ratio;

use super::{instantiate_left, Instantiation, LeftItem, LeftPattern, PatternError, Value};
use crate::multiset::Multiset;
use crate::term::{Element, Term};

/// Counts of distinct reactant choices. Saturates instead of overflowing.
pub type Multiplicity = u128;

/// C(n, k), saturating at `u128::MAX`.
pub fn binomial(n: u64, k: u64) -> Multiplicity {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step
        let num = (n - i) as u128;
        match acc.checked_mul(num) {
            Some(v) => acc = v / (i as u128 + 1),
            None => {
                let g = gcd(acc, i as u128 + 1);
                let reduced = (acc / g).checked_mul(num / ((i as u128 + 1) / g));
                match reduced {
                    Some(v) => acc = v,
                    None => return u128::MAX,
                }
            }
        }
    }
    acc
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

fn mult_mul(a: Multiplicity, b: Multiplicity) -> Multiplicity {
    a.saturating_mul(b)
}

/// `comb(P, τ, σ)`: how many distinct ways the instantiated pattern can pick
/// its reactants inside compartments whose contents are absorbed by rest
/// variables.
pub fn comb(p: &LeftPattern, inst: &Instantiation) -> Result<Multiplicity, PatternError> {
    comb_layer(p, inst, false)
}

fn comb_layer(
    p: &LeftPattern,
    inst: &Instantiation,
    brane: bool,
) -> Result<Multiplicity, PatternError> {
    let mut c: Multiplicity = 1;
    for (item, n) in &p.items {
        let ci = match item {
            LeftItem::Seq { .. } => 1,
            LeftItem::Comp { brane, content, .. } => mult_mul(
                comb_layer(brane, inst, true)?,
                comb_layer(content, inst, false)?,
            ),
        };
        for _ in 0..*n {
            c = mult_mul(c, ci);
        }
    }
    if !brane {
        c = mult_mul(c, item_assignments(p, inst)?);
    }
    let Some(rest) = &p.rest else {
        return Ok(c);
    };
    let items_only = LeftPattern {
        items: p.items.clone(),
        rest: None,
    };
    let picked: Multiset<Element> = if brane {
        super::instantiate::instantiate_left_brane(&items_only, inst)?
            .iter()
            .map(|(b, n)| (Element::Seq(b.seq.clone(), b.spatial), n))
            .collect()
    } else {
        instantiate_left(&items_only, inst)?.0
    };
    let rest_part: Multiset<Element> = match inst.sigma.get(rest) {
        Some(Value::Term(t)) if !brane => t.0.clone(),
        Some(Value::Brane(b)) if brane => b
            .iter()
            .map(|(b, n)| (Element::Seq(b.seq.clone(), b.spatial), n))
            .collect(),
        Some(_) => return Err(PatternError::WrongKind(rest.to_string())),
        None => return Err(PatternError::Unbound(rest.to_string())),
    };
    for (e, k) in picked.iter() {
        let whole = k + rest_part.count(e);
        c = mult_mul(c, binomial(whole, k));
    }
    Ok(c)
}

fn without_rests(p: &LeftPattern) -> LeftPattern {
    LeftPattern {
        items: p
            .items
            .iter()
            .map(|(item, n)| {
                let item = match item {
                    LeftItem::Seq { .. } => item.clone(),
                    LeftItem::Comp {
                        brane,
                        pos,
                        content,
                    } => LeftItem::Comp {
                        brane: without_rests(brane),
                        pos: pos.clone(),
                        content: without_rests(content),
                    },
                };
                (item, *n)
            })
            .collect(),
        rest: None,
    }
}

/// Distinct items that instantiate to the same term but pick different
/// explicit reactants inside it can be assigned to the identical copies in
/// several ways: `K! / Π k_g!` for `K` copies split into groups `k_g`.
fn item_assignments(p: &LeftPattern, inst: &Instantiation) -> Result<Multiplicity, PatternError> {
    if !p.has_compartment_item() {
        return Ok(1);
    }
    let mut groups: BTreeMap<Term, BTreeMap<Term, u64>> = BTreeMap::new();
    for (item, n) in &p.items {
        let single = LeftPattern {
            items: vec![(item.clone(), 1)],
            rest: None,
        };
        let full = instantiate_left(&single, inst)?;
        let explicit = instantiate_left(&without_rests(&single), inst)?;
        *groups.entry(full).or_default().entry(explicit).or_default() += n;
    }
    let mut c: Multiplicity = 1;
    for g in groups.values() {
        let mut left: u64 = g.values().sum();
        for k in g.values() {
            c = mult_mul(c, binomial(left, *k));
            left -= k;
        }
    }
    Ok(c)
}

/// `binom(T1, T2, T3)`: the correction for choosing the reactants `T1`
/// (drawn from `T2`) when `T3` sits beside them in the same layer.
pub fn binom(t1: &Term, t2: &Term, t3: &Term) -> Result<Ratio<u128>, PatternError> {
    let mut acc = Ratio::from_integer(1u128);
    for (e, n1) in t1.0.iter() {
        let n2 = t2.0.count(e);
        let n3 = t3.0.count(e);
        for i in 1..=n3 {
            let den = n2 as i128 - n1 as i128 + i as i128;
            if den <= 0 {
                return Err(PatternError::ZeroDenominator(e.to_string()));
            }
            acc *= Ratio::new((n2 + i) as u128, den as u128);
        }
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mols(items: &[(&str, u64)]) -> Term {
        items
            .iter()
            .map(|(s, n)| (Element::molecule(s), *n))
            .collect()
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(2, 3), 0);
        assert_eq!(binomial(60, 30), 118264581564861424);
        assert_eq!(binomial(u64::MAX, 4), u128::MAX);
    }

    #[test]
    fn binom_matches_choose() {
        // a chosen once from a^3 with a^2 beside it: C(3,1) = 3
        let b = binom(&mols(&[("a", 1)]), &mols(&[("a", 1)]), &mols(&[("a", 2)])).unwrap();
        assert_eq!(b, Ratio::from_integer(3));
        // a^2 | b chosen from a^4 | b^3
        let b = binom(
            &mols(&[("a", 2), ("b", 1)]),
            &mols(&[("a", 2), ("b", 1)]),
            &mols(&[("a", 2), ("b", 2)]),
        )
        .unwrap();
        assert_eq!(b, Ratio::from_integer(6 * 3));
        assert!(binom(&mols(&[("a", 2)]), &Term::empty(), &mols(&[("a", 2)])).is_err());
    }
}
