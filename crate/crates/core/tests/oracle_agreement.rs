use num_rational::Ratio;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use scls::oracle::random::{self, Limits};
use scls::oracle::{brute_force_combinations, brute_force_rule};
use scls::pattern::{LeftPattern, RightPattern};
use scls::rewrite::{
    matches, multiplicity_by_definition, reactant_combinations, Level, Precondition, Rate,
    RewriteRule,
};

fn rule_for(lhs: LeftPattern, brane: bool) -> Option<RewriteRule> {
    RewriteRule::new(
        "r",
        Level::Molecular,
        brane,
        Precondition::default(),
        lhs,
        RightPattern::default(),
        Rate::Finite(1.0),
    )
    .ok()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn fast_matcher_agrees_with_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random::term(&mut rng, Limits::default());
        let p = random::pattern(&mut rng, &t, Limits::default());
        let Some(rule) = rule_for(p.clone(), false) else { return Ok(()) };
        let oracle = brute_force_combinations(&p, &t);
        prop_assert_eq!(reactant_combinations(&rule, &t), oracle, "pattern {:?}\nterm {}", p, t);
        let mut by_def = Ratio::from_integer(0u128);
        for m in matches(&rule, &t) {
            let d = multiplicity_by_definition(&rule, &t, &m).unwrap();
            prop_assert_eq!(d, Ratio::from_integer(m.multiplicity));
            by_def += d;
        }
        prop_assert_eq!(by_def, Ratio::from_integer(oracle));
    }

    #[test]
    fn brane_matches_agree_with_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random::term(&mut rng, Limits::default());
        let p = random::brane_pattern(&mut rng, &t);
        let Some(rule) = rule_for(p, true) else { return Ok(()) };
        prop_assert_eq!(reactant_combinations(&rule, &t), brute_force_rule(&rule, &t));
    }
}
