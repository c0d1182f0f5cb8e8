use super::*;
use crate::term::{Element, Sequence, Spatial};

#[test]
fn term_round_trip() {
    let text = "a^2 | b.c @(1,2,0; 0.5) | loop(m | GFR^3 @(0,0,0; 1))[Sic1 | loop(n)[cr.gN2.gB5]]";
    let t = parse_term(text).unwrap();
    assert_eq!(t.molecule_count(&Sequence::parse_dotted("a")), 2);
    assert_eq!(parse_term(&serialize_term(&t)).unwrap(), t);
}

#[test]
fn empty_and_eps() {
    assert!(parse_term("empty").unwrap().is_empty());
    let t = parse_term("eps | loop(empty)[empty]").unwrap();
    assert_eq!(t.molecule_count(&Sequence::epsilon()), 1);
    assert_eq!(serialize_term(&Term::empty()), "empty");
}

#[test]
fn quoted_names() {
    let t = parse_term(r#""loop" | "a b\"c" | x-y"#).unwrap();
    let back = serialize_term(&t);
    assert!(back.contains(r#""loop""#), "{back}");
    assert!(back.contains(r#""a b\"c""#), "{back}");
    assert!(back.contains("x-y"), "{back}");
    assert_eq!(parse_term(&back).unwrap(), t);
}

#[test]
fn placed_last_brane_element_keeps_its_place() {
    let t = parse_term("loop(a @(1,0,0; 0.5) @(.; 0))[empty]").unwrap();
    let c = t.0.iter().next().unwrap().0.as_compartment().unwrap().clone();
    assert_eq!(c.spatial, Spatial::UNPLACED);
    assert_eq!(parse_term(&serialize_term(&t)).unwrap(), t);
}

#[test]
fn errors_carry_line_and_column() {
    let e = parse_term("a |").unwrap_err();
    assert_eq!((e.line, e.col), (1, 4));
    let e = parse_term("a\n | loop(m)[b").unwrap_err();
    assert_eq!(e.line, 2);
    assert!(e.to_string().starts_with("2:"), "{e}");
    let e = parse_term(r#""a\q""#).unwrap_err();
    assert!(e.msg.contains("unknown escape"), "{e}");
}

#[test]
fn hyphen_needs_a_name_after_it() {
    let t = parse_term("Sic1-Clb5").unwrap();
    assert_eq!(
        t.0.iter().next().unwrap().0,
        &Element::molecule("Sic1-Clb5")
    );
    assert!(parse_term("a-").is_err());
}

const SMALL: &str = "
model tiny;
dimension 2;
sphere_radius 4;
cube_size 2;
param k = 3;
term { a^k | loop(m @(0,0,0; 1))[b] }
molecular {
  S1: a | a -> b rate slow*k;
  S2: loop(m | $B @p)[b | $X] -> loop(m | $B @p)[c | $X] rate 2;
  brane S3: m | $B -> m | mark | $B rate 1/4;
}
visual {
  R1: loop(m | $B @p)[c | $X] -> loop(m | $B @(p; 1.5))[$X] rate 0.5 if radius(p) == 1;
}
";

#[test]
fn small_model() {
    let m = parse_model(SMALL).unwrap();
    assert_eq!(m.level_counts(), [1, 3, 0]);
    assert_eq!(m.rules[0].rate, crate::rewrite::Rate::Finite(3.0));
    assert_eq!(m.rate_text["S1"], "slow*k");
    assert_eq!(m.geometry.max_object_radius, 1.0);
    let back = serialize(&m);
    assert!(back.contains("rate slow*k"), "{back}");
    assert_eq!(parse_model(&back).unwrap(), m);
}

#[test]
fn overrides() {
    let o = BTreeMap::from([("k".to_string(), 5.0)]);
    let m = parse_model_with(SMALL, &o).unwrap();
    assert_eq!(m.rules[0].rate, crate::rewrite::Rate::Finite(5.0));
    assert_eq!(m.initial.molecule_count(&Sequence::parse_dotted("a")), 5);
    let bad = BTreeMap::from([("nope".to_string(), 1.0)]);
    let e = parse_model_with(SMALL, &bad).unwrap_err();
    assert!(e.is_config());
}

#[test]
fn rule_errors_point_at_the_rule() {
    let text = "model x; dimension 2; sphere_radius 1; cube_size 1; term { a }\nmolecular {\n  S1: a -> $Y rate 1;\n}";
    let e = parse_model(text).unwrap_err();
    let LoadError::Syntax(e) = e else { panic!("{e}") };
    assert_eq!((e.line, e.col), (3, 3));
    assert!(e.msg.contains("not bound"), "{e}");
    let text = "model x; dimension 2; sphere_radius 1; cube_size 1; term { a }\nmolecular { S1: a -> b; }";
    assert!(parse_model(text).unwrap_err().to_string().contains("rate"));
}

#[test]
fn unknown_param_is_reported() {
    let text = "model x; dimension 2; sphere_radius q; cube_size 1; term { a }";
    let e = parse_model(text).unwrap_err();
    assert!(e.to_string().contains("unknown parameter `q`"), "{e}");
}

mod round_trip {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(300))]

        #[test]
        fn random_terms(seed in any::<u64>()) {
            let t = random::term(&mut ChaCha8Rng::seed_from_u64(seed));
            let text = serialize_term(&t);
            prop_assert_eq!(parse_term(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?, t);
        }

        #[test]
        fn random_models(seed in any::<u64>()) {
            let m = random::model(&mut ChaCha8Rng::seed_from_u64(seed));
            let text = serialize(&m);
            let back = parse_model(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
            prop_assert_eq!(back, m, "{}", text);
        }
    }
}
