use proptest::prelude::*;
use scls::dsl::parse_model;
use scls::engine::{Engine, Frame, Observer, Reaction, Termination};
use scls::model::Model;
use scls::term::{Element, Sequence};
use scls::yeast::YeastConfig;

fn model(term: &str, rules: &str) -> Model {
    parse_model(&format!(
        "model t;\ndimension 2;\nsphere_radius 4;\ncube_size 2;\nmax_radius 1;\nterm {{ {term} }}\n{rules}"
    ))
    .unwrap()
}

#[derive(Default)]
struct Log {
    reactions: Vec<Reaction>,
    frames: Vec<Frame>,
}

impl Observer for Log {
    fn reaction(&mut self, r: &Reaction) {
        self.reactions.push(r.clone());
    }
    fn frame(&mut self, f: &Frame) {
        self.frames.push(f.clone());
    }
}

fn count(e: &Engine, cell: u64, name: &str) -> u64 {
    e.populations(cell)
        .get(&Sequence::parse_dotted(name))
        .copied()
        .unwrap_or(0)
}

#[test]
fn no_rules_is_quiescent_at_zero() {
    let m = model("loop(m @(0,0,0; 0.5))[A]", "");
    let mut e = Engine::new(&m, 1).unwrap();
    let mut log = Log::default();
    assert_eq!(e.run(100.0, &mut log).unwrap(), Termination::Quiescent);
    assert_eq!(e.t(), 0.0);
    assert!(log.reactions.is_empty());
    assert_eq!(log.frames.len(), 1);
}

#[test]
fn identical_cells_have_equal_columns() {
    let rules = "molecular { S1: A | B -> C rate 0.5; }";
    let one = model("loop(m @(0,0,0; 0.5))[A^3 | B^2]", rules);
    let two = model(
        "loop(m @(0,0,0; 0.5))[A^3 | B^2] | loop(m @(2,0,0; 0.5))[A^3 | B^2]",
        rules,
    );
    let e1 = Engine::new(&one, 1).unwrap();
    let e2 = Engine::new(&two, 1).unwrap();
    assert_eq!(e1.table().row_sum(0), 0.5 * 6.0);
    assert_eq!(e2.table().row_sum(0), 2.0 * e1.table().row_sum(0));
    assert_eq!(e2.table().get(0, 1), e2.table().get(0, 2));
}

#[test]
fn t_max_stops_before_the_next_event() {
    let m = model("loop(m @(0,0,0; 0.5))[A^5]", "molecular { S1: A -> B rate 0.001; }");
    let mut e = Engine::new(&m, 4).unwrap();
    let mut log = Log::default();
    assert_eq!(e.run(1e-6, &mut log).unwrap(), Termination::TMax);
    assert_eq!(e.t(), 1e-6);
    assert!(log.reactions.is_empty());
}

const DIVIDE: &str = "visual {
  D: loop(m | $B @p)[go | $X]
   -> loop(m | half1($B) @(p; 0.5))[half1($X)]
    | loop(m | half2($B) @(getpos(p); 0.5))[half2($X)]
   rate 1;
}";

#[test]
fn division_replaces_the_mother() {
    let m = model("loop(m | R^6 @(0,0,0; 0.5))[A^9 | go]", DIVIDE);
    for seed in 0..20 {
        let mut e = Engine::new(&m, seed).unwrap();
        let mut log = Log::default();
        assert_eq!(e.run(1e9, &mut log).unwrap(), Termination::Quiescent);
        let [r] = &log.reactions[..] else { panic!("{:?}", log.reactions) };
        assert_eq!(r.died, vec![1]);
        assert_eq!(r.born.len(), 2);
        assert!(e.cell(1).is_none());
        let (mut a, mut brane) = (0, 0);
        for id in &r.born {
            let c = e.cell(*id).unwrap();
            assert_eq!(c.parent, Some(1));
            assert_eq!(c.born, r.t);
            a += count(&e, *id, "A");
            brane += c.compartment().brane.iter().filter(|(b, _)| b.seq.to_string() == "R").map(|(_, n)| n).sum::<u64>();
        }
        assert_eq!((a, brane), (9, 6));
        let centers: Vec<_> = r.born.iter().map(|id| e.view(e.cell(*id).unwrap()).center).collect();
        assert_ne!(centers[0], centers[1]);
    }
}

#[test]
fn same_seed_same_run() {
    let m = model(
        "loop(m @(0,0,0; 0.5))[A^20 | B^20]",
        "molecular { S1: A | B -> C rate 0.3; S2: C -> A | B rate 0.2; }",
    );
    let go = |seed| {
        let mut e = Engine::new(&m, seed).unwrap();
        let mut log = Log::default();
        e.run(50.0, &mut log).unwrap();
        log.reactions
    };
    assert_eq!(go(7), go(7));
    assert_ne!(go(7), go(8));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn table_stays_exact_and_mass_is_kept(seed in any::<u64>(), a in 0u64..30, b in 0u64..30) {
        let m = model(
            &format!("E^4 | loop(m | R^3 @(0,0,0; 0.5))[A^{a} | B^{b}]"),
            "molecular {
               S1: A | B -> C rate 0.3;
               S2: C -> A | B rate 0.2;
               S3: E | loop(m | R | $B @p)[$X] -> loop(m | R | $B @p)[$X | E] rate 0.1;
             }",
        );
        let mut e = Engine::new(&m, seed).unwrap();
        for _ in 0..200 {
            if e.step(1e9, &mut ()).unwrap().is_some() {
                break;
            }
            prop_assert_eq!(e.check_propensities(), Ok(()));
            prop_assert_eq!(count(&e, 1, "A") + count(&e, 1, "C"), a);
            prop_assert_eq!(count(&e, 1, "B") + count(&e, 1, "C"), b);
            prop_assert_eq!(count(&e, 1, "E") + count(&e, 0, "E"), 4);
        }
    }
}

/// Every nucleus holds both chromosomes, either plain (`cr`) or
/// duplicated (`2cr`, only while the cell has a single nucleus).
#[test]
fn yeast_keeps_its_genes() {
    let mut cfg = YeastConfig::default();
    for (k, v) in [("mc", "0"), ("s", "0.01"), ("R", "4")] {
        cfg.set(k, v).unwrap();
    }
    let m = cfg.build().unwrap();
    let genes = ["gN2.gB5", "gB2.gC20"];
    let seq = |prefix: &str, g: &str| Sequence::parse_dotted(&format!("{prefix}.{g}"));
    let mut e = Engine::new(&m, 3).unwrap();
    let mut divisions = 0;
    loop {
        let mut log = Log::default();
        let end = e.step(600.0, &mut log).unwrap();
        divisions += log.reactions.iter().filter(|r| !r.died.is_empty()).count();
        for c in e.cells() {
            let nuclei: Vec<_> = c
                .compartment()
                .content
                .layer()
                .iter()
                .filter_map(|(el, n)| match el {
                    Element::Comp(k) => Some((k, n)),
                    _ => None,
                })
                .collect();
            let total: u64 = nuclei.iter().map(|(_, n)| *n).sum();
            assert!(total == 1 || total == 2, "cell {} has {total} nuclei", c.id);
            for (k, _) in nuclei {
                let plain = genes.map(|g| k.content.molecule_count(&seq("cr", g)));
                let doubled = genes.map(|g| k.content.molecule_count(&seq("2cr", g)));
                let ok = (plain == [1, 1] && doubled == [0, 0])
                    || (total == 1 && plain == [0, 0] && doubled == [1, 1]);
                assert!(ok, "cell {} at t={}: {:?}", c.id, e.t(), k.content);
                assert_eq!(k.content.layer().len(), 2);
            }
        }
        if end.is_some() {
            break;
        }
    }
    assert!(divisions >= 3, "{divisions} divisions");
}
