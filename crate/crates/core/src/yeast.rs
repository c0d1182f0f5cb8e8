//! The budding-yeast cell cycle: four visual stages, the molecular network
//! behind them, the checkpoints linking the two, and an optional virus.
//!
//! Cells carry `m` on their membrane and a nucleus with membrane `n` holding
//! two chromosomes `cr.gN2.gB5` and `cr.gB2.gC20`. Positions of nuclei are
//! relative to their cell.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::model::{Conventions, Geometry, Model, ModelError};
use crate::multiset::Multiset;
use crate::pattern::{
    BraneRef, Half, LeftItem, LeftPattern, PosFn, RightBrane, RightItem, RightPattern, SeqItem,
    SeqPattern, Var,
};
use crate::rewrite::{Attr, CmpOp, Condition, Level, Precondition, Rate, RewriteRule};
use crate::term::{BraneElement, Compartment, Element, Sequence, Spatial, Term};

/// Rate categories, per minute before scaling by `s`.
pub const VERYFAST: f64 = 20.0;
pub const FAST: f64 = 5.0;
pub const SLOW: f64 = 1.0;
pub const VERYSLOW: f64 = 0.25;

/// Mean durations of the four visual stages, in minutes.
/// Free viruses and host resource per cell when `virus` is switched on.
pub const VIRUS_ENV: u64 = 4;
pub const HOST_RES: u64 = 200;

pub const STAGE_MINUTES: [f64; 4] = [40.0, 30.0, 25.0, 5.0];

/// Molecules whose thresholds gate T1..T4.
pub const CHECKPOINTS: [&str; 4] = ["Cln2", "Clb5", "APC-Cdc20", "Sic1"];

/// Everything the model is built from.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct YeastConfig {
    /// Cell radius after growth.
    pub r: f64,
    /// Radius of the bounding sphere.
    pub sphere_radius: f64,
    pub dim: usize,
    /// Scale factor of molecular rates.
    pub s: f64,
    /// Checkpoint thresholds of T1..T4 (`mc1`..`mc4`).
    pub thresholds: [u64; 4],
    pub virus_threshold: u64,
    /// Molecules in the initial cell's content.
    pub cell: BTreeMap<String, u64>,
    /// Molecules on the initial cell's membrane besides `m`.
    pub membrane: BTreeMap<String, u64>,
    /// Free molecules in the environment.
    pub env: BTreeMap<String, u64>,
    pub virus: bool,
    /// Scale factor of virus rates. Kept well below `s` so that infection
    /// takes minutes and can start in any stage.
    pub virus_s: f64,
    pub seed: u64,
}

impl Default for YeastConfig {
    fn default() -> Self {
        let map = |kv: &[(&str, u64)]| kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        YeastConfig {
            r: 1.0,
            sphere_radius: 10.0,
            dim: 3,
            s: 1000.0,
            thresholds: [1; 4],
            virus_threshold: 5,
            cell: map(&[
                ("APC", 32),
                ("APC-Cdc20", 16),
                ("Cdc14", 4),
                ("Cdc20", 16),
                ("Cdh1", 0),
                ("Net1", 32),
                ("SCF", 16),
                ("Sic1", 20),
                ("iCdc15", 4),
                ("iMBF", 16),
                ("iMcm1", 8),
                ("iSBF", 64),
            ]),
            membrane: map(&[("GFR", 20)]),
            env: map(&[("GF", 40)]),
            virus: false,
            virus_s: 0.01,
            seed: 1,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, ModelError> {
    v.trim().parse().map_err(|_| ModelError::BadParam {
        name: key.into(),
        reason: format!("cannot parse `{v}`"),
    })
}

impl YeastConfig {
    /// Applies one `key=value` override. Keys: `r`, `R`, `dim`, `s`,
    /// `seed`, `virusTH`, `virus` (true/false), `virus_s`, `mc` (all
    /// thresholds), `mc1`..`mc4`, `cell.<molecule>`, `membrane.<molecule>`,
    /// `env.<molecule>`. A `-` in a molecule name is written `_` in the
    /// key, as in `cell.APC_Cdc20`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        let positive = |x: f64| {
            if x > 0.0 && x.is_finite() {
                Ok(x)
            } else {
                Err(ModelError::BadParam {
                    name: key.into(),
                    reason: format!("must be positive, got {x}"),
                })
            }
        };
        match key {
            "r" => self.r = positive(parse_num(key, value)?)?,
            "R" => self.sphere_radius = positive(parse_num(key, value)?)?,
            "dim" => self.dim = parse_num(key, value)?,
            "s" => self.s = positive(parse_num(key, value)?)?,
            "virus_s" => self.virus_s = positive(parse_num(key, value)?)?,
            "virusTH" => {
                self.virus_threshold = parse_num(key, value)?;
                if self.virus_threshold == 0 {
                    return Err(ModelError::BadParam {
                        name: key.into(),
                        reason: "must be at least 1".into(),
                    });
                }
            }
            "seed" => self.seed = parse_num(key, value)?,
            "virus" => {
                self.virus = parse_num(key, value)?;
                if self.virus {
                    self.env.entry("virus".into()).or_insert(VIRUS_ENV);
                    self.cell.entry("hostRes".into()).or_insert(HOST_RES);
                }
            }
            "mc" => self.thresholds = [parse_num(key, value)?; 4],
            "mc1" | "mc2" | "mc3" | "mc4" => {
                let i = key.as_bytes()[2] - b'1';
                self.thresholds[i as usize] = parse_num(key, value)?;
            }
            _ => {
                let (group, mol) = key
                    .split_once('.')
                    .ok_or_else(|| ModelError::UnknownParam(key.into()))?;
                let n: u64 = parse_num(key, value)?;
                let map = match group {
                    "cell" => &mut self.cell,
                    "membrane" => &mut self.membrane,
                    "env" => &mut self.env,
                    _ => return Err(ModelError::UnknownParam(key.into())),
                };
                map.insert(mol.replace('_', "-"), n);
            }
        }
        Ok(())
    }

    /// Parameters as named in model files; [`YeastConfig::set`] accepts
    /// the same keys.
    pub fn params(&self) -> BTreeMap<String, f64> {
        let mut p = BTreeMap::new();
        p.insert("r".into(), self.r);
        p.insert("R".into(), self.sphere_radius);
        p.insert("s".into(), self.s);
        p.insert("virusTH".into(), self.virus_threshold as f64);
        for (i, v) in self.thresholds.iter().enumerate() {
            p.insert(format!("mc{}", i + 1), *v as f64);
        }
        for (group, map) in [("cell", &self.cell), ("membrane", &self.membrane), ("env", &self.env)] {
            for (k, v) in map {
                if group != "env" || k != "virus" || self.virus {
                    p.insert(format!("{group}.{}", k.replace('-', "_")), *v as f64);
                }
            }
        }
        if self.virus {
            p.insert("virus_s".into(), self.virus_s);
        }
        p
    }

    /// The rate of a rule as written in the model file: a category times
    /// its scale factor, or one over a stage duration.
    fn rate_text(&self, rule: &RewriteRule) -> Option<String> {
        let k = rule.rate.finite()?;
        if rule.level == Level::Visual {
            return STAGE_MINUTES
                .iter()
                .find(|d| 1.0 / **d == k)
                .map(|d| format!("1/{d}"));
        }
        let (scale, name) = if rule.id.starts_with('V') {
            (self.virus_s, "virus_s")
        } else {
            (self.s, "s")
        };
        [("veryfast", VERYFAST), ("fast", FAST), ("slow", SLOW), ("veryslow", VERYSLOW)]
            .iter()
            .find(|(_, c)| c * scale == k)
            .map(|(cat, _)| format!("{cat}*{name}"))
    }

    pub fn geometry(&self) -> Geometry {
        Geometry {
            dim: self.dim,
            sphere_radius: self.sphere_radius,
            cube_size: 2.0 * self.r,
            max_object_radius: self.r,
        }
    }

    /// One cell at the centre with radius 3r/4, its nucleus at the cell's
    /// centre, stage 1, plus the free environment.
    pub fn initial_term(&self) -> Term {
        let r = self.r;
        let unplaced = |name: &str| Element::Seq(Sequence::parse_dotted(name), Spatial::UNPLACED);
        let chromosomes = [
            (unplaced("cr.gN2.gB5"), 1),
            (unplaced("cr.gB2.gC20"), 1),
        ];
        let nucleus = Element::Comp(Box::new(Compartment {
            brane: Multiset::singleton(BraneElement::unplaced(Sequence::parse_dotted("n"))),
            spatial: Spatial::at([0.0; 3], 0.4 * r),
            content: Term(chromosomes.into_iter().collect()),
        }));
        let mut brane: Multiset<BraneElement> =
            Multiset::singleton(BraneElement::unplaced(Sequence::parse_dotted("m")));
        for (k, n) in &self.membrane {
            if *n > 0 {
                brane.insert(BraneElement::unplaced(Sequence::parse_dotted(k)), *n);
            }
        }
        let mut content: Multiset<Element> = Multiset::new();
        content.insert(nucleus, 1);
        content.insert(unplaced("stage1"), 1);
        for (k, n) in &self.cell {
            if *n > 0 {
                content.insert(unplaced(k), *n);
            }
        }
        let cell = Element::Comp(Box::new(Compartment {
            brane,
            spatial: Spatial::at([0.0; 3], 0.75 * r),
            content: Term(content),
        }));
        let mut world: Multiset<Element> = Multiset::new();
        world.insert(cell, 1);
        for (k, n) in &self.env {
            if *n > 0 && (self.virus || k != "virus") {
                world.insert(unplaced(k), *n);
            }
        }
        Term(world)
    }

    pub fn build(&self) -> Result<Model, ModelError> {
        let mut rules = visual_rules(self.r);
        rules.extend(molecular_rules(self.s));
        rules.extend(vertical_rules(self));
        if self.virus {
            rules.extend(virus_rules(self.virus_s));
        }
        let model = Model {
            name: "yeast".into(),
            params: self.params(),
            geometry: self.geometry(),
            conventions: Conventions {
                virus_threshold: self.virus_threshold,
                ..Conventions::default()
            },
            initial: self.initial_term(),
            rules: rules.into_iter().collect::<Result<_, _>>()?,
            rate_text: BTreeMap::new(),
            seed: self.seed,
        };
        let mut model = model;
        model.rate_text = model
            .rules
            .iter()
            .filter_map(|r| Some((r.id.clone(), self.rate_text(r)?)))
            .collect();
        model.validate()?;
        Ok(model)
    }
}

// Builders. Molecule names are dotted sequences; `~x` in a sequence
// pattern is a sequence variable.

fn var(v: &str) -> Var {
    Var::from(v)
}

fn seqp(text: &str) -> SeqPattern {
    SeqPattern(
        text.split('.')
            .map(|s| match s.strip_prefix('~') {
                Some(v) => SeqItem::SeqVar(var(v)),
                None => SeqItem::Sym(crate::term::Symbol::new(s)),
            })
            .collect(),
    )
}

fn l(text: &str, n: u64) -> (LeftItem, u64) {
    (
        LeftItem::Seq {
            seq: seqp(text),
            pos: None,
        },
        n,
    )
}

fn lp(items: Vec<(LeftItem, u64)>, rest: Option<&str>) -> LeftPattern {
    LeftPattern::new(items, rest.map(var))
}

/// A compartment item with a position binder.
fn lcomp(brane: LeftPattern, pos: &str, content: LeftPattern) -> (LeftItem, u64) {
    (
        LeftItem::Comp {
            brane,
            pos: Some(var(pos)),
            content,
        },
        1,
    )
}

/// A cell: membrane `m` plus brane rest `B`, bound at `p`.
fn lcell(extra_brane: &[&str], content: LeftPattern) -> (LeftItem, u64) {
    let mut b: Vec<_> = vec![l("m", 1)];
    b.extend(extra_brane.iter().map(|s| l(s, 1)));
    lcomp(lp(b, Some("B")), "p", content)
}

/// A nucleus with exactly `n` on its membrane.
fn lnucleus(pos: &str, content: LeftPattern) -> (LeftItem, u64) {
    lcomp(lp(vec![l("n", 1)], None), pos, content)
}

fn rm(text: &str, n: u64) -> (RightItem, u64) {
    (
        RightItem::Seq {
            seq: seqp(text),
            pos: PosFn::NONE,
        },
        n,
    )
}

fn rvar(v: &str) -> (RightItem, u64) {
    (RightItem::Var(var(v)), 1)
}

fn rhalf(v: &str, h: Half) -> (RightItem, u64) {
    (RightItem::Half(var(v), h), 1)
}

fn rp(items: Vec<(RightItem, u64)>) -> RightPattern {
    RightPattern { items }
}

fn rcomp(brane: RightBrane, pos: PosFn, content: RightPattern) -> (RightItem, u64) {
    (
        RightItem::Comp {
            brane,
            pos,
            content,
        },
        1,
    )
}

fn rbrane(items: &[&str], vars: Vec<BraneRef>) -> RightBrane {
    RightBrane {
        items: items.iter().map(|s| (seqp(s), PosFn::NONE, 1)).collect(),
        vars,
    }
}

/// A cell keeping its position and brane rest `B`.
fn rcell(extra_brane: &[&str], content: RightPattern) -> (RightItem, u64) {
    let mut b = vec!["m"];
    b.extend_from_slice(extra_brane);
    rcomp(
        rbrane(&b, vec![BraneRef::Var(var("B"))]),
        keep("p", None),
        content,
    )
}

fn rnucleus(pos: PosFn, content: RightPattern) -> (RightItem, u64) {
    rcomp(rbrane(&["n"], vec![]), pos, content)
}

fn keep(v: &str, radius: Option<f64>) -> PosFn {
    PosFn::Keep {
        var: var(v),
        offset: None,
        radius,
    }
}

fn radius_is(v: &str, radius: f64) -> Condition {
    Condition {
        var: var(v),
        attr: Attr::Radius,
        op: CmpOp::Eq,
        value: radius,
    }
}

fn rule(
    id: &str,
    level: Level,
    pre: Vec<Condition>,
    lhs: LeftPattern,
    rhs: RightPattern,
    rate: Rate,
) -> Result<RewriteRule, ModelError> {
    Ok(RewriteRule::new(
        id,
        level,
        false,
        Precondition(pre),
        lhs,
        rhs,
        rate,
    )?)
}

/// R1..R4. Every cell pattern carries a brane rest and a content rest so
/// that the rules apply to cells with molecules in them. The radius
/// conditions keep each rule from firing twice in one stage.
fn visual_rules(r: f64) -> Vec<Result<RewriteRule, ModelError>> {
    let small = 0.75 * r;
    let nucleus_r = 0.4 * r;
    let rate = |stage: usize| Rate::Finite(1.0 / STAGE_MINUTES[stage]);
    let chromos = |prefix: &str| {
        vec![
            l(&format!("{prefix}.~x"), 1),
            l(&format!("{prefix}.~y"), 1),
        ]
    };
    let rchromos = |prefix: &str| {
        vec![
            rm(&format!("{prefix}.~x"), 1),
            rm(&format!("{prefix}.~y"), 1),
        ]
    };
    let r1 = rule(
        "R1",
        Level::Visual,
        vec![radius_is("p", small)],
        lp(vec![lcell(&[], lp(vec![l("stage1", 1)], Some("X")))], None),
        rp(vec![rcomp(
            rbrane(&["m"], vec![BraneRef::Var(var("B"))]),
            keep("p", Some(r)),
            rp(vec![rvar("X"), rm("stage1", 1), rm("visualised1", 1)]),
        )]),
        rate(0),
    );
    let r2 = rule(
        "R2",
        Level::Visual,
        vec![radius_is("p", r)],
        lp(
            vec![lcell(
                &[],
                lp(
                    vec![lnucleus("u", lp(chromos("cr"), None)), l("stage2", 1)],
                    Some("X"),
                ),
            )],
            None,
        ),
        rp(vec![rcell(
            &[],
            rp(vec![
                rnucleus(keep("u", None), rp(rchromos("2cr"))),
                rvar("X"),
                rm("stage2", 1),
                rm("visualised2", 1),
            ]),
        )]),
        rate(1),
    );
    let at = |x: f64| PosFn::At {
        center: [x, 0.0, 0.0],
        radius: nucleus_r,
    };
    let r3 = rule(
        "R3",
        Level::Visual,
        vec![
            Condition {
                var: var("u"),
                attr: Attr::X,
                op: CmpOp::Eq,
                value: 0.0,
            },
            radius_is("u", nucleus_r),
        ],
        lp(
            vec![lnucleus("u", lp(chromos("2cr"), None)), l("stage3", 1)],
            None,
        ),
        rp(vec![
            rnucleus(at(-0.5 * r), rp(rchromos("cr"))),
            rnucleus(at(0.5 * r), rp(rchromos("cr"))),
            rm("stage3", 1),
            rm("visualised3", 1),
        ]),
        rate(2),
    );
    // Each daughter takes one nucleus, recentred, and a random half of the
    // membrane and of every other molecule.
    let daughter = |pos: PosFn, nucleus: &str, h: Half| {
        rcomp(
            rbrane(&["m"], vec![BraneRef::Half(var("B"), h)]),
            pos,
            rp(vec![
                rnucleus(at(0.0), rp(vec![rvar(nucleus)])),
                rhalf("Z", h),
                rm("stage4", 1),
                rm("visualised4", 1),
            ]),
        )
    };
    let r4 = rule(
        "R4",
        Level::Visual,
        vec![radius_is("p", r)],
        lp(
            vec![lcell(
                &[],
                lp(
                    vec![
                        lnucleus("u", lp(vec![], Some("X"))),
                        lnucleus("v", lp(vec![], Some("Y"))),
                        l("stage4", 1),
                    ],
                    Some("Z"),
                ),
            )],
            None,
        ),
        rp(vec![
            daughter(keep("p", Some(small)), "X", Half::First),
            daughter(
                PosFn::GetPos {
                    var: var("p"),
                    radius: small,
                },
                "Y",
                Half::Second,
            ),
        ]),
        rate(3),
    );
    vec![r1, r2, r3, r4]
}

/// S1..S28.
fn molecular_rules(s: f64) -> Vec<Result<RewriteRule, ModelError>> {
    let k = |c: f64| Rate::Finite(c * s);
    let flat = |id: &str, lhs: &[&str], rhs: &[&str], c: f64| {
        rule(
            id,
            Level::Molecular,
            vec![],
            lp(lhs.iter().map(|m| l(m, 1)).collect(), None),
            rp(rhs.iter().map(|m| rm(m, 1)).collect()),
            k(c),
        )
    };
    // `catalyst | (n)⌋(~y.gene.~x | Y) → ...` keeping the nucleus as is
    let gene = |id: &str, lhs: &[&str], g: &str, rhs: &[&str], c: f64| {
        let chrom = format!("~y.{g}.~x");
        let mut left: Vec<_> = lhs.iter().map(|m| l(m, 1)).collect();
        left.push(lnucleus("u", lp(vec![l(&chrom, 1)], Some("Y"))));
        let mut right: Vec<_> = rhs.iter().map(|m| rm(m, 1)).collect();
        right.push(rnucleus(
            keep("u", None),
            rp(vec![rm(&chrom, 1), rvar("Y")]),
        ));
        rule(id, Level::Molecular, vec![], lp(left, None), rp(right), k(c))
    };
    let s1 = rule(
        "S1",
        Level::Molecular,
        vec![],
        lp(vec![l("GF", 1), lcell(&["GFR"], lp(vec![], Some("X")))], None),
        rp(vec![rcell(&["iGFR"], rp(vec![rvar("X"), rm("Cln3", 1)]))]),
        k(VERYFAST),
    );
    vec![
        s1,
        flat("S2", &["Cln3", "iSBF", "iMBF"], &["Cln3", "SBF", "MBF"], SLOW),
        gene("S3", &["SBF"], "gN2", &["SBF", "Cln2"], VERYSLOW),
        gene("S4", &["MBF"], "gB5", &["MBF", "Clb5"], VERYSLOW),
        flat("S5", &["Sic1", "Clb5"], &["Sic1-Clb5"], FAST),
        flat("S6", &["Net1", "Cdc14"], &["Net1-Cdc14"], FAST),
        flat("S7", &["pSic1", "Cdc14"], &["Sic1", "Cdc14"], VERYFAST),
        flat("S8", &["Sic1", "Clb2"], &["Sic1-Clb2"], FAST),
        flat("S9", &["Cln2", "Sic1-Clb5"], &["pSic1", "Clb5", "Cln2"], FAST),
        flat("S10", &["pSic1", "SCF"], &["SCF"], SLOW),
        flat("S11", &["Cln2", "SCF"], &["SCF"], SLOW),
        flat("S12", &["Cln2", "Cdh1"], &["Cln2", "iCdh1"], VERYFAST),
        flat("S13", &["Clb5", "Cdh1"], &["iCdh1", "Clb5"], VERYFAST),
        flat("S14", &["Clb5", "iMcm1"], &["Mcm1", "Clb5"], VERYSLOW),
        gene("S15", &["Mcm1"], "gB2", &["iMcm1", "Clb2"], SLOW),
        flat("S16", &["Clb2", "iMcm1"], &["Mcm1", "Clb2"], VERYFAST),
        flat("S17", &["Clb2", "MBF"], &["iMBF", "Clb2"], SLOW),
        flat("S18", &["Clb2", "SBF"], &["iSBF", "Clb2"], SLOW),
        gene("S19", &["Mcm1"], "gC20", &["iMcm1", "Cdc20"], VERYFAST),
        flat("S20", &["Clb2", "APC"], &["APC-P", "Clb2"], VERYFAST),
        flat("S21", &["APC-P", "Cdc20"], &["APC-Cdc20"], SLOW),
        flat("S22", &["SPN", "iCdc15"], &["SPN", "Cdc15"], VERYFAST),
        flat("S23", &["Cdc15", "Net1-Cdc14"], &["Cdc15", "Net1", "Cdc14"], VERYSLOW),
        flat("S24", &["APC-Cdc20", "Clb5"], &["APC"], SLOW),
        flat("S25", &["Cdc14", "iCdh1"], &["Cdc14", "Cdh1"], VERYSLOW),
        flat("S26", &["Cdc14"], &["Cdc14", "Sic1"], FAST),
        flat("S27", &["APC-Cdc20", "Clb2"], &["APC"], SLOW),
        flat("S28", &["APC", "Cdh1", "Clb2"], &["APC", "Cdh1"], VERYSLOW),
    ]
}

/// T1..T4: once a stage has been shown and its checkpoint molecule has
/// reached the threshold, move to the next stage.
fn vertical_rules(cfg: &YeastConfig) -> Vec<Result<RewriteRule, ModelError>> {
    let t = |i: usize, extra_l: Option<&str>, extra_r: Option<&str>| {
        let stage = format!("stage{}", i + 1);
        let next = format!("stage{}", (i + 1) % 4 + 1);
        let mol = CHECKPOINTS[i];
        let n = cfg.thresholds[i];
        let mut lhs = vec![
            l(&format!("visualised{}", i + 1), 1),
            l(mol, n),
            l(&stage, 1),
        ];
        lhs.extend(extra_l.map(|m| l(m, 1)));
        let mut rhs = vec![rm(mol, n), rm(&next, 1)];
        rhs.extend(extra_r.map(|m| rm(m, 1)));
        rhs.retain(|(_, n)| *n > 0);
        rule(
            &format!("T{}", i + 1),
            Level::Vertical,
            vec![],
            lp(lhs, None),
            rp(rhs),
            Rate::Infinite,
        )
    };
    vec![
        t(0, None, None),
        t(1, None, Some("SPN")),
        t(2, Some("SPN"), None),
        t(3, None, None),
    ]
}

/// Infection: viruses enter through the membrane, replicate on a host
/// resource, make a protein that destroys the growth factor receptor
/// (free or bound), and leave again.
fn virus_rules(vs: f64) -> Vec<Result<RewriteRule, ModelError>> {
    let k = |c: f64| Rate::Finite(c * vs);
    let any = || lp(vec![], Some("X"));
    let flat = |id: &str, lhs: &[&str], rhs: &[&str], c: f64| {
        rule(
            id,
            Level::Molecular,
            vec![],
            lp(lhs.iter().map(|m| l(m, 1)).collect(), None),
            rp(rhs.iter().map(|m| rm(m, 1)).collect()),
            k(c),
        )
    };
    let receptor = |id: &str, gfr: &str| {
        rule(
            id,
            Level::Molecular,
            vec![],
            lp(vec![lcell(&[gfr], lp(vec![l("VP", 1)], Some("X")))], None),
            rp(vec![rcell(&[], rp(vec![rm("VP", 1), rvar("X")]))]),
            k(FAST),
        )
    };
    vec![
        rule(
            "V1",
            Level::Molecular,
            vec![],
            lp(vec![l("virus", 1), lcell(&[], any())], None),
            rp(vec![rcell(&[], rp(vec![rvar("X"), rm("virus", 1)]))]),
            k(SLOW),
        ),
        flat("V2", &["virus", "hostRes"], &["virus", "virus"], FAST),
        flat("V3", &["virus", "hostRes"], &["virus", "VP"], SLOW),
        receptor("V4", "GFR"),
        receptor("V5", "iGFR"),
        rule(
            "V6",
            Level::Molecular,
            vec![],
            lp(vec![lcell(&[], lp(vec![l("virus", 1)], Some("X")))], None),
            rp(vec![rm("virus", 1), rcell(&[], rp(vec![rvar("X")]))]),
            k(SLOW),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_model_has_expected_rule_counts() {
        let m = YeastConfig::default().build().unwrap();
        assert_eq!(m.level_counts(), [4, 28, 4]);
        let mut cfg = YeastConfig::default();
        cfg.set("virus", "true").unwrap();
        assert_eq!(cfg.build().unwrap().level_counts(), [4, 34, 4]);
    }

    #[test]
    fn overrides() {
        let mut cfg = YeastConfig::default();
        cfg.set("mc", "3").unwrap();
        cfg.set("mc4", "7").unwrap();
        cfg.set("cell.SCF", "2").unwrap();
        assert_eq!(cfg.thresholds, [3, 3, 3, 7]);
        assert_eq!(cfg.cell["SCF"], 2);
        assert!(cfg.set("mc5", "1").is_err());
        assert!(cfg.set("s", "-1").is_err());
        assert!(cfg.set("bogus", "1").is_err());
    }

    #[test]
    fn molecular_rates_are_a_category_times_s() {
        let cats = [VERYFAST, FAST, SLOW, VERYSLOW];
        let mut cfg = YeastConfig::default();
        cfg.set("virus", "true").unwrap();
        let fast = cfg.build().unwrap();
        cfg.set("s", "10").unwrap();
        cfg.set("virus_s", "2").unwrap();
        let slow = cfg.build().unwrap();
        for (a, b) in fast.rules.iter().zip(&slow.rules) {
            let (ka, kb) = (a.rate.finite(), b.rate.finite());
            match a.level {
                Level::Molecular => {
                    let (sa, sb) = if a.id.starts_with('V') { (0.01, 2.0) } else { (1000.0, 10.0) };
                    let (ka, kb) = (ka.unwrap(), kb.unwrap());
                    assert!(cats.iter().any(|c| c * sa == ka), "{} {ka}", a.id);
                    assert!(cats.iter().any(|c| c * sb == kb && c * sa == ka), "{}", a.id);
                }
                Level::Visual => assert_eq!(ka, kb),
                Level::Vertical => assert_eq!((ka, kb), (None, None)),
            }
        }
    }

    #[test]
    fn initial_cell_is_in_stage_one() {
        let t = YeastConfig::default().initial_term();
        assert_eq!(t.molecule_count(&Sequence::parse_dotted("GF")), 40);
        let cell = t.layer().iter().find_map(|(e, _)| e.as_compartment()).unwrap();
        assert_eq!(cell.spatial.radius, 0.75);
        assert_eq!(
            cell.content.molecule_count(&Sequence::parse_dotted("stage1")),
            1
        );
    }
}
