use std::collections::BTreeMap;
use std::fmt::Write;

use crate::model::Model;
use crate::pattern::{
    BraneRef, Half, LeftItem, LeftPattern, PosFn, RightBrane, RightItem, RightPattern, SeqItem,
    SeqPattern,
};
use crate::rewrite::{Condition, Rate, RewriteRule};
use crate::term::{Compartment, Element, Sequence, Spatial, Symbol, Term};

use super::parse::{eval, is_keyword};

pub(crate) fn num(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{}", x + 0.0)
}

fn plain(s: &str) -> bool {
    let ok_char = |c: char| c.is_alphanumeric() || c == '_' || c == '\'';
    let chars: Vec<char> = s.chars().collect();
    !chars.is_empty()
        && !is_keyword(s)
        && chars.iter().enumerate().all(|(i, &c)| {
            ok_char(c)
                || (c == '-'
                    && i > 0
                    && ok_char(chars[i - 1])
                    && chars.get(i + 1).copied().is_some_and(ok_char))
        })
}

pub(crate) fn symbol(s: &Symbol) -> String {
    let s = s.as_str();
    if plain(s) {
        return s.to_string();
    }
    let mut out = String::from("\"");
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

pub(crate) fn sequence(s: &Sequence) -> String {
    if s.is_epsilon() {
        return "eps".into();
    }
    s.0.iter().map(symbol).collect::<Vec<_>>().join(".")
}

pub(crate) fn spatial(d: &Spatial) -> String {
    match d.center() {
        None => format!("@(.; {})", num(d.radius)),
        Some([x, y, z]) => format!("@({},{},{}; {})", num(x), num(y), num(z), num(d.radius)),
    }
}

fn count(out: &mut String, n: u64) {
    if n != 1 {
        let _ = write!(out, "^{n}");
    }
}

fn element(out: &mut String, e: &Element) {
    match e {
        Element::Seq(s, d) => {
            out.push_str(&sequence(s));
            if *d != Spatial::UNPLACED {
                out.push(' ');
                out.push_str(&spatial(d));
            }
        }
        Element::Comp(c) => compartment(out, c),
    }
}

fn compartment(out: &mut String, c: &Compartment) {
    out.push_str("loop(");
    if c.brane.is_empty() {
        out.push_str("empty");
    }
    let mut last_placed = false;
    for (i, (b, n)) in c.brane.iter().enumerate() {
        if i > 0 {
            out.push_str(" | ");
        }
        out.push_str(&sequence(&b.seq));
        last_placed = b.spatial != Spatial::UNPLACED && n == 1;
        if b.spatial != Spatial::UNPLACED {
            out.push(' ');
            out.push_str(&spatial(&b.spatial));
        }
        count(out, n);
    }
    // a placed last element would otherwise read as the compartment's own
    if c.spatial != Spatial::UNPLACED || last_placed {
        out.push(' ');
        out.push_str(&spatial(&c.spatial));
    }
    out.push_str(")[");
    term_into(out, &c.content, " | ");
    out.push(']');
}

fn term_into(out: &mut String, t: &Term, sep: &str) {
    if t.is_empty() {
        out.push_str("empty");
    }
    for (i, (e, n)) in t.0.iter().enumerate() {
        if i > 0 {
            out.push_str(sep);
        }
        element(out, e);
        count(out, n);
    }
}

pub fn term(t: &Term) -> String {
    let mut out = String::new();
    term_into(&mut out, t, " | ");
    out
}

fn seq_pattern(s: &SeqPattern) -> String {
    if s.0.is_empty() {
        return "eps".into();
    }
    s.0.iter()
        .map(|i| match i {
            SeqItem::Sym(s) => symbol(s),
            SeqItem::SymVar(v) => format!("?{v}"),
            SeqItem::SeqVar(v) => format!("~{v}"),
        })
        .collect::<Vec<_>>()
        .join(".")
}

fn left(out: &mut String, p: &LeftPattern) {
    if p.items.is_empty() && p.rest.is_none() {
        out.push_str("empty");
        return;
    }
    let mut first = true;
    for (item, n) in &p.items {
        if !first {
            out.push_str(" | ");
        }
        first = false;
        match item {
            LeftItem::Seq { seq, pos } => {
                out.push_str(&seq_pattern(seq));
                if let Some(v) = pos {
                    let _ = write!(out, " @{v}");
                }
            }
            LeftItem::Comp {
                brane,
                pos,
                content,
            } => {
                out.push_str("loop(");
                left_brane(out, brane, pos.as_deref());
                out.push_str(")[");
                left(out, content);
                out.push(']');
            }
        }
        count(out, *n);
    }
    if let Some(x) = &p.rest {
        if !first {
            out.push_str(" | ");
        }
        let _ = write!(out, "${x}");
    }
}

fn left_brane(out: &mut String, b: &LeftPattern, pos: Option<&str>) {
    if b.items.is_empty() && b.rest.is_none() {
        out.push_str("empty");
    }
    let k = b.items.len();
    for (i, (item, n)) in b.items.iter().enumerate() {
        if i > 0 {
            out.push_str(" | ");
        }
        let LeftItem::Seq { seq, pos: bind } = item else {
            // compartments never sit on a membrane; print something parseable
            out.push_str("eps");
            continue;
        };
        let text = match bind {
            Some(v) => format!("{} @{v}", seq_pattern(seq)),
            None => seq_pattern(seq),
        };
        if bind.is_some() && i + 1 == k && b.rest.is_none() && pos.is_none() && *n == 1 {
            let _ = write!(out, "({text})");
        } else {
            out.push_str(&text);
        }
        count(out, *n);
    }
    if let Some(x) = &b.rest {
        if k > 0 {
            out.push_str(" | ");
        }
        let _ = write!(out, "${x}");
    }
    if let Some(p) = pos {
        let _ = write!(out, " @{p}");
    }
}

fn pos_fn(f: &PosFn) -> Option<String> {
    Some(match f {
        f if f.is_none() => return None,
        PosFn::Unplaced { radius } => format!("@(.; {})", num(*radius)),
        PosFn::Keep {
            var,
            offset: None,
            radius: None,
        } => format!("@{var}"),
        PosFn::Keep {
            var,
            offset,
            radius,
        } => {
            let mut s = format!("@({var}");
            if let Some([x, y, z]) = offset {
                let _ = write!(s, " + ({},{},{})", num(*x), num(*y), num(*z));
            }
            if let Some(r) = radius {
                let _ = write!(s, "; {}", num(*r));
            }
            s.push(')');
            s
        }
        PosFn::At {
            center: [x, y, z],
            radius,
        } => format!("@({},{},{}; {})", num(*x), num(*y), num(*z), num(*radius)),
        PosFn::GetPos { var, radius } => format!("@(getpos({var}); {})", num(*radius)),
    })
}

fn half(v: &str, h: Half) -> String {
    match h {
        Half::First => format!("half1(${v})"),
        Half::Second => format!("half2(${v})"),
    }
}

fn right(out: &mut String, p: &RightPattern) {
    if p.items.is_empty() {
        out.push_str("empty");
    }
    for (i, (item, n)) in p.items.iter().enumerate() {
        if i > 0 {
            out.push_str(" | ");
        }
        match item {
            RightItem::Seq { seq, pos } => {
                out.push_str(&seq_pattern(seq));
                if let Some(f) = pos_fn(pos) {
                    out.push(' ');
                    out.push_str(&f);
                }
            }
            RightItem::Comp {
                brane,
                pos,
                content,
            } => {
                out.push_str("loop(");
                right_brane(out, brane, pos);
                out.push_str(")[");
                right(out, content);
                out.push(']');
            }
            RightItem::Var(v) => {
                let _ = write!(out, "${v}");
            }
            RightItem::Half(v, h) => out.push_str(&half(v, *h)),
        }
        count(out, *n);
    }
}

fn right_brane(out: &mut String, b: &RightBrane, pos: &PosFn) {
    if b.items.is_empty() && b.vars.is_empty() {
        out.push_str("empty");
    }
    let k = b.items.len();
    for (i, (seq, f, n)) in b.items.iter().enumerate() {
        if i > 0 {
            out.push_str(" | ");
        }
        let text = match pos_fn(f) {
            Some(fs) => format!("{} {fs}", seq_pattern(seq)),
            None => seq_pattern(seq),
        };
        if !f.is_none() && i + 1 == k && b.vars.is_empty() && pos.is_none() && *n == 1 {
            let _ = write!(out, "({text})");
        } else {
            out.push_str(&text);
        }
        count(out, *n);
    }
    for (i, r) in b.vars.iter().enumerate() {
        if i + k > 0 {
            out.push_str(" | ");
        }
        match r {
            BraneRef::Var(v) => {
                let _ = write!(out, "${v}");
            }
            BraneRef::Half(v, h) => out.push_str(&half(v, *h)),
        }
    }
    if let Some(f) = pos_fn(pos) {
        out.push(' ');
        out.push_str(&f);
    }
}

fn condition(c: &Condition) -> String {
    format!(
        "{}({}) {} {}",
        c.attr.name(),
        c.var,
        c.op.symbol(),
        num(c.value)
    )
}

/// One rule, without the trailing `;`. `rate_text` is used in place of
/// the number when it evaluates to the rule's rate under `params`.
pub(crate) fn rule(
    r: &RewriteRule,
    rate_text: Option<&str>,
    params: &BTreeMap<String, f64>,
) -> String {
    let mut out = String::new();
    if r.brane {
        out.push_str("brane ");
    }
    let _ = write!(out, "{}: ", r.id);
    left(&mut out, &r.lhs);
    out.push_str(" -> ");
    right(&mut out, &r.rhs);
    if let Rate::Finite(k) = r.rate {
        let text = rate_text
            .filter(|t| eval(t, params) == Some(k))
            .map_or_else(|| num(k), str::to_string);
        let _ = write!(out, " rate {text}");
    }
    for (i, c) in r.precondition.0.iter().enumerate() {
        out.push_str(if i == 0 { " if " } else { " and " });
        out.push_str(&condition(c));
    }
    out
}

fn name(s: &str) -> String {
    let ident = s.chars().next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    if ident && !is_keyword(s) {
        s.to_string()
    } else {
        symbol(&Symbol::new(s))
    }
}

pub fn model(m: &Model) -> String {
    let mut out = String::new();
    let g = &m.geometry;
    let _ = writeln!(out, "model {};", name(&m.name));
    let _ = writeln!(out, "dimension {};", g.dim);
    let _ = writeln!(out, "seed {};", m.seed);
    let _ = writeln!(out, "sphere_radius {};", num(g.sphere_radius));
    let _ = writeln!(out, "cube_size {};", num(g.cube_size));
    let _ = writeln!(out, "max_radius {};", num(g.max_object_radius));
    if !m.params.is_empty() {
        out.push('\n');
    }
    for (k, v) in &m.params {
        let _ = writeln!(out, "param {k} = {};", num(*v));
    }
    out.push_str("\nterm {\n  ");
    term_into(&mut out, &m.initial, "\n  | ");
    out.push_str("\n}\n");
    let mut level = None;
    for r in &m.rules {
        if level != Some(r.level) {
            if level.is_some() {
                out.push_str("}\n");
            }
            let _ = writeln!(out, "\n{} {{", r.level.name());
            level = Some(r.level);
        }
        let text = m.rate_text.get(&r.id).map(String::as_str);
        let _ = writeln!(out, "  {};", rule(r, text, &m.params));
    }
    if level.is_some() {
        out.push_str("}\n");
    }
    out
}
