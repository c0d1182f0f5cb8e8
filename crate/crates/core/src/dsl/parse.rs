//! Hand-written recursive descent over characters. Tokens depend on
//! context (a `-` is part of a molecule name but a minus sign in a
//! number), so there is no separate lexer.

use std::collections::{BTreeMap, BTreeSet};

use crate::model::{Conventions, Geometry, Model};
use crate::pattern::{
    BraneRef, Half, LeftItem, LeftPattern, PosFn, RightBrane, RightItem, RightPattern, SeqItem,
    SeqPattern, Var,
};
use crate::rewrite::{Attr, CmpOp, Condition, Level, Precondition, Rate, RewriteRule};
use crate::term::{normalize, BraneTree, Sequence, Spatial, Symbol, TermTree};

use super::{DslError, CATEGORIES, KEYWORDS};

pub(super) struct Parser<'a> {
    src: &'a str,
    pos: usize,
    params: BTreeMap<String, f64>,
    /// Position variables bound by the left side of the current rule.
    pos_vars: BTreeSet<String>,
}

fn is_sym_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

type PResult<T> = Result<T, DslError>;

impl<'a> Parser<'a> {
    pub(super) fn new(src: &'a str) -> Self {
        Parser {
            src,
            pos: 0,
            params: BTreeMap::new(),
            pos_vars: BTreeSet::new(),
        }
    }

    pub(super) fn err_at(&self, pos: usize, msg: impl Into<String>) -> DslError {
        let before = &self.src[..pos.min(self.src.len())];
        let line = before.matches('\n').count() + 1;
        let col = before.rsplit('\n').next().unwrap_or("").chars().count() + 1;
        DslError {
            line,
            col,
            msg: msg.into(),
        }
    }

    pub(super) fn err(&self, msg: impl Into<String>) -> DslError {
        self.err_at(self.pos, msg)
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn peek2(&self) -> Option<char> {
        self.rest().chars().nth(1)
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    /// Skips whitespace and `#` comments.
    pub(super) fn ws(&mut self) {
        loop {
            match self.peek() {
                Some(c) if c.is_whitespace() => {
                    self.bump();
                }
                Some('#') => {
                    while !matches!(self.peek(), None | Some('\n')) {
                        self.bump();
                    }
                }
                _ => return,
            }
        }
    }

    pub(super) fn at_end(&mut self) -> bool {
        self.ws();
        self.pos >= self.src.len()
    }

    fn looking_at(&mut self, s: &str) -> bool {
        self.ws();
        self.rest().starts_with(s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.looking_at(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> PResult<()> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`{}", self.found())))
        }
    }

    fn found(&self) -> String {
        match self.peek() {
            None => ", found end of input".into(),
            Some(c) => format!(", found `{c}`"),
        }
    }

    /// A keyword followed by a non-name character.
    fn looking_at_kw(&mut self, kw: &str) -> bool {
        self.looking_at(kw) && !self.rest()[kw.len()..].starts_with(is_sym_char)
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.looking_at_kw(kw) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn ident(&mut self) -> PResult<String> {
        self.ws();
        let start = self.pos;
        if !self.peek().is_some_and(is_ident_start) {
            return Err(self.err(format!("expected a name{}", self.found())));
        }
        while self.peek().is_some_and(is_ident_char) {
            self.bump();
        }
        Ok(self.src[start..self.pos].to_string())
    }

    /// A parameter name: identifiers joined by dots, e.g. `cell.Sic1`.
    fn param_name(&mut self) -> PResult<String> {
        let mut name = self.ident()?;
        while self.peek() == Some('.') && self.peek2().is_some_and(is_ident_char) {
            self.bump();
            name.push('.');
            while self.peek().is_some_and(is_ident_char) {
                name.push(self.bump().unwrap());
            }
        }
        Ok(name)
    }

    // ---- numbers ----

    pub(super) fn expr(&mut self) -> PResult<f64> {
        let mut v = self.product()?;
        loop {
            if self.eat("+") {
                v += self.product()?;
            } else if self.looking_at("-") && !self.looking_at("->") {
                self.bump();
                v -= self.product()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn product(&mut self) -> PResult<f64> {
        let mut v = self.factor()?;
        loop {
            if self.eat("*") {
                v *= self.factor()?;
            } else if self.eat("/") {
                v /= self.factor()?;
            } else {
                return Ok(v);
            }
        }
    }

    fn factor(&mut self) -> PResult<f64> {
        self.ws();
        let start = self.pos;
        match self.peek() {
            Some('-') => {
                self.bump();
                Ok(-self.factor()?)
            }
            Some('(') => {
                self.bump();
                let v = self.expr()?;
                self.expect(")")?;
                Ok(v)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => {
                while self.peek().is_some_and(|c| c.is_ascii_digit() || c == '.') {
                    self.bump();
                }
                if matches!(self.peek(), Some('e' | 'E')) {
                    let save = self.pos;
                    self.bump();
                    if matches!(self.peek(), Some('+' | '-')) {
                        self.bump();
                    }
                    if self.peek().is_some_and(|c| c.is_ascii_digit()) {
                        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                            self.bump();
                        }
                    } else {
                        self.pos = save;
                    }
                }
                self.src[start..self.pos]
                    .parse()
                    .map_err(|_| self.err_at(start, "malformed number"))
            }
            Some(c) if is_ident_start(c) => {
                let name = self.param_name()?;
                if let Some(v) = self.params.get(&name) {
                    return Ok(*v);
                }
                if name == "inf" {
                    return Ok(f64::INFINITY);
                }
                CATEGORIES
                    .iter()
                    .find(|(n, _)| *n == name)
                    .map(|(_, v)| *v)
                    .ok_or_else(|| self.err_at(start, format!("unknown parameter `{name}`")))
            }
            _ => Err(self.err(format!("expected a number{}", self.found()))),
        }
    }

    fn count(&mut self) -> PResult<u64> {
        self.ws();
        let start = self.pos;
        let v = self.factor()?;
        if v >= 0.0 && v.fract() == 0.0 && v < 2f64.powi(63) {
            Ok(v as u64)
        } else {
            Err(self.err_at(start, format!("a count must be a whole number, got {v}")))
        }
    }

    /// A plain decimal integer, read exactly.
    fn integer(&mut self) -> PResult<u64> {
        self.ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| c.is_ascii_digit()) {
            self.bump();
        }
        self.src[start..self.pos]
            .parse()
            .map_err(|_| self.err_at(start, "expected a whole number"))
    }

    fn opt_count(&mut self) -> PResult<u64> {
        if self.eat("^") {
            self.count()
        } else {
            Ok(1)
        }
    }

    // ---- symbols and sequences ----

    fn symbol(&mut self) -> PResult<Symbol> {
        self.ws();
        let start = self.pos;
        if self.peek() == Some('"') {
            self.bump();
            let mut out = String::new();
            loop {
                let at = self.pos;
                match self.bump() {
                    None => return Err(self.err_at(start, "unterminated quoted name")),
                    Some('"') => break,
                    Some('\\') => match self.bump() {
                        Some('"') => out.push('"'),
                        Some('\\') => out.push('\\'),
                        Some('n') => out.push('\n'),
                        Some('t') => out.push('\t'),
                        Some(c) => return Err(self.err_at(at, format!("unknown escape `\\{c}`"))),
                        None => return Err(self.err_at(start, "unterminated quoted name")),
                    },
                    Some(c) => out.push(c),
                }
            }
            if out.is_empty() {
                return Err(self.err_at(start, "empty name"));
            }
            return Ok(Symbol::new(&out));
        }
        loop {
            match self.peek() {
                Some(c) if is_sym_char(c) => {
                    self.bump();
                }
                Some('-') if self.pos > start && self.peek2().is_some_and(is_sym_char) => {
                    self.bump();
                }
                _ => break,
            }
        }
        if self.pos == start {
            return Err(self.err(format!("expected a name{}", self.found())));
        }
        Ok(Symbol::new(&self.src[start..self.pos]))
    }

    fn sequence(&mut self) -> PResult<Sequence> {
        if self.eat_kw("eps") {
            return Ok(Sequence::epsilon());
        }
        let mut syms = vec![self.symbol()?];
        while self.dot_follows() {
            self.bump();
            syms.push(self.symbol()?);
        }
        Ok(Sequence(syms))
    }

    /// A `.` directly continuing a sequence.
    fn dot_follows(&self) -> bool {
        self.peek() == Some('.')
            && self
                .peek2()
                .is_some_and(|c| is_sym_char(c) || matches!(c, '"' | '~' | '?'))
    }

    fn seq_pattern(&mut self) -> PResult<SeqPattern> {
        if self.eat_kw("eps") {
            return Ok(SeqPattern(vec![]));
        }
        let mut items = vec![self.seq_item()?];
        while self.dot_follows() {
            self.bump();
            items.push(self.seq_item()?);
        }
        Ok(SeqPattern(items))
    }

    fn seq_item(&mut self) -> PResult<SeqItem> {
        self.ws();
        match self.peek() {
            Some('~') => {
                self.bump();
                Ok(SeqItem::SeqVar(Var::from(self.ident()?)))
            }
            Some('?') => {
                self.bump();
                Ok(SeqItem::SymVar(Var::from(self.ident()?)))
            }
            _ => Ok(SeqItem::Sym(self.symbol()?)),
        }
    }

    // ---- ground terms ----

    fn spatial(&mut self) -> PResult<Spatial> {
        let start = self.pos;
        self.expect("@")?;
        self.expect("(")?;
        let placement = if self.eat(".") {
            None
        } else {
            let x = self.expr()?;
            self.expect(",")?;
            let y = self.expr()?;
            self.expect(",")?;
            let z = self.expr()?;
            Some([x, y, z])
        };
        self.expect(";")?;
        let r = self.expr()?;
        self.expect(")")?;
        let finite = placement.map_or(true, |c| c.iter().all(|v| v.is_finite()));
        if !(finite && r.is_finite() && r >= 0.0) {
            return Err(self.err_at(start, "malformed spatial information"));
        }
        Ok(match placement {
            None => Spatial::unplaced(r),
            Some(c) => Spatial::at(c, r),
        })
    }

    pub(super) fn term(&mut self) -> PResult<TermTree> {
        if self.eat_kw("empty") {
            return Ok(TermTree::Empty);
        }
        let mut items = vec![self.term_item()?];
        while self.eat("|") {
            items.push(self.term_item()?);
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            TermTree::Par(items)
        })
    }

    fn term_item(&mut self) -> PResult<TermTree> {
        self.ws();
        let item = if self.eat_kw("loop") {
            self.expect("(")?;
            let mut brane = Vec::new();
            let mut spatial = Spatial::UNPLACED;
            if !self.eat_kw("empty") && !self.looking_at("@") && !self.looking_at(")") {
                loop {
                    let grouped = self.eat("(");
                    let seq = self.sequence()?;
                    let mut d = Spatial::UNPLACED;
                    if self.looking_at("@") {
                        let sp = self.spatial()?;
                        if !grouped && self.looking_at(")") {
                            spatial = sp;
                            brane.push(BraneTree::Seq(seq, d));
                            break;
                        }
                        d = sp;
                    }
                    if grouped {
                        self.expect(")")?;
                    }
                    let n = self.opt_count()?;
                    for _ in 0..n {
                        brane.push(BraneTree::Seq(seq.clone(), d));
                    }
                    if !self.eat("|") {
                        break;
                    }
                }
            }
            if self.looking_at("@") {
                spatial = self.spatial()?;
            }
            self.expect(")")?;
            self.expect("[")?;
            let content = self.term()?;
            self.expect("]")?;
            TermTree::Comp {
                brane: vec![BraneTree::Par(brane)],
                spatial,
                content: Box::new(content),
            }
        } else if self.eat("(") {
            let t = self.term()?;
            self.expect(")")?;
            t
        } else {
            let seq = self.sequence()?;
            let d = if self.looking_at("@") {
                self.spatial()?
            } else {
                Spatial::UNPLACED
            };
            TermTree::Seq(seq, d)
        };
        let n = self.opt_count()?;
        Ok(match n {
            1 => item,
            _ => TermTree::Par(vec![item; n as usize]),
        })
    }

    // ---- left patterns ----

    fn binder(&mut self) -> PResult<Option<Var>> {
        if self.eat("@") {
            let v = self.ident()?;
            self.pos_vars.insert(v.clone());
            Ok(Some(Var::from(v)))
        } else {
            Ok(None)
        }
    }

    fn rest_var(&mut self, rest: &mut Option<Var>) -> PResult<()> {
        let start = self.pos;
        self.expect("$")?;
        let v = Var::from(self.ident()?);
        if rest.replace(v).is_some() {
            return Err(self.err_at(start, "at most one rest variable per layer"));
        }
        Ok(())
    }

    fn left(&mut self) -> PResult<LeftPattern> {
        if self.eat_kw("empty") {
            return Ok(LeftPattern::default());
        }
        let mut items = Vec::new();
        let mut rest = None;
        loop {
            self.ws();
            if self.looking_at("$") {
                self.rest_var(&mut rest)?;
            } else if self.eat_kw("loop") {
                self.expect("(")?;
                let (brane, pos) = self.left_brane()?;
                self.expect(")")?;
                self.expect("[")?;
                let content = self.left()?;
                self.expect("]")?;
                let n = self.opt_count()?;
                items.push((
                    LeftItem::Comp {
                        brane,
                        pos,
                        content,
                    },
                    n,
                ));
            } else {
                let seq = self.seq_pattern()?;
                let pos = self.binder()?;
                let n = self.opt_count()?;
                items.push((LeftItem::Seq { seq, pos }, n));
            }
            if !self.eat("|") {
                break;
            }
        }
        Ok(LeftPattern::new(items, rest))
    }

    /// Brane items, then the compartment's binder if the last `@name`
    /// closes the parenthesis.
    fn left_brane(&mut self) -> PResult<(LeftPattern, Option<Var>)> {
        let mut items = Vec::new();
        let mut rest = None;
        let mut pos = None;
        if !self.eat_kw("empty") && !self.looking_at("@") && !self.looking_at(")") {
            loop {
                self.ws();
                if self.looking_at("$") {
                    self.rest_var(&mut rest)?;
                } else {
                    let grouped = self.eat("(");
                    let seq = self.seq_pattern()?;
                    let mut b = self.binder()?;
                    if grouped {
                        self.expect(")")?;
                    } else if b.is_some() && self.looking_at(")") {
                        pos = b.take();
                    }
                    let n = self.opt_count()?;
                    items.push((LeftItem::Seq { seq, pos: b }, n));
                }
                if pos.is_some() || !self.eat("|") {
                    break;
                }
            }
        }
        if pos.is_none() {
            pos = self.binder()?;
        }
        Ok((LeftPattern::new(items, rest), pos))
    }

    // ---- right patterns ----

    fn pos_fn(&mut self) -> PResult<PosFn> {
        let start = self.pos;
        self.expect("@")?;
        if !self.looking_at("(") {
            let v = self.ident()?;
            return Ok(PosFn::Keep {
                var: Var::from(v),
                offset: None,
                radius: None,
            });
        }
        self.expect("(")?;
        let f = if self.eat(".") {
            self.expect(";")?;
            PosFn::Unplaced {
                radius: self.expr()?,
            }
        } else if self.eat_kw("getpos") {
            self.expect("(")?;
            let v = self.ident()?;
            self.expect(")")?;
            self.expect(";")?;
            PosFn::GetPos {
                var: Var::from(v),
                radius: self.expr()?,
            }
        } else if self.var_ahead() {
            let v = self.ident()?;
            let offset = if self.eat("+") {
                self.expect("(")?;
                let x = self.expr()?;
                self.expect(",")?;
                let y = self.expr()?;
                self.expect(",")?;
                let z = self.expr()?;
                self.expect(")")?;
                Some([x, y, z])
            } else {
                None
            };
            let radius = if self.eat(";") {
                Some(self.expr()?)
            } else {
                None
            };
            PosFn::Keep {
                var: Var::from(v),
                offset,
                radius,
            }
        } else {
            let x = self.expr()?;
            self.expect(",")?;
            let y = self.expr()?;
            self.expect(",")?;
            let z = self.expr()?;
            self.expect(";")?;
            PosFn::At {
                center: [x, y, z],
                radius: self.expr()?,
            }
        };
        self.expect(")")?;
        let ok = match &f {
            PosFn::Unplaced { radius } | PosFn::GetPos { radius, .. } => radius.is_finite(),
            PosFn::Keep { offset, radius, .. } => {
                offset.map_or(true, |o| o.iter().all(|v| v.is_finite()))
                    && radius.map_or(true, f64::is_finite)
            }
            PosFn::At { center, radius } => {
                center.iter().all(|v| v.is_finite()) && radius.is_finite()
            }
        };
        if !ok {
            return Err(self.err_at(start, "malformed spatial information"));
        }
        Ok(f)
    }

    /// Whether the next name is a position variable of the current rule.
    fn var_ahead(&mut self) -> bool {
        self.ws();
        let save = self.pos;
        let hit = self
            .ident()
            .is_ok_and(|v| self.pos_vars.contains(&v) && !self.peek_is_param_dot());
        self.pos = save;
        hit
    }

    fn peek_is_param_dot(&self) -> bool {
        self.peek() == Some('.') && self.peek2().is_some_and(is_ident_char)
    }

    fn opt_pos_fn(&mut self) -> PResult<PosFn> {
        if self.looking_at("@") {
            self.pos_fn()
        } else {
            Ok(PosFn::NONE)
        }
    }

    fn half(&mut self) -> Option<Half> {
        if self.eat_kw("half1") {
            Some(Half::First)
        } else if self.eat_kw("half2") {
            Some(Half::Second)
        } else {
            None
        }
    }

    fn half_arg(&mut self) -> PResult<Var> {
        self.expect("(")?;
        self.expect("$")?;
        let v = Var::from(self.ident()?);
        self.expect(")")?;
        Ok(v)
    }

    fn right(&mut self) -> PResult<RightPattern> {
        if self.eat_kw("empty") {
            return Ok(RightPattern::default());
        }
        let mut items = Vec::new();
        loop {
            self.ws();
            let item = if let Some(h) = self.half() {
                RightItem::Half(self.half_arg()?, h)
            } else if self.eat("$") {
                RightItem::Var(Var::from(self.ident()?))
            } else if self.eat_kw("loop") {
                self.expect("(")?;
                let (brane, pos) = self.right_brane()?;
                self.expect(")")?;
                self.expect("[")?;
                let content = self.right()?;
                self.expect("]")?;
                RightItem::Comp {
                    brane,
                    pos,
                    content,
                }
            } else {
                let seq = self.seq_pattern()?;
                let pos = self.opt_pos_fn()?;
                RightItem::Seq { seq, pos }
            };
            let n = self.opt_count()?;
            items.push((item, n));
            if !self.eat("|") {
                break;
            }
        }
        Ok(RightPattern { items })
    }

    fn right_brane(&mut self) -> PResult<(RightBrane, PosFn)> {
        let mut b = RightBrane::default();
        let mut pos = None;
        if !self.eat_kw("empty") && !self.looking_at("@") && !self.looking_at(")") {
            loop {
                self.ws();
                if let Some(h) = self.half() {
                    b.vars.push(BraneRef::Half(self.half_arg()?, h));
                } else if self.eat("$") {
                    b.vars.push(BraneRef::Var(Var::from(self.ident()?)));
                } else {
                    let grouped = self.eat("(");
                    let seq = self.seq_pattern()?;
                    let mut f = self.opt_pos_fn()?;
                    if grouped {
                        self.expect(")")?;
                    } else if !f.is_none() && self.looking_at(")") {
                        pos = Some(std::mem::replace(&mut f, PosFn::NONE));
                    }
                    let n = self.opt_count()?;
                    b.items.push((seq, f, n));
                }
                if pos.is_some() || !self.eat("|") {
                    break;
                }
            }
        }
        let pos = match pos {
            Some(p) => p,
            None => self.opt_pos_fn()?,
        };
        Ok((b, pos))
    }

    // ---- rules and models ----

    fn condition(&mut self) -> PResult<Condition> {
        let start = self.pos;
        let attr = match self.ident()?.as_str() {
            "x" => Attr::X,
            "y" => Attr::Y,
            "z" => Attr::Z,
            "radius" => Attr::Radius,
            other => {
                return Err(self.err_at(
                    start,
                    format!("expected x, y, z or radius, found `{other}`"),
                ))
            }
        };
        self.expect("(")?;
        let var = Var::from(self.ident()?);
        self.expect(")")?;
        self.ws();
        let op = [
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
        ]
        .into_iter()
        .find(|(s, _)| self.eat(s))
        .map(|(_, op)| op)
        .ok_or_else(|| self.err(format!("expected a comparison{}", self.found())))?;
        Ok(Condition {
            var,
            attr,
            op,
            value: self.expr()?,
        })
    }

    /// `[brane] id: lhs -> rhs [rate k] [if cond and ...];`
    fn rule(&mut self, level: Level) -> PResult<(RewriteRule, Option<String>)> {
        self.ws();
        let start = self.pos;
        let brane = self.eat_kw("brane");
        let id = self.ident()?;
        self.expect(":")?;
        self.pos_vars.clear();
        let lhs = self.left()?;
        self.expect("->")?;
        let rhs = self.right()?;
        let mut rate_text = None;
        let rate = if self.eat_kw("rate") {
            self.ws();
            let at = self.pos;
            let k = self.expr()?;
            let text: String = self.src[at..self.pos]
                .chars()
                .filter(|c| !c.is_whitespace())
                .collect();
            if text != super::print::num(k) {
                rate_text = Some(text);
            }
            if k.is_infinite() {
                Rate::Infinite
            } else {
                Rate::Finite(k)
            }
        } else if level == Level::Vertical {
            Rate::Infinite
        } else {
            return Err(self.err(format!("rule {id}: expected `rate`{}", self.found())));
        };
        let mut pre = Vec::new();
        if self.eat_kw("if") {
            pre.push(self.condition()?);
            while self.eat_kw("and") {
                pre.push(self.condition()?);
            }
        }
        self.expect(";")?;
        let rule = RewriteRule::new(id, level, brane, Precondition(pre), lhs, rhs, rate)
            .map_err(|e| self.err_at(start, e.to_string()))?;
        Ok((rule, rate_text))
    }

    pub(super) fn model(
        &mut self,
        overrides: &BTreeMap<String, f64>,
    ) -> PResult<(Model, BTreeSet<String>)> {
        let mut used = BTreeSet::new();
        let mut name = None;
        let mut dim = None;
        let mut seed = 1;
        let (mut sphere, mut cube, mut max_r) = (None, None, None);
        let mut initial = None;
        let mut rules = Vec::new();
        let mut rate_text = BTreeMap::new();
        let set_param = |p: &mut Self, key: String, v: f64, used: &mut BTreeSet<String>| {
            let v = match overrides.get(&key) {
                Some(o) => {
                    used.insert(key.clone());
                    *o
                }
                None => v,
            };
            p.params.insert(key, v);
        };
        while !self.at_end() {
            let start = self.pos;
            let kw = self.ident()?;
            match kw.as_str() {
                "model" => {
                    self.ws();
                    name = Some(if self.peek() == Some('"') {
                        self.symbol()?.as_str().to_string()
                    } else {
                        self.ident()?
                    });
                    self.expect(";")?;
                }
                "dimension" => {
                    dim = Some(self.integer()? as usize);
                    self.expect(";")?;
                }
                "seed" => {
                    seed = self.integer()?;
                    self.expect(";")?;
                }
                "s" => {
                    let v = self.expr()?;
                    set_param(self, "s".into(), v, &mut used);
                    self.expect(";")?;
                }
                "sphere_radius" | "cube_size" | "max_radius" => {
                    let v = self.expr()?;
                    *match kw.as_str() {
                        "sphere_radius" => &mut sphere,
                        "cube_size" => &mut cube,
                        _ => &mut max_r,
                    } = Some(v);
                    self.expect(";")?;
                }
                "param" => {
                    let key = self.param_name()?;
                    self.expect("=")?;
                    let v = self.expr()?;
                    set_param(self, key, v, &mut used);
                    self.expect(";")?;
                }
                "term" => {
                    self.expect("{")?;
                    initial = Some(normalize(&self.term()?));
                    self.expect("}")?;
                }
                "visual" | "molecular" | "virus" | "vertical" => {
                    let level = match kw.as_str() {
                        "visual" => Level::Visual,
                        "vertical" => Level::Vertical,
                        _ => Level::Molecular,
                    };
                    self.expect("{")?;
                    while !self.eat("}") {
                        if self.at_end() {
                            return Err(self.err("expected `}`, found end of input"));
                        }
                        let (r, text) = self.rule(level)?;
                        if let Some(t) = text {
                            rate_text.insert(r.id.clone(), t);
                        }
                        rules.push(r);
                    }
                }
                other => {
                    return Err(self.err_at(start, format!("unexpected `{other}`")));
                }
            }
        }
        let missing = |what: &str| self.err(format!("missing `{what}`"));
        let name = name.ok_or_else(|| missing("model"))?;
        let dim = dim.ok_or_else(|| missing("dimension"))?;
        let sphere_radius = sphere.ok_or_else(|| missing("sphere_radius"))?;
        let cube_size = cube.ok_or_else(|| missing("cube_size"))?;
        let initial = initial.ok_or_else(|| missing("term"))?;
        let conventions = Conventions {
            virus_threshold: self
                .params
                .get("virusTH")
                .map_or(Conventions::default().virus_threshold, |v| *v as u64),
            ..Conventions::default()
        };
        let model = Model {
            name,
            params: std::mem::take(&mut self.params),
            geometry: Geometry {
                dim,
                sphere_radius,
                cube_size,
                max_object_radius: max_r.unwrap_or(cube_size / 2.0),
            },
            conventions,
            initial,
            rules,
            rate_text,
            seed,
        };
        Ok((model, used))
    }
}

/// Evaluates a complete numeric expression, `None` if it does not parse.
pub(super) fn eval(text: &str, params: &BTreeMap<String, f64>) -> Option<f64> {
    let mut p = Parser::new(text);
    p.params = params.clone();
    let v = p.expr().ok()?;
    p.at_end().then_some(v)
}

pub(super) fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}
