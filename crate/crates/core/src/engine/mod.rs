//! The multi-level Gillespie loop.
//!
//! The world (content of the bounding sphere) is split into the free
//! environment, indexed as pseudo-cell 0, and cells, indexed by id from 1.
//! For rule `j` and cell `i`, `h(j, i)` counts the reactant combinations
//! that either lie inside cell `i` (its content layer, its membrane and
//! everything nested) or lie on the world layer and take cell `i` itself
//! as a reactant. Environment-only combinations belong to index 0.
//!
//! Randomness comes from one ChaCha8 stream, drawn in this order per step:
//! `r1` (time), `r2` (rule and cell), then one draw in `[0, h)` choosing
//! among the combinations of the selected pair (skipped when `h = 1` or
//! when all combinations are copies of the same molecules), then getpos
//! draws and one coin per unit split between two halves, in right-hand
//! side order. Vertical rules use the same sequence without `r1`, `r2`.

mod compile;
pub mod table;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::grid::{Grid, GridError, Move};
use crate::model::{Infection, Model, ModelError};
use crate::multiset::Multiset;
use crate::pattern::comb::binomial;
use crate::pattern::matcher::{
    for_each_layer_match, for_each_site_below, for_each_site_inside, Bindings, Selection, Site,
};
use crate::pattern::{
    instantiate, instantiate_elements, instantiate_left, InstantiateHooks, LeftPattern,
    PatternError,
};
use crate::rewrite::{consumed_by, replace_in_layer, rewrite_at, RewriteError};
use crate::term::{Compartment, Element, Sequence, Spatial, Term};

use compile::{Compiled, Sens, Shape};
pub use table::{sample_tau, select_linear, PropensityTable};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("rule {rule} is not supported by the engine: {reason}")]
    Unsupported { rule: String, reason: String },
    #[error("initial term: {0}")]
    Initial(String),
    #[error("rule {rule}: {source}")]
    Rewrite { rule: String, source: RewriteError },
    #[error("rule {rule}: cell has no position")]
    UnplacedCell { rule: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TMax,
    SpaceFull,
    Quiescent,
}

impl Termination {
    pub fn name(self) -> &'static str {
        match self {
            Termination::TMax => "t_max",
            Termination::SpaceFull => "space_full",
            Termination::Quiescent => "quiescent",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Cell {
    pub id: u64,
    /// Always a compartment.
    pub elem: Element,
    pub born: f64,
    pub parent: Option<u64>,
}

impl Cell {
    pub fn compartment(&self) -> &Compartment {
        match &self.elem {
            Element::Comp(c) => c,
            Element::Seq(..) => unreachable!("cells are compartments"),
        }
    }

    fn compartment_mut(&mut self) -> &mut Compartment {
        match &mut self.elem {
            Element::Comp(c) => c,
            Element::Seq(..) => unreachable!("cells are compartments"),
        }
    }
}

/// Where a reaction happened relative to its cell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SiteKind {
    /// The cell's content layer (or the environment for cell 0).
    Layer,
    /// The world layer, taking the cell itself.
    World,
    /// A membrane or a nested compartment.
    Inner,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reaction {
    pub t: f64,
    pub rule: usize,
    pub cell: u64,
    pub site: SiteKind,
    /// Net change at the site's layer; for world reactions, the change in
    /// the cell's content when the cell is replaced by a single cell.
    pub delta: Vec<(Sequence, i64)>,
    /// Net change of the environment (world reactions only).
    pub env_delta: Vec<(Sequence, i64)>,
    pub born: Vec<u64>,
    pub died: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellView {
    pub id: u64,
    pub center: [f64; 3],
    pub radius: f64,
    pub stage: Option<u32>,
    pub viruses: u64,
    pub infection: Infection,
    pub colour: &'static str,
    pub nuclei: Vec<[f64; 3]>,
}

/// A picture of the scene, taken at each visualisation event.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Frame {
    pub index: usize,
    pub t: f64,
    /// The vertical rule about to fire and its cell; `None` for frame 0.
    pub rule: Option<String>,
    pub cell: Option<u64>,
    pub cells: Vec<CellView>,
}

pub trait Observer {
    fn reaction(&mut self, _r: &Reaction) {}
    fn frame(&mut self, _f: &Frame) {}
}

impl Observer for () {}

const F_WORLD: u8 = 1;
const F_TOP: u8 = 2;
const F_SWORLD: u8 = 4;
const F_STOP: u8 = 8;
const F_DEEP: u8 = 16;
const F_ALL: u8 = 31;

#[derive(Clone, Copy, Debug, Default)]
struct Entry {
    world: u128,
    top: u128,
    deep: Option<u128>,
    /// Cached structural factors of factored shapes.
    s_world: Option<u128>,
    s_top: Option<u128>,
    flags: u8,
    blocked: bool,
}

impl Entry {
    fn h(&self) -> u128 {
        if self.blocked {
            return 0;
        }
        self.world
            .saturating_add(self.top)
            .saturating_add(self.deep.unwrap_or(0))
    }
}

#[derive(Debug, Default)]
struct SeqIndex {
    by_seq: BTreeMap<Sequence, Vec<usize>>,
    any: Vec<usize>,
}

impl SeqIndex {
    fn build<'a>(sens: impl Iterator<Item = &'a Sens>) -> Self {
        let mut ix = SeqIndex::default();
        for (j, s) in sens.enumerate() {
            match s {
                Sens::Any => ix.any.push(j),
                Sens::Seqs(set) => {
                    for q in set {
                        ix.by_seq.entry(q.clone()).or_default().push(j);
                    }
                }
            }
        }
        ix
    }

    fn lookup(&self, changed: &BTreeSet<Sequence>, out: &mut Vec<usize>) {
        out.clear();
        out.extend(&self.any);
        for q in changed {
            if let Some(v) = self.by_seq.get(q) {
                out.extend(v);
            }
        }
        out.sort_unstable();
        out.dedup();
    }
}

enum Exec {
    Done(Reaction),
    Blocked,
}

struct InnerHooks<'a> {
    rng: &'a mut ChaCha8Rng,
}

fn coin_split(rng: &mut ChaCha8Rng, n: u64) -> u64 {
    (0..n).filter(|_| rng.gen_bool(0.5)).count() as u64
}

impl InstantiateHooks for InnerHooks<'_> {
    fn getpos(&mut self, var: &str, _: &Spatial, _: f64) -> Result<Spatial, PatternError> {
        Err(PatternError::NoPlacement(var.to_string()))
    }

    fn split(&mut self, n: u64) -> u64 {
        coin_split(self.rng, n)
    }
}

struct GridHooks<'a> {
    grid: &'a mut Grid,
    rng: &'a mut ChaCha8Rng,
    reserved: Vec<u64>,
    moves: Vec<Move>,
}

impl InstantiateHooks for GridHooks<'_> {
    fn getpos(&mut self, var: &str, near: &Spatial, radius: f64) -> Result<Spatial, PatternError> {
        let center = near
            .center()
            .ok_or_else(|| PatternError::NoPlacement(var.to_string()))?;
        let dim = self.grid.dim();
        let parent = self
            .grid
            .cube_of(&center[..dim])
            .map_err(|_| PatternError::Full(var.to_string()))?;
        let p = self
            .grid
            .getpos(&parent, self.rng)
            .map_err(|_| PatternError::Full(var.to_string()))?;
        // hold the cube until the new object is placed
        let tmp = u64::MAX - self.reserved.len() as u64;
        self.grid
            .place(tmp, p.cube.clone())
            .map_err(|_| PatternError::Full(var.to_string()))?;
        self.reserved.push(tmp);
        self.moves.extend(p.moves);
        Ok(Spatial::at(pad3(&self.grid.center_of(&p.cube)), radius))
    }

    fn split(&mut self, n: u64) -> u64 {
        coin_split(self.rng, n)
    }
}

fn pad3(v: &[f64]) -> [f64; 3] {
    let mut out = [0.0; 3];
    for (o, x) in out.iter_mut().zip(v) {
        *o = *x;
    }
    out
}

fn ground_factor(ground: &[(Element, u64)], layer: &Multiset<Element>) -> u128 {
    let mut g: u128 = 1;
    for (e, k) in ground {
        let n = layer.count(e);
        if n < *k {
            return 0;
        }
        g = g.saturating_mul(binomial(n, *k));
    }
    g
}

fn count_view(
    p: &LeftPattern,
    view: &[(&Element, u64)],
    materialize: bool,
    accept: &dyn Fn(&Bindings) -> bool,
    need_last: bool,
) -> u128 {
    let mut total: u128 = 0;
    for_each_layer_match(p, view, materialize, accept, &mut |_, taken, _, c| {
        if !need_last || taken.last().is_some_and(|&n| n > 0) {
            total = total.saturating_add(c);
        }
    });
    total
}

/// The enumeration whose cumulative count first exceeds `u`.
fn pick_view(
    p: &LeftPattern,
    view: &[(&Element, u64)],
    accept: &dyn Fn(&Bindings) -> bool,
    need_last: bool,
    u: u128,
) -> Option<Bindings> {
    let mut acc: u128 = 0;
    let mut out = None;
    for_each_layer_match(p, view, true, accept, &mut |b, taken, _, c| {
        if out.is_some() || (need_last && !taken.last().is_some_and(|&n| n > 0)) {
            return;
        }
        acc = acc.saturating_add(c);
        if u < acc {
            out = Some(b.clone());
        }
    });
    out
}

/// Net change from `consumed` to `produced`, and whether it only touches
/// unplaced plain sequences.
fn net_change(consumed: &Term, produced: &[(Element, u64)]) -> (Vec<(Sequence, i64)>, bool) {
    let mut net: BTreeMap<&Element, i64> = BTreeMap::new();
    for (e, n) in consumed.0.iter() {
        *net.entry(e).or_default() -= n as i64;
    }
    for (e, n) in produced {
        *net.entry(e).or_default() += *n as i64;
    }
    let mut flat = true;
    let mut out = Vec::new();
    for (e, d) in net {
        if d == 0 {
            continue;
        }
        match e {
            Element::Seq(s, sp) => {
                flat &= *sp == Spatial::UNPLACED;
                out.push((s.clone(), d));
            }
            Element::Comp(_) => flat = false,
        }
    }
    (out, flat)
}

fn plain_delta(old: &Multiset<Element>, new: &Multiset<Element>) -> Vec<(Sequence, i64)> {
    let mut net: BTreeMap<&Sequence, i64> = BTreeMap::new();
    for (e, n) in old.iter() {
        if let Element::Seq(s, _) = e {
            *net.entry(s).or_default() -= n as i64;
        }
    }
    for (e, n) in new.iter() {
        if let Element::Seq(s, _) = e {
            *net.entry(s).or_default() += n as i64;
        }
    }
    net.into_iter()
        .filter(|(_, d)| *d != 0)
        .map(|(s, d)| (s.clone(), d))
        .collect()
}

pub struct Engine {
    model: Arc<Model>,
    rules: Arc<Vec<Compiled>>,
    env: Term,
    /// Slot = cell id; slot 0 is the environment and never holds a cell.
    cells: Vec<Option<Cell>>,
    grid: Grid,
    t: f64,
    rng: ChaCha8Rng,
    table: PropensityTable,
    entries: Vec<Entry>,
    dirty: Vec<(usize, usize)>,
    /// Vertical rules ready to fire, as (cell, rule).
    ready: BTreeSet<(usize, usize)>,
    index_top: SeqIndex,
    index_content: SeqIndex,
    world_rules: Vec<usize>,
    getpos_rules: Vec<usize>,
    fired: Vec<u64>,
    frames: usize,
    blocked_events: u64,
    started: bool,
}

impl Engine {
    pub fn new(model: &Model, seed: u64) -> Result<Self, EngineError> {
        model.validate()?;
        let rules = model
            .rules
            .iter()
            .map(Compiled::new)
            .collect::<Result<Vec<_>, _>>()?;
        let g = &model.geometry;
        let mut grid = Grid::new(g.dim, g.cube_size, g.sphere_radius, g.max_object_radius)
            .map_err(|e| EngineError::Initial(e.to_string()))?;
        let mut env = Term::empty();
        let mut cells = vec![None];
        for (e, n) in model.initial.0.iter() {
            if !model.is_cell(e) {
                env.0.insert(e.clone(), n);
                continue;
            }
            for _ in 0..n {
                let id = cells.len() as u64;
                let center = e
                    .spatial()
                    .center()
                    .ok_or_else(|| EngineError::Initial(format!("cell {id} has no position")))?;
                let r = e.spatial().radius;
                if r > g.max_object_radius {
                    return Err(EngineError::Initial(format!(
                        "cell {id} has radius {r}, larger than the object limit {}",
                        g.max_object_radius
                    )));
                }
                let cube = grid
                    .cube_of(&center[..g.dim])
                    .map_err(|e| EngineError::Initial(e.to_string()))?;
                grid.place(id, cube).map_err(|e| match e {
                    GridError::Occupied(c) => {
                        EngineError::Initial(format!("two cells share cube {c:?}"))
                    }
                    e => EngineError::Initial(e.to_string()),
                })?;
                cells.push(Some(Cell {
                    id,
                    elem: e.clone(),
                    born: 0.0,
                    parent: None,
                }));
            }
        }
        let cap = cells.len().max(8);
        let index_top = SeqIndex::build(rules.iter().map(|c| &c.sens_top));
        let index_content = SeqIndex::build(rules.iter().map(|c| &c.sens_content));
        let world_rules = (0..rules.len()).filter(|&j| rules[j].world.is_some()).collect();
        let getpos_rules = (0..rules.len()).filter(|&j| rules[j].getpos).collect();
        let n = rules.len();
        let mut engine = Engine {
            model: Arc::new(model.clone()),
            rules: Arc::new(rules),
            env,
            cells,
            grid,
            t: 0.0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            table: PropensityTable::new(n, cap),
            entries: vec![Entry::default(); n * cap],
            dirty: Vec::new(),
            ready: BTreeSet::new(),
            index_top,
            index_content,
            world_rules,
            getpos_rules,
            fired: vec![0; n],
            frames: 0,
            blocked_events: 0,
            started: false,
        };
        for i in 0..engine.cells.len() {
            for j in 0..n {
                engine.mark(j, i, F_ALL);
            }
        }
        engine.flush();
        Ok(engine)
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn env(&self) -> &Term {
        &self.env
    }

    pub fn table(&self) -> &PropensityTable {
        &self.table
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> + '_ {
        self.cells.iter().flatten()
    }

    pub fn cell(&self, id: u64) -> Option<&Cell> {
        self.cells.get(id as usize).and_then(|c| c.as_ref())
    }

    /// Firing counts per rule.
    pub fn fired(&self) -> &[u64] {
        &self.fired
    }

    /// Selected applications dropped because the grid had no room.
    pub fn blocked_events(&self) -> u64 {
        self.blocked_events
    }

    /// The whole world term: environment plus cells.
    pub fn term(&self) -> Term {
        let mut t = self.env.clone();
        for c in self.cells() {
            t.0.insert(c.elem.clone(), 1);
        }
        t
    }

    /// `h(j, i)`; cell 0 is the environment.
    pub fn combinations(&self, rule: usize, cell: u64) -> u128 {
        let i = cell as usize;
        if i >= self.cap() {
            return 0;
        }
        self.entries[self.idx(rule, i)].h()
    }

    /// Counts of unplaced molecules on a cell's content layer (cell 0: the
    /// environment).
    pub fn populations(&self, cell: u64) -> BTreeMap<Sequence, u64> {
        let layer = if cell == 0 {
            Some(&self.env.0)
        } else {
            self.cell(cell).map(|c| &c.compartment().content.0)
        };
        let mut out = BTreeMap::new();
        for (e, n) in layer.into_iter().flat_map(|l| l.iter()) {
            if let Element::Seq(s, sp) = e {
                if *sp == Spatial::UNPLACED {
                    *out.entry(s.clone()).or_default() += n;
                }
            }
        }
        out
    }

    fn cap(&self) -> usize {
        self.table.cells()
    }

    fn idx(&self, j: usize, i: usize) -> usize {
        j * self.cap() + i
    }

    fn live(&self, i: usize) -> bool {
        i == 0 || self.cells.get(i).is_some_and(|c| c.is_some())
    }

    fn live_cells(&self) -> Vec<usize> {
        (1..self.cells.len()).filter(|&i| self.cells[i].is_some()).collect()
    }

    fn layer(&self, i: usize) -> &Multiset<Element> {
        if i == 0 {
            &self.env.0
        } else {
            &self.cells[i].as_ref().expect("live cell").compartment().content.0
        }
    }

    fn layer_mut(&mut self, i: usize) -> &mut Multiset<Element> {
        if i == 0 {
            &mut self.env.0
        } else {
            &mut self.cells[i]
                .as_mut()
                .expect("live cell")
                .compartment_mut()
                .content
                .0
        }
    }

    fn mark(&mut self, j: usize, i: usize, flags: u8) {
        let k = self.idx(j, i);
        if self.entries[k].flags == 0 {
            self.dirty.push((j, i));
        }
        self.entries[k].flags |= flags;
    }

    fn flush(&mut self) {
        let dirty = std::mem::take(&mut self.dirty);
        for &(j, i) in &dirty {
            self.recompute(j, i);
        }
        self.dirty = dirty;
        self.dirty.clear();
    }

    fn accept(&self, j: usize) -> impl Fn(&Bindings) -> bool + '_ {
        let pre = &self.model.rules[j].precondition;
        move |b: &Bindings| pre.holds_on(b)
    }

    fn world_count(&self, j: usize, i: usize, cache: &mut Option<u128>) -> u128 {
        let c = &self.rules[j];
        let Some(shape) = &c.world else {
            return 0;
        };
        let cell = &self.cells[i].as_ref().expect("live cell").elem;
        let accept = self.accept(j);
        let h = match shape {
            Shape::Factored { ground, structure } => {
                let g = ground_factor(ground, &self.env.0);
                if g == 0 {
                    return 0;
                }
                let s = *cache.get_or_insert_with(|| {
                    count_view(structure, &[(cell, 1)], c.materialize, &accept, true)
                });
                g.saturating_mul(s)
            }
            _ => {
                let mut view: Vec<(&Element, u64)> = self.env.0.iter().collect();
                view.push((cell, 1));
                count_view(&c.lhs_world, &view, c.materialize, &accept, true)
            }
        };
        if h > 0 && c.getpos && !self.feasible(i) {
            return 0;
        }
        h
    }

    fn feasible(&self, i: usize) -> bool {
        self.grid
            .cube_of_object(i as u64)
            .is_some_and(|cube| self.grid.getpos_feasible(cube))
    }

    fn top_count(&self, j: usize, i: usize, cache: &mut Option<u128>) -> u128 {
        let c = &self.rules[j];
        if c.brane {
            return 0;
        }
        let layer = self.layer(i);
        match &c.top {
            Shape::Flat(ground) => ground_factor(ground, layer),
            Shape::Factored { ground, structure } => {
                let g = ground_factor(ground, layer);
                if g == 0 {
                    return 0;
                }
                let s = *cache.get_or_insert_with(|| {
                    let view: Vec<(&Element, u64)> = layer
                        .iter()
                        .filter(|(e, _)| matches!(e, Element::Comp(_)))
                        .collect();
                    count_view(structure, &view, c.materialize, &self.accept(j), false)
                });
                g.saturating_mul(s)
            }
            Shape::Generic => {
                let view: Vec<(&Element, u64)> = layer.iter().collect();
                count_view(&self.model.rules[j].lhs, &view, c.materialize, &self.accept(j), false)
            }
        }
    }

    fn deep_count(&self, j: usize, i: usize) -> u128 {
        let c = &self.rules[j];
        let lhs = &self.model.rules[j].lhs;
        let accept = self.accept(j);
        let mut total: u128 = 0;
        let mut f = |_: &Site, _: &Bindings, _: Term, _: &Selection, n: u128| {
            total = total.saturating_add(n);
        };
        if i == 0 {
            for_each_site_below(lhs, &self.env, c.brane, c.materialize, &accept, &mut f);
        } else {
            let comp = self.cells[i].as_ref().expect("live cell").compartment();
            for_each_site_inside(lhs, comp, c.brane, c.materialize, &accept, &mut f);
        }
        total
    }

    fn recompute(&mut self, j: usize, i: usize) {
        let k = self.idx(j, i);
        let mut e = self.entries[k];
        let f = e.flags;
        e.flags = 0;
        if !self.live(i) {
            e = Entry::default();
        } else {
            if f & F_SWORLD != 0 {
                e.s_world = None;
            }
            if f & F_STOP != 0 {
                e.s_top = None;
            }
            if f & F_DEEP != 0 {
                e.deep = None;
            }
            if i > 0 && f & (F_WORLD | F_SWORLD) != 0 {
                e.world = self.world_count(j, i, &mut e.s_world);
            }
            if f & (F_TOP | F_STOP) != 0 {
                e.top = self.top_count(j, i, &mut e.s_top);
            }
            if e.deep.is_none() {
                e.deep = Some(self.deep_count(j, i));
            }
        }
        self.entries[k] = e;
        let h = e.h();
        if self.rules[j].vertical {
            if h > 0 {
                self.ready.insert((i, j));
            } else {
                self.ready.remove(&(i, j));
            }
        } else {
            self.table.set(j, i, self.rules[j].rate * h as f64);
        }
    }

    fn on_flat(&mut self, i: usize, changed: &BTreeSet<Sequence>) {
        if changed.is_empty() {
            return;
        }
        let mut rs = Vec::new();
        self.index_top.lookup(changed, &mut rs);
        for &j in &rs {
            self.mark(j, i, F_TOP);
        }
        if i == 0 {
            let live = self.live_cells();
            for &j in &rs {
                if self.rules[j].world.is_some() {
                    for &c in &live {
                        self.mark(j, c, F_WORLD);
                    }
                }
            }
        } else {
            self.index_content.lookup(changed, &mut rs);
            for &j in &rs {
                self.mark(j, i, F_SWORLD);
            }
        }
    }

    fn on_structural(&mut self, i: usize) {
        for j in 0..self.rules.len() {
            self.mark(j, i, F_ALL);
        }
        if i == 0 {
            let live = self.live_cells();
            for j in self.world_rules.clone() {
                for &c in &live {
                    self.mark(j, c, F_WORLD);
                }
            }
        }
    }

    fn on_grid_change(&mut self) {
        for k in 0..self.entries.len() {
            if self.entries[k].blocked {
                self.entries[k].blocked = false;
                let (j, i) = (k / self.cap(), k % self.cap());
                self.mark(j, i, F_WORLD);
            }
        }
        let live = self.live_cells();
        for j in self.getpos_rules.clone() {
            for &c in &live {
                self.mark(j, c, F_WORLD);
            }
        }
    }

    fn ensure_capacity(&mut self, slots: usize) {
        if slots <= self.cap() {
            return;
        }
        let old_cap = self.cap();
        self.table.grow(slots);
        let cap = self.cap();
        let n = self.rules.len();
        let mut entries = vec![Entry::default(); n * cap];
        for j in 0..n {
            for i in 0..old_cap {
                entries[j * cap + i] = self.entries[j * old_cap + i];
            }
        }
        self.entries = entries;
    }

    fn execute(&mut self, j: usize, i: usize) -> Result<Exec, EngineError> {
        let e = self.entries[self.idx(j, i)];
        let deep = e.deep.unwrap_or(0);
        let h = e.h();
        let flat_only = matches!(self.rules[j].top, Shape::Flat(_)) && e.world == 0 && deep == 0;
        let u = if h > 1 && !flat_only {
            self.rng.gen_range(0..h)
        } else {
            0
        };
        let out = if u < e.world {
            self.exec_world(j, i, u)?
        } else if u - e.world < e.top {
            self.exec_top(j, i, u - e.world)?
        } else {
            self.exec_deep(j, i, u - e.world - e.top)?
        };
        match out {
            Exec::Done(_) => self.fired[j] += 1,
            Exec::Blocked => {
                self.blocked_events += 1;
                let k = self.idx(j, i);
                self.entries[k].blocked = true;
                self.mark(j, i, F_WORLD);
            }
        }
        Ok(out)
    }

    fn rewrite_err(&self, j: usize) -> impl Fn(RewriteError) -> EngineError {
        let rule = self.model.rules[j].id.clone();
        move |source| EngineError::Rewrite {
            rule: rule.clone(),
            source,
        }
    }

    fn reaction(&self, j: usize, i: usize, site: SiteKind, delta: Vec<(Sequence, i64)>) -> Reaction {
        Reaction {
            t: self.t,
            rule: j,
            cell: i as u64,
            site,
            delta,
            env_delta: Vec::new(),
            born: Vec::new(),
            died: Vec::new(),
        }
    }

    fn exec_top(&mut self, j: usize, i: usize, u: u128) -> Result<Exec, EngineError> {
        let rules = self.rules.clone();
        if let Some((consumed, produced)) = &rules[j].flat_delta {
            let layer = self.layer_mut(i);
            for (e, n) in consumed {
                if !layer.remove(e, *n) {
                    return Err((self.rewrite_err(j))(RewriteError::MissingReactants));
                }
            }
            for (e, n) in produced {
                layer.insert(e.clone(), *n);
            }
            let (delta, _) = net_change(&consumed.iter().cloned().collect(), produced);
            let changed: BTreeSet<Sequence> = delta.iter().map(|(s, _)| s.clone()).collect();
            self.on_flat(i, &changed);
            return Ok(Exec::Done(self.reaction(j, i, SiteKind::Layer, delta)));
        }
        let model = self.model.clone();
        let rule = &model.rules[j];
        let accept = |b: &Bindings| rule.precondition.holds_on(b);
        let view: Vec<(&Element, u64)> = self.layer(i).iter().collect();
        let b = pick_view(&rule.lhs, &view, &accept, false, u).expect("selected combination exists");
        let inst = b.to_instantiation();
        let err = self.rewrite_err(j);
        let consumed = instantiate_left(&rule.lhs, &inst).map_err(|e| err(e.into()))?;
        let produced = instantiate_elements(&rule.rhs, &inst, &mut InnerHooks { rng: &mut self.rng })
            .map_err(|e| err(e.into()))?;
        let (delta, flat) = net_change(&consumed, &produced);
        let new_layer = replace_in_layer(self.layer(i), &consumed, produced.into_iter().collect())
            .map_err(&err)?;
        *self.layer_mut(i) = new_layer;
        if flat {
            let changed = delta.iter().map(|(s, _)| s.clone()).collect();
            self.on_flat(i, &changed);
        } else {
            self.on_structural(i);
        }
        Ok(Exec::Done(self.reaction(j, i, SiteKind::Layer, delta)))
    }

    fn exec_deep(&mut self, j: usize, i: usize, u: u128) -> Result<Exec, EngineError> {
        let model = self.model.clone();
        let rule = &model.rules[j];
        let accept = |b: &Bindings| rule.precondition.holds_on(b);
        let mut acc: u128 = 0;
        let mut picked: Option<(Site, Bindings)> = None;
        let mut f = |site: &Site, b: &Bindings, _: Term, _: &Selection, n: u128| {
            if picked.is_some() {
                return;
            }
            acc = acc.saturating_add(n);
            if u < acc {
                picked = Some((site.clone(), b.clone()));
            }
        };
        if i == 0 {
            for_each_site_below(&rule.lhs, &self.env, rule.brane, true, &accept, &mut f);
        } else {
            let comp = self.cells[i].as_ref().expect("live cell").compartment();
            for_each_site_inside(&rule.lhs, comp, rule.brane, true, &accept, &mut f);
        }
        let (site, b) = picked.expect("selected combination exists");
        let inst = b.to_instantiation();
        let err = self.rewrite_err(j);
        let consumed = consumed_by(rule, &inst).map_err(|e| err(e.into()))?;
        let produced = instantiate(&rule.rhs, &inst, &mut InnerHooks { rng: &mut self.rng })
            .map_err(|e| err(e.into()))?;
        let produced_list: Vec<(Element, u64)> =
            produced.0.iter().map(|(e, n)| (e.clone(), n)).collect();
        let (delta, _) = net_change(&consumed, &produced_list);
        let mut produced = Some(produced);
        let mut replace = |layer: &Multiset<Element>| {
            replace_in_layer(layer, &consumed, produced.take().unwrap_or_default())
        };
        if i == 0 {
            self.env = rewrite_at(&self.env, &site.0, &mut replace).map_err(&err)?;
        } else {
            let cell = self.cells[i].as_ref().expect("live cell");
            let t = rewrite_at(&Term::element(cell.elem.clone()), &site.0, &mut replace)
                .map_err(&err)?;
            let (elem, _) = t.0.into_entries().pop().expect("one cell");
            self.cells[i].as_mut().expect("live cell").elem = elem;
        }
        self.on_structural(i);
        Ok(Exec::Done(self.reaction(j, i, SiteKind::Inner, delta)))
    }

    fn exec_world(&mut self, j: usize, i: usize, u: u128) -> Result<Exec, EngineError> {
        let rules = self.rules.clone();
        let model = self.model.clone();
        let c = &rules[j];
        let accept = |b: &Bindings| model.rules[j].precondition.holds_on(b);
        let cell_elem = self.cells[i].as_ref().expect("live cell").elem.clone();
        let b = {
            let mut view: Vec<(&Element, u64)> = self.env.0.iter().collect();
            view.push((&cell_elem, 1));
            pick_view(&c.lhs_world, &view, &accept, true, u)
                .expect("selected combination exists")
        };
        let inst = b.to_instantiation();
        let err = self.rewrite_err(j);
        let mut consumed = instantiate_left(&c.lhs_world, &inst).map_err(|e| err(e.into()))?;
        let snapshot = self.grid.clone();
        let mut hooks = GridHooks {
            grid: &mut self.grid,
            rng: &mut self.rng,
            reserved: Vec::new(),
            moves: Vec::new(),
        };
        let produced = match instantiate_elements(&c.rhs_world, &inst, &mut hooks) {
            Ok(p) => p,
            Err(PatternError::Full(_)) => {
                self.grid = snapshot;
                return Ok(Exec::Blocked);
            }
            Err(e) => {
                self.grid = snapshot;
                return Err(err(e.into()));
            }
        };
        let GridHooks {
            reserved,
            mut moves,
            ..
        } = hooks;
        for id in &reserved {
            let _ = self.grid.remove(*id);
        }
        moves.retain(|m| !reserved.contains(&m.id));

        let mut new_cells = Vec::new();
        let mut env_add = Vec::new();
        for (e, n) in produced {
            if self.model.is_cell(&e) {
                for _ in 0..n {
                    new_cells.push(e.clone());
                }
            } else {
                env_add.push((e, n));
            }
        }
        if !consumed.0.remove(&cell_elem, 1) {
            self.grid = snapshot;
            return Err(err(RewriteError::MissingReactants));
        }
        let keep_id = new_cells.len() == 1;
        let first_new = self.cells.len() as u64;
        let ids: Vec<u64> = if keep_id {
            vec![i as u64]
        } else {
            (0..new_cells.len() as u64).map(|k| first_new + k).collect()
        };
        let _ = self.grid.remove(i as u64);
        let dim = self.grid.dim();
        for (id, elem) in ids.iter().zip(new_cells.iter_mut()) {
            let Some(center) = elem.spatial().center() else {
                self.grid = snapshot;
                return Err(EngineError::UnplacedCell {
                    rule: self.model.rules[j].id.clone(),
                });
            };
            let Ok(cube) = self.grid.cube_of(&center[..dim]) else {
                self.grid = snapshot;
                return Ok(Exec::Blocked);
            };
            match self.grid.arrange(*id, cube.clone(), &mut self.rng) {
                Ok(p) => {
                    if p.cube != cube {
                        let sp = elem.spatial_mut();
                        *sp = Spatial::at(pad3(&self.grid.center_of(&p.cube)), sp.radius);
                    }
                    moves.extend(p.moves);
                }
                Err(_) => {
                    self.grid = snapshot;
                    return Ok(Exec::Blocked);
                }
            }
        }

        // commit
        let old_env = self.env.0.clone();
        for (e, n) in consumed.0.iter() {
            if !self.env.0.remove(e, n) {
                self.env.0 = old_env;
                self.grid = snapshot;
                return Err(err(RewriteError::MissingReactants));
            }
        }
        for (e, n) in &env_add {
            self.env.0.insert(e.clone(), *n);
        }
        let (env_delta, env_flat) = net_change(&consumed, &env_add);
        let env_structural = !env_flat;

        let mut reaction = self.reaction(j, i, SiteKind::World, Vec::new());
        let grid_changed = !keep_id || !moves.is_empty() || c.getpos;
        if keep_id {
            let elem = new_cells.pop().expect("one cell");
            let old = self.cells[i].as_ref().expect("live cell").compartment();
            if let Element::Comp(nc) = &elem {
                reaction.delta = plain_delta(&old.content.0, &nc.content.0);
            }
            let changed = elem != self.cells[i].as_ref().expect("live cell").elem;
            self.cells[i].as_mut().expect("live cell").elem = elem;
            if changed {
                self.on_structural(i);
            }
        } else {
            self.cells[i] = None;
            reaction.died.push(i as u64);
            for j2 in 0..self.rules.len() {
                self.mark(j2, i, F_ALL);
            }
            self.ensure_capacity(first_new as usize + new_cells.len());
            for (id, elem) in ids.iter().zip(new_cells) {
                self.cells.push(Some(Cell {
                    id: *id,
                    elem,
                    born: self.t,
                    parent: Some(i as u64),
                }));
                reaction.born.push(*id);
                self.on_structural(*id as usize);
            }
        }
        for m in &moves {
            let Some(Some(cell)) = self.cells.get_mut(m.id as usize) else {
                continue;
            };
            let (from, to) = (self.grid.center_of(&m.from), self.grid.center_of(&m.to));
            let sp = cell.elem.spatial_mut();
            if let Some(mut p) = sp.center() {
                for a in 0..dim {
                    p[a] += to[a] - from[a];
                }
                *sp = Spatial::at(p, sp.radius);
            }
            self.on_structural(m.id as usize);
        }
        if env_structural {
            self.on_structural(0);
        } else {
            let changed = env_delta.iter().map(|(s, _)| s.clone()).collect();
            self.on_flat(0, &changed);
        }
        reaction.env_delta = env_delta;
        if grid_changed {
            self.on_grid_change();
        }
        Ok(Exec::Done(reaction))
    }

    fn stage_of(&self, c: &Compartment) -> Option<u32> {
        let prefix = &self.model.conventions.stage_prefix;
        c.content.0.iter().find_map(|(e, _)| {
            let s = e.as_sequence()?;
            match s.0.as_slice() {
                [sym] => sym.as_str().strip_prefix(prefix.as_str())?.parse().ok(),
                _ => None,
            }
        })
    }

    fn count_virus(&self, t: &Term) -> u64 {
        let v = &self.model.conventions.virus;
        t.0.iter()
            .map(|(e, n)| match e {
                Element::Seq(s, _) => n * (s.0.len() == 1 && &s.0[0] == v) as u64,
                Element::Comp(c) => {
                    n * (c
                        .brane
                        .iter()
                        .filter(|(b, _)| b.seq.0.len() == 1 && &b.seq.0[0] == v)
                        .map(|(_, k)| k)
                        .sum::<u64>()
                        + self.count_virus(&c.content))
                }
            })
            .sum()
    }

    /// Viruses inside a cell, its membrane included.
    pub fn viruses(&self, cell: &Cell) -> u64 {
        self.count_virus(&Term::element(cell.elem.clone()))
    }

    pub fn stage(&self, cell: &Cell) -> Option<u32> {
        self.stage_of(cell.compartment())
    }

    pub fn view(&self, cell: &Cell) -> CellView {
        let c = cell.compartment();
        let center = c.spatial.center().unwrap_or([0.0; 3]);
        let nm = &self.model.conventions.nucleus_membrane;
        let nuclei = c
            .content
            .0
            .iter()
            .filter_map(|(e, _)| e.as_compartment())
            .filter(|n| n.has_membrane_symbol(nm))
            .map(|n| {
                let rel = n.spatial.center().unwrap_or([0.0; 3]);
                [center[0] + rel[0], center[1] + rel[1], center[2] + rel[2]]
            })
            .collect();
        let viruses = self.viruses(cell);
        let infection = Infection::classify(viruses, self.model.conventions.virus_threshold);
        CellView {
            id: cell.id,
            center,
            radius: c.spatial.radius,
            stage: self.stage_of(c),
            viruses,
            infection,
            colour: infection.colour(),
            nuclei,
        }
    }

    fn frame(&mut self, rule: Option<usize>, cell: Option<u64>) -> Frame {
        let f = Frame {
            index: self.frames,
            t: self.t,
            rule: rule.map(|j| self.model.rules[j].id.clone()),
            cell,
            cells: self.cells().map(|c| self.view(c)).collect(),
        };
        self.frames += 1;
        f
    }

    /// Cells holding a visualisation marker whose vertical rule cannot fire.
    pub fn waiting_cells(&self) -> Vec<(u64, Sequence)> {
        let prefix = &self.model.conventions.visual_prefix;
        let mut out = Vec::new();
        for c in self.cells() {
            for (e, _) in c.compartment().content.0.iter() {
                if let Some(s) = e.as_sequence() {
                    if s.0.len() == 1 && s.0[0].as_str().starts_with(prefix.as_str()) {
                        out.push((c.id, s.clone()));
                    }
                }
            }
        }
        out
    }

    fn fire_vertical(&mut self, obs: &mut dyn Observer) -> Result<(), EngineError> {
        while let Some(&(i, j)) = self.ready.iter().next() {
            let f = self.frame(Some(j), Some(i as u64));
            obs.frame(&f);
            if let Exec::Done(r) = self.execute(j, i)? {
                obs.reaction(&r);
            }
            self.flush();
        }
        Ok(())
    }

    /// One pass of the loop: pending vertical rules, then at most one
    /// stochastic reaction. Returns why the run ended, if it did.
    pub fn step(
        &mut self,
        t_max: f64,
        obs: &mut dyn Observer,
    ) -> Result<Option<Termination>, EngineError> {
        if !self.started {
            self.started = true;
            let f = self.frame(None, None);
            obs.frame(&f);
        }
        self.fire_vertical(obs)?;
        if self.grid.is_full() {
            return Ok(Some(Termination::SpaceFull));
        }
        let a0 = self.table.total();
        if a0 <= 0.0 {
            return Ok(Some(Termination::Quiescent));
        }
        let r1 = 1.0 - self.rng.gen::<f64>();
        let r2 = 1.0 - self.rng.gen::<f64>();
        let tau = sample_tau(a0, r1).expect("a0 > 0 and r1 in (0, 1]");
        if self.t + tau > t_max {
            self.t = self.t.max(t_max);
            return Ok(Some(Termination::TMax));
        }
        let (j, i) = self.table.select(r2).expect("a0 > 0");
        let before = self.t;
        self.t += tau;
        match self.execute(j, i)? {
            Exec::Done(r) => obs.reaction(&r),
            Exec::Blocked => self.t = before,
        }
        self.flush();
        Ok(None)
    }

    pub fn run(&mut self, t_max: f64, obs: &mut dyn Observer) -> Result<Termination, EngineError> {
        loop {
            if let Some(end) = self.step(t_max, obs)? {
                return Ok(end);
            }
        }
    }

    /// Recomputes every `h(j, i)` from scratch and compares it with the
    /// incrementally maintained table.
    pub fn check_propensities(&self) -> Result<(), String> {
        for j in 0..self.rules.len() {
            for i in 0..self.cells.len() {
                if !self.live(i) {
                    continue;
                }
                let e = self.entries[self.idx(j, i)];
                let world = if i > 0 {
                    self.world_count(j, i, &mut None)
                } else {
                    0
                };
                let fresh = world
                    .saturating_add(self.top_count(j, i, &mut None))
                    .saturating_add(self.deep_count(j, i));
                let fresh = if e.blocked { 0 } else { fresh };
                if fresh != e.h() {
                    return Err(format!(
                        "rule {} cell {i}: incremental h = {}, recomputed h = {fresh}",
                        self.model.rules[j].id,
                        e.h()
                    ));
                }
                let a = if self.rules[j].vertical {
                    0.0
                } else {
                    self.rules[j].rate * fresh as f64
                };
                if self.table.get(j, i) != a {
                    return Err(format!(
                        "rule {} cell {i}: table a = {}, expected {a}",
                        self.model.rules[j].id,
                        self.table.get(j, i)
                    ));
                }
                if self.rules[j].vertical && (fresh > 0) != self.ready.contains(&(i, j)) {
                    return Err(format!("rule {} cell {i}: ready set out of date", self.model.rules[j].id));
                }
            }
        }
        Ok(())
    }
}
