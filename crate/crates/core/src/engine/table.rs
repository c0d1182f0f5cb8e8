//! Propensities per (rule, cell) in rule-major, cell-minor order, with a
//! sum tree for selection in O(log n).

/// `τ = ln(1/r1) / a0`.
pub fn sample_tau(a0: f64, r1: f64) -> Option<f64> {
    if a0 > 0.0 && r1 > 0.0 && r1 <= 1.0 {
        Some((1.0 / r1).ln() / a0)
    } else {
        None
    }
}

/// Reference selection by a linear scan over `a` given as rows of rules,
/// each a row over cells: the first (μ, σ) whose cumulative sum reaches
/// `r2·a0`. Ties on the boundary go to the earlier bin.
pub fn select_linear(a: &[Vec<f64>], r2: f64) -> Option<(usize, usize)> {
    let a0: f64 = a.iter().flatten().sum();
    if a0 <= 0.0 {
        return None;
    }
    let target = r2 * a0;
    let mut acc = 0.0;
    let mut last = None;
    for (j, row) in a.iter().enumerate() {
        for (i, &x) in row.iter().enumerate() {
            if x <= 0.0 {
                continue;
            }
            acc += x;
            last = Some((j, i));
            if target <= acc {
                return last;
            }
        }
    }
    last
}

/// Leaves are indexed `rule * cells + cell`.
#[derive(Clone, Debug)]
pub struct PropensityTable {
    rules: usize,
    cells: usize,
    size: usize,
    tree: Vec<f64>,
}

impl PropensityTable {
    pub fn new(rules: usize, cells: usize) -> Self {
        let size = (rules * cells).max(1).next_power_of_two();
        PropensityTable {
            rules,
            cells,
            size,
            tree: vec![0.0; 2 * size],
        }
    }

    pub fn rules(&self) -> usize {
        self.rules
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    /// Makes room for at least `cells` cell columns, keeping all values.
    pub fn grow(&mut self, cells: usize) {
        if cells <= self.cells {
            return;
        }
        let mut bigger = PropensityTable::new(self.rules, cells.max(2 * self.cells));
        for j in 0..self.rules {
            for i in 0..self.cells {
                let v = self.get(j, i);
                if v != 0.0 {
                    bigger.set(j, i, v);
                }
            }
        }
        *self = bigger;
    }

    pub fn get(&self, rule: usize, cell: usize) -> f64 {
        self.tree[self.size + rule * self.cells + cell]
    }

    pub fn set(&mut self, rule: usize, cell: usize, a: f64) {
        let mut k = self.size + rule * self.cells + cell;
        if self.tree[k] == a {
            return;
        }
        self.tree[k] = a;
        while k > 1 {
            k /= 2;
            self.tree[k] = self.tree[2 * k] + self.tree[2 * k + 1];
        }
    }

    pub fn total(&self) -> f64 {
        self.tree[1]
    }

    pub fn row_sum(&self, rule: usize) -> f64 {
        (0..self.cells).map(|i| self.get(rule, i)).sum()
    }

    /// The (rule, cell) selected by `r2 ∈ (0, 1]`.
    pub fn select(&self, r2: f64) -> Option<(usize, usize)> {
        if self.total() <= 0.0 {
            return None;
        }
        let mut target = r2 * self.total();
        let mut k = 1;
        while k < self.size {
            let (l, r) = (self.tree[2 * k], self.tree[2 * k + 1]);
            // rounding can leave the target just past a subtree; never
            // descend into an empty one
            if (target <= l && l > 0.0) || r <= 0.0 {
                k *= 2;
            } else {
                target -= l;
                k = 2 * k + 1;
            }
        }
        let leaf = k - self.size;
        Some((leaf / self.cells, leaf % self.cells))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tau_examples() {
        assert_eq!(sample_tau(3.0, 1.0), Some(0.0));
        let t = sample_tau(2.0, (-1.0f64).exp()).unwrap();
        assert!((t - 0.5).abs() < 1e-15);
        assert_eq!(sample_tau(0.0, 0.5), None);
    }

    #[test]
    fn selection_bins() {
        // a₁¹ = 1, a₁² = 1, a₂¹ = 2
        let mut t = PropensityTable::new(2, 2);
        t.set(0, 0, 1.0);
        t.set(0, 1, 1.0);
        t.set(1, 0, 2.0);
        assert_eq!(t.select(0.6), Some((1, 0)));
        assert_eq!(t.select(0.25), Some((0, 0)));
        assert_eq!(t.select(0.2500001), Some((0, 1)));
        assert_eq!(t.select(1.0), Some((1, 0)));
        let rows = vec![vec![1.0, 1.0], vec![2.0, 0.0]];
        for r in [0.1, 0.25, 0.26, 0.5, 0.51, 0.99, 1.0] {
            assert_eq!(t.select(r), select_linear(&rows, r), "r2 = {r}");
        }
    }

    #[test]
    fn grow_keeps_values() {
        let mut t = PropensityTable::new(3, 1);
        t.set(2, 0, 5.0);
        t.set(1, 0, 1.0);
        t.grow(3);
        assert_eq!(t.get(2, 0), 5.0);
        assert_eq!(t.get(1, 0), 1.0);
        assert_eq!(t.total(), 6.0);
        t.set(2, 2, 1.0);
        assert_eq!(t.row_sum(2), 6.0);
    }

    #[test]
    fn empty_table_selects_nothing() {
        let t = PropensityTable::new(2, 2);
        assert_eq!(t.select(0.5), None);
    }
}
