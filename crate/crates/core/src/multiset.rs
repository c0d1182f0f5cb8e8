//! Sorted, count-compressed multisets.
//!
//! Every layer of a term (and every brane) is stored as a `Multiset`, which
//! makes the associative-commutative `|` with unit λ canonical by
//! construction: two layers are equal iff their multisets are equal.

use std::cmp::Ordering;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Multiset<T: Ord> {
    items: Vec<(T, u64)>,
}

impl<T: Ord> Default for Multiset<T> {
    fn default() -> Self {
        Self { items: Vec::new() }
    }
}

impl<T: Ord> Multiset<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn singleton(item: T) -> Self {
        Self {
            items: vec![(item, 1)],
        }
    }

    fn position(&self, item: &T) -> Result<usize, usize> {
        self.items.binary_search_by(|(probe, _)| probe.cmp(item))
    }

    pub fn insert(&mut self, item: T, count: u64) {
        if count == 0 {
            return;
        }
        match self.position(&item) {
            Ok(i) => self.items[i].1 += count,
            Err(i) => self.items.insert(i, (item, count)),
        }
    }

    /// Removes `count` copies; returns false (and leaves the set untouched)
    /// when fewer are present.
    pub fn remove(&mut self, item: &T, count: u64) -> bool {
        if count == 0 {
            return true;
        }
        match self.position(item) {
            Ok(i) if self.items[i].1 >= count => {
                self.items[i].1 -= count;
                if self.items[i].1 == 0 {
                    self.items.remove(i);
                }
                true
            }
            _ => false,
        }
    }

    pub fn count(&self, item: &T) -> u64 {
        self.position(item).map(|i| self.items[i].1).unwrap_or(0)
    }

    /// Sum of counts over the contiguous run of items for which `key`
    /// returns `Equal`. `key` must be monotone with respect to the item order.
    pub fn count_by<F>(&self, mut key: F) -> u64
    where
        F: FnMut(&T) -> Ordering,
    {
        let lo = self
            .items
            .partition_point(|(t, _)| key(t) == Ordering::Less);
        self.items[lo..]
            .iter()
            .take_while(|(t, _)| key(t) == Ordering::Equal)
            .map(|(_, n)| *n)
            .sum()
    }

    /// Distinct items.
    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Total number of copies.
    pub fn size(&self) -> u64 {
        self.items.iter().map(|(_, n)| n).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&T, u64)> + '_ {
        self.items.iter().map(|(t, n)| (t, *n))
    }

    pub fn entries(&self) -> &[(T, u64)] {
        &self.items
    }

    pub fn get(&self, index: usize) -> (&T, u64) {
        let (t, n) = &self.items[index];
        (t, *n)
    }

    pub fn union(&mut self, other: Multiset<T>) {
        for (t, n) in other.items {
            self.insert(t, n);
        }
    }

    pub fn into_entries(self) -> Vec<(T, u64)> {
        self.items
    }

    /// Removes one copy of the item at `index` and hands it back.
    pub fn take_one(&mut self, index: usize) -> T
    where
        T: Clone,
    {
        if self.items[index].1 == 1 {
            self.items.remove(index).0
        } else {
            self.items[index].1 -= 1;
            self.items[index].0.clone()
        }
    }
}

impl<T: Ord> FromIterator<(T, u64)> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = (T, u64)>>(iter: I) -> Self {
        let mut items: Vec<(T, u64)> = iter.into_iter().filter(|(_, n)| *n > 0).collect();
        items.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(T, u64)> = Vec::with_capacity(items.len());
        for (t, n) in items {
            match merged.last_mut() {
                Some((last, m)) if *last == t => *m += n,
                _ => merged.push((t, n)),
            }
        }
        Self { items: merged }
    }
}

impl<T: Ord> FromIterator<T> for Multiset<T> {
    fn from_iter<I: IntoIterator<Item = T>>(iter: I) -> Self {
        iter.into_iter().map(|t| (t, 1)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_remove_merge() {
        let mut m: Multiset<&str> = ["b", "a", "b"].into_iter().collect();
        assert_eq!(m.count(&"b"), 2);
        assert_eq!(m.len(), 2);
        assert!(!m.remove(&"a", 2));
        assert!(m.remove(&"a", 1));
        assert_eq!(m.count(&"a"), 0);
        m.insert("c", 3);
        assert_eq!(m.size(), 5);
        assert_eq!(m.take_one(1), "c");
        assert_eq!(m.count(&"c"), 2);
    }

    #[test]
    fn count_by_range() {
        let m: Multiset<(u8, u8)> = [((1, 0), 2), ((1, 5), 3), ((2, 0), 7)]
            .into_iter()
            .collect();
        assert_eq!(m.count_by(|t| t.0.cmp(&1)), 5);
        assert_eq!(m.count_by(|t| t.0.cmp(&3)), 0);
    }
}
