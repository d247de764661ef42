//! Lazily filled tables keyed by integer site.
//!
//! Nearest-neighbour walks visit a contiguous interval, so sites near the
//! already-visited window go into a dense two-sided buffer. Sites far from the
//! window (heavy-tailed jumps) go into a hash map. A site is materialized only
//! when first touched.

use rustc_hash::FxHashMap;

const MIN_SLACK: i64 = 64;

#[derive(Debug, Clone)]
pub struct SiteTable<V> {
    /// Site index of `dense[0]`.
    origin: i64,
    dense: Vec<Option<V>>,
    sparse: FxHashMap<i64, V>,
    len: usize,
}

impl<V> Default for SiteTable<V> {
    fn default() -> Self {
        Self::new()
    }
}

impl<V> SiteTable<V> {
    pub fn new() -> Self {
        Self {
            origin: 0,
            dense: Vec::new(),
            sparse: FxHashMap::default(),
            len: 0,
        }
    }

    /// Number of materialized sites.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    fn dense_index(&self, site: i64) -> Option<usize> {
        let i = site.checked_sub(self.origin)?;
        (0..self.dense.len() as i64).contains(&i).then_some(i as usize)
    }

    pub fn get(&self, site: i64) -> Option<&V> {
        match self.dense_index(site) {
            Some(i) => self.dense[i].as_ref(),
            None => self.sparse.get(&site),
        }
    }

    /// Whether `site` is close enough to the dense window to extend it.
    fn near_window(&self, site: i64) -> bool {
        let slack = (self.dense.len() as i64).max(MIN_SLACK);
        if self.dense.is_empty() {
            return self.sparse.is_empty();
        }
        let lo = self.origin - slack;
        let hi = self.origin + self.dense.len() as i64 + slack;
        // Growth doubles the window; only allow it while the window stays
        // reasonably full.
        let occupied = (self.len as i64 + MIN_SLACK) * 8;
        site >= lo && site < hi && 2 * self.dense.len() as i64 <= occupied
    }

    fn grow_to_cover(&mut self, site: i64) {
        if self.dense.is_empty() {
            let half = MIN_SLACK;
            self.origin = site - half;
            self.dense.resize_with(2 * half as usize, || None);
            self.absorb_sparse();
            return;
        }
        let cur_lo = self.origin;
        let cur_hi = self.origin + self.dense.len() as i64;
        let extra = self.dense.len() as i64;
        let new_lo = if site < cur_lo { (cur_lo - extra).min(site) } else { cur_lo };
        let new_hi = if site >= cur_hi { (cur_hi + extra).max(site + 1) } else { cur_hi };
        let mut fresh: Vec<Option<V>> = Vec::with_capacity((new_hi - new_lo) as usize);
        fresh.resize_with((cur_lo - new_lo) as usize, || None);
        fresh.append(&mut self.dense);
        fresh.resize_with((new_hi - new_lo) as usize, || None);
        self.dense = fresh;
        self.origin = new_lo;
        self.absorb_sparse();
    }

    /// Moves sparse entries that now fall inside the dense window.
    fn absorb_sparse(&mut self) {
        if self.sparse.is_empty() {
            return;
        }
        let lo = self.origin;
        let hi = self.origin + self.dense.len() as i64;
        let inside: Vec<i64> = self
            .sparse
            .keys()
            .copied()
            .filter(|s| (lo..hi).contains(s))
            .collect();
        for s in inside {
            let v = self.sparse.remove(&s).expect("key listed");
            self.dense[(s - lo) as usize] = Some(v);
        }
    }

    /// Returns the value at `site`, materializing it with `make` on first touch.
    #[inline]
    pub fn get_or_insert_with(&mut self, site: i64, make: impl FnOnce() -> V) -> &mut V {
        if self.dense_index(site).is_none() && self.near_window(site) {
            self.grow_to_cover(site);
        }
        match self.dense_index(site) {
            Some(i) => {
                let slot = &mut self.dense[i];
                if slot.is_none() {
                    *slot = Some(make());
                    self.len += 1;
                }
                slot.as_mut().expect("just filled")
            }
            None => {
                let len = &mut self.len;
                self.sparse.entry(site).or_insert_with(|| {
                    *len += 1;
                    make()
                })
            }
        }
    }

    /// All materialized `(site, value)` pairs, dense window first in site order.
    pub fn iter(&self) -> impl Iterator<Item = (i64, &V)> + '_ {
        let origin = self.origin;
        self.dense
            .iter()
            .enumerate()
            .filter_map(move |(i, v)| v.as_ref().map(|v| (origin + i as i64, v)))
            .chain(self.sparse.iter().map(|(&s, v)| (s, v)))
    }

    pub fn values(&self) -> impl Iterator<Item = &V> + '_ {
        self.iter().map(|(_, v)| v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    proptest! {
        #[test]
        fn behaves_like_a_map(sites in proptest::collection::vec(
            prop_oneof![-200i64..200, -1_000_000_000i64..1_000_000_000], 0..300)) {
            let mut table = SiteTable::new();
            let mut reference = BTreeMap::new();
            for (step, &s) in sites.iter().enumerate() {
                let v = *table.get_or_insert_with(s, || step);
                let r = *reference.entry(s).or_insert(step);
                prop_assert_eq!(v, r);
            }
            prop_assert_eq!(table.len(), reference.len());
            let mut seen: Vec<(i64, usize)> = table.iter().map(|(s, &v)| (s, v)).collect();
            seen.sort();
            let expected: Vec<(i64, usize)> = reference.into_iter().collect();
            prop_assert_eq!(seen, expected);
        }
    }

    #[test]
    fn contiguous_walk_stays_dense() {
        let mut t = SiteTable::new();
        for s in -5000..5000 {
            *t.get_or_insert_with(s, || 0u32) += 1;
        }
        assert!(t.sparse.is_empty());
        assert_eq!(t.len(), 10_000);
    }
}
