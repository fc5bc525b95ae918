use serde::{Deserialize, Serialize};

use crate::lattice::EdgeId;

/// A sorted, duplicate-free set of edges.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EdgeSet {
    ids: Vec<EdgeId>,
}

impl EdgeSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Wraps a vector that is already strictly ascending.
    pub fn from_sorted(ids: Vec<EdgeId>) -> Self {
        debug_assert!(ids.windows(2).all(|w| w[0] < w[1]));
        EdgeSet { ids }
    }

    pub fn from_mask(mask: &[bool]) -> Self {
        EdgeSet {
            ids: mask
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(|(i, _)| EdgeId(i as u32))
                .collect(),
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    #[inline]
    pub fn contains(&self, e: EdgeId) -> bool {
        self.ids.binary_search(&e).is_ok()
    }

    pub fn insert(&mut self, e: EdgeId) -> bool {
        match self.ids.binary_search(&e) {
            Ok(_) => false,
            Err(pos) => {
                self.ids.insert(pos, e);
                true
            }
        }
    }

    pub fn remove(&mut self, e: EdgeId) -> bool {
        match self.ids.binary_search(&e) {
            Ok(pos) => {
                self.ids.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.ids.iter().copied()
    }

    pub fn as_slice(&self) -> &[EdgeId] {
        &self.ids
    }

    pub fn to_mask(&self, edge_count: usize) -> Vec<bool> {
        let mut mask = vec![false; edge_count];
        for e in &self.ids {
            mask[e.index()] = true;
        }
        mask
    }

    pub fn intersection(&self, other: &EdgeSet) -> EdgeSet {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < self.ids.len() && j < other.ids.len() {
            match self.ids[i].cmp(&other.ids[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(self.ids[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        EdgeSet { ids: out }
    }

    pub fn union(&self, other: &EdgeSet) -> EdgeSet {
        let mut ids = Vec::with_capacity(self.len() + other.len());
        ids.extend_from_slice(&self.ids);
        ids.extend_from_slice(&other.ids);
        ids.sort_unstable();
        ids.dedup();
        EdgeSet { ids }
    }

    pub fn difference(&self, other: &EdgeSet) -> EdgeSet {
        EdgeSet {
            ids: self.iter().filter(|&e| !other.contains(e)).collect(),
        }
    }

    pub fn is_subset(&self, other: &EdgeSet) -> bool {
        self.iter().all(|e| other.contains(e))
    }

    pub fn without(&self, e: EdgeId) -> EdgeSet {
        EdgeSet {
            ids: self.iter().filter(|&f| f != e).collect(),
        }
    }
}

impl FromIterator<EdgeId> for EdgeSet {
    fn from_iter<I: IntoIterator<Item = EdgeId>>(iter: I) -> Self {
        let mut ids: Vec<EdgeId> = iter.into_iter().collect();
        ids.sort_unstable();
        ids.dedup();
        EdgeSet { ids }
    }
}

impl<'a> IntoIterator for &'a EdgeSet {
    type Item = EdgeId;
    type IntoIter = std::iter::Copied<std::slice::Iter<'a, EdgeId>>;

    fn into_iter(self) -> Self::IntoIter {
        self.ids.iter().copied()
    }
}
