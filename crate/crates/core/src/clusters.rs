//! Open clusters maintained under single-edge updates.
//!
//! Openings merge by relabeling the smaller cluster. Closings run two
//! breadth-first searches in lock step from the endpoints; if one exhausts
//! before they meet, that side becomes a new cluster. Either way the work is
//! proportional to the smaller side.

use std::collections::VecDeque;

use crate::connectivity::Config;
use crate::lattice::{BoxLattice, EdgeId};

#[derive(Clone, Debug)]
pub struct DynamicClusters {
    label: Vec<u32>,
    size: Vec<u32>,
    top_count: Vec<u32>,
    bottom_count: Vec<u32>,
    free: Vec<u32>,
    /// Per-side visit stamps, queues and visited lists for the split search.
    stamp: [Vec<u32>; 2],
    queue: [VecDeque<u32>; 2],
    seen: [Vec<u32>; 2],
    generation: u32,
    merges_and_splits: u64,
}

impl DynamicClusters {
    pub fn new(lattice: &BoxLattice, config: &Config) -> Self {
        let n = lattice.vertex_count();
        let mut dc = DynamicClusters {
            label: vec![u32::MAX; n],
            size: vec![0; n],
            top_count: vec![0; n],
            bottom_count: vec![0; n],
            free: Vec::new(),
            stamp: [vec![0; n], vec![0; n]],
            queue: Default::default(),
            seen: Default::default(),
            generation: 0,
            merges_and_splits: 0,
        };
        let mut next = 0u32;
        for v in 0..n as u32 {
            if dc.label[v as usize] == u32::MAX {
                dc.flood(lattice, config, v, next);
                next += 1;
            }
        }
        dc.free = (next..n as u32).rev().collect();
        dc
    }

    fn flood(&mut self, lattice: &BoxLattice, config: &Config, start: u32, lab: u32) {
        let mut queue = VecDeque::from([start]);
        let old = self.label[start as usize];
        self.label[start as usize] = lab;
        while let Some(v) = queue.pop_front() {
            self.size[lab as usize] += 1;
            self.top_count[lab as usize] += u32::from(lattice.is_top(v));
            self.bottom_count[lab as usize] += u32::from(lattice.is_bottom(v));
            for &e in lattice.incident(v) {
                if config.is_open(EdgeId(e)) {
                    let w = lattice.other_end(e, v);
                    if self.label[w as usize] == old {
                        self.label[w as usize] = lab;
                        queue.push_back(w);
                    }
                }
            }
        }
    }

    #[inline]
    pub fn label(&self, v: u32) -> u32 {
        self.label[v as usize]
    }

    #[inline]
    pub fn in_top(&self, v: u32) -> bool {
        self.top_count[self.label[v as usize] as usize] > 0
    }

    #[inline]
    pub fn in_bottom(&self, v: u32) -> bool {
        self.bottom_count[self.label[v as usize] as usize] > 0
    }

    #[inline]
    pub fn same_cluster(&self, a: u32, b: u32) -> bool {
        self.label[a as usize] == self.label[b as usize]
    }

    /// One endpoint of `e` is in `O(T)` and the other in `O(B)`.
    #[inline]
    pub fn joins_top_bottom(&self, lattice: &BoxLattice, e: EdgeId) -> bool {
        let (a, b) = lattice.endpoints(e);
        (self.in_top(a) && self.in_bottom(b)) || (self.in_top(b) && self.in_bottom(a))
    }

    /// Counts merges and splits; unchanged means the partition is unchanged.
    pub fn structure_version(&self) -> u64 {
        self.merges_and_splits
    }

    pub fn cluster_size(&self, v: u32) -> u32 {
        self.size[self.label[v as usize] as usize]
    }

    /// Update after `e` was switched open in `config`.
    pub fn on_open(&mut self, lattice: &BoxLattice, config: &Config, e: EdgeId) {
        debug_assert!(config.is_open(e));
        let (a, b) = lattice.endpoints(e);
        let (la, lb) = (self.label[a as usize], self.label[b as usize]);
        if la == lb {
            return;
        }
        self.merges_and_splits += 1;
        let (keep, gone, start) = if self.size[la as usize] >= self.size[lb as usize] {
            (la, lb, b)
        } else {
            (lb, la, a)
        };
        let mut queue = VecDeque::from([start]);
        self.label[start as usize] = keep;
        while let Some(v) = queue.pop_front() {
            for &f in lattice.incident(v) {
                if config.is_open(EdgeId(f)) {
                    let w = lattice.other_end(f, v);
                    if self.label[w as usize] == gone {
                        self.label[w as usize] = keep;
                        queue.push_back(w);
                    }
                }
            }
        }
        let (k, g) = (keep as usize, gone as usize);
        self.size[k] += self.size[g];
        self.top_count[k] += self.top_count[g];
        self.bottom_count[k] += self.bottom_count[g];
        self.size[g] = 0;
        self.top_count[g] = 0;
        self.bottom_count[g] = 0;
        self.free.push(gone);
    }

    /// Update after `e` was switched closed in `config`.
    pub fn on_close(&mut self, lattice: &BoxLattice, config: &Config, e: EdgeId) {
        debug_assert!(!config.is_open(e));
        let (a, b) = lattice.endpoints(e);
        if self.label[a as usize] != self.label[b as usize] {
            return;
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| s.fill(0));
            self.generation = 1;
        }
        let g = self.generation;
        for (side, v) in [a, b].into_iter().enumerate() {
            self.queue[side].clear();
            self.queue[side].push_back(v);
            self.seen[side].clear();
            self.seen[side].push(v);
            self.stamp[side][v as usize] = g;
        }
        // Lock-step search: stop as soon as the sides meet or one runs dry.
        let split_side = 'search: loop {
            for side in 0..2 {
                match self.expand(lattice, config, side) {
                    Expand::Met => return,
                    Expand::Exhausted => break 'search side,
                    Expand::Progress => {}
                }
            }
        };
        self.merges_and_splits += 1;
        let old = self.label[a as usize] as usize;
        let fresh = self.free.pop().expect("label pool never runs out");
        let members = std::mem::take(&mut self.seen[split_side]);
        let (mut tops, mut bottoms) = (0u32, 0u32);
        for &v in &members {
            self.label[v as usize] = fresh;
            tops += u32::from(lattice.is_top(v));
            bottoms += u32::from(lattice.is_bottom(v));
        }
        let f = fresh as usize;
        self.size[f] = members.len() as u32;
        self.top_count[f] = tops;
        self.bottom_count[f] = bottoms;
        self.size[old] -= members.len() as u32;
        self.top_count[old] -= tops;
        self.bottom_count[old] -= bottoms;
        self.seen[split_side] = members;
    }

    fn expand(&mut self, lattice: &BoxLattice, config: &Config, side: usize) -> Expand {
        let g = self.generation;
        let other = 1 - side;
        let Some(v) = self.queue[side].pop_front() else {
            return Expand::Exhausted;
        };
        for &f in lattice.incident(v) {
            if config.is_open(EdgeId(f)) {
                let w = lattice.other_end(f, v) as usize;
                if self.stamp[other][w] == g {
                    return Expand::Met;
                }
                if self.stamp[side][w] != g {
                    self.stamp[side][w] = g;
                    self.queue[side].push_back(w as u32);
                    self.seen[side].push(w as u32);
                }
            }
        }
        if self.queue[side].is_empty() {
            Expand::Exhausted
        } else {
            Expand::Progress
        }
    }
}

enum Expand {
    Met,
    Exhausted,
    Progress,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connectivity::label_clusters;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn assert_matches_static(lat: &BoxLattice, cfg: &Config, dc: &DynamicClusters) {
        let st = label_clusters(lat, cfg);
        for v in 0..lat.vertex_count() as u32 {
            for w in [0, v / 2, v.saturating_sub(1)] {
                assert_eq!(dc.same_cluster(v, w), st.label(v) == st.label(w));
            }
            assert_eq!(dc.in_top(v), st.in_top(v));
            assert_eq!(dc.in_bottom(v), st.in_bottom(v));
            let size = st.labels().iter().filter(|&&l| l == st.label(v)).count();
            assert_eq!(dc.cluster_size(v) as usize, size);
        }
    }

    #[test]
    fn random_churn_matches_static_labeling() {
        for (d, l, p) in [(2, 5, 0.5), (2, 6, 0.9), (3, 3, 0.4)] {
            let lat = BoxLattice::new(d, l).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(17);
            let mut cfg = Config::all_closed(&lat);
            let mut dc = DynamicClusters::new(&lat, &cfg);
            for step in 0..3000 {
                let e = EdgeId(rng.random_range(0..lat.edge_count() as u32));
                let open = rng.random_bool(p);
                if cfg.is_open(e) != open {
                    cfg.set(e, open);
                    if open {
                        dc.on_open(&lat, &cfg, e);
                    } else {
                        dc.on_close(&lat, &cfg, e);
                    }
                }
                if step % 97 == 0 {
                    assert_matches_static(&lat, &cfg, &dc);
                }
            }
            assert_matches_static(&lat, &cfg, &dc);
        }
    }

    #[test]
    fn initial_labels_from_config() {
        let lat = BoxLattice::new(2, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = Config::from_bits(&lat, (0..lat.edge_count()).map(|_| rng.random_bool(0.5)).collect())
            .unwrap();
        assert_matches_static(&lat, &cfg, &DynamicClusters::new(&lat, &cfg));
    }
}
