//! Bounded candidate pool.
//!
//! Keeps the `capacity` nearest candidates seen so far and tracks which of
//! them still await expansion. Eviction and nearest-unexpanded selection
//! both break distance ties on the lower id, so traversal order is fully
//! deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// A `(distance, id)` pair ordered by distance first, then id.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoolEntry {
    pub dist: f32,
    pub id: u32,
}

impl Eq for PoolEntry {}

impl PartialOrd for PoolEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PoolEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then(self.id.cmp(&other.id))
    }
}

/// Max-bounded candidate pool with unexpanded-entry tracking.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    capacity: usize,
    /// Max-heap over current members; its top is the eviction victim.
    worst: BinaryHeap<PoolEntry>,
    /// Min-heap of entries not yet expanded; may contain stale entries that
    /// were evicted after insertion.
    unexpanded: BinaryHeap<std::cmp::Reverse<PoolEntry>>,
    /// Current membership, keyed by id. Sound because the visited set
    /// upstream guarantees an id is inserted at most once per query.
    member: Vec<bool>,
    len: usize,
}

impl CandidatePool {
    pub fn new(capacity: usize, universe: usize) -> Self {
        CandidatePool {
            capacity,
            worst: BinaryHeap::with_capacity(capacity + 1),
            unexpanded: BinaryHeap::new(),
            member: vec![false; universe],
            len: 0,
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Inserts a candidate, evicting the farthest member when full. Returns
    /// whether the candidate was admitted. Must not be called twice for the
    /// same id.
    pub fn insert(&mut self, dist: f32, id: u32) -> bool {
        let entry = PoolEntry { dist, id };
        debug_assert!(!self.member[id as usize], "id {id} inserted twice");
        if self.len >= self.capacity {
            match self.worst.peek() {
                Some(&top) if entry < top => {
                    let evicted = self.worst.pop().expect("non-empty");
                    self.member[evicted.id as usize] = false;
                    self.len -= 1;
                }
                _ => return false,
            }
        }
        self.worst.push(entry);
        self.unexpanded.push(std::cmp::Reverse(entry));
        self.member[id as usize] = true;
        self.len += 1;
        true
    }

    /// Pops the nearest candidate that has not been expanded yet, skipping
    /// entries that were evicted since insertion. The popped entry stays in
    /// the pool.
    pub fn pop_nearest_unexpanded(&mut self) -> Option<PoolEntry> {
        while let Some(std::cmp::Reverse(entry)) = self.unexpanded.pop() {
            if self.member[entry.id as usize] {
                return Some(entry);
            }
        }
        None
    }

    /// Reduces the capacity, evicting the farthest members until the pool
    /// fits. Unexpanded evictees become stale.
    pub fn shrink_capacity(&mut self, new_capacity: usize) {
        while self.len > new_capacity {
            let evicted = self.worst.pop().expect("len tracked");
            self.member[evicted.id as usize] = false;
            self.len -= 1;
        }
        self.capacity = self.capacity.min(new_capacity);
    }

    /// Current members sorted ascending by `(dist, id)`.
    pub fn entries_by_distance(&self) -> Vec<PoolEntry> {
        let mut out: Vec<PoolEntry> = self
            .worst
            .iter()
            .copied()
            .filter(|e| self.member[e.id as usize])
            .collect();
        out.sort_unstable();
        out
    }

    /// The `n` smallest member distances, ascending.
    pub fn nearest_dists(&self, n: usize) -> Vec<f32> {
        let entries = self.entries_by_distance();
        entries.iter().take(n).map(|e| e.dist).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_the_nearest_when_full() {
        let mut pool = CandidatePool::new(3, 16);
        for (d, id) in [(5.0, 0), (1.0, 1), (4.0, 2), (2.0, 3), (3.0, 4)] {
            pool.insert(d, id);
        }
        assert_eq!(pool.len(), 3);
        let ids: Vec<u32> = pool.entries_by_distance().iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![1, 3, 4]);
    }

    #[test]
    fn rejects_when_worse_than_worst() {
        let mut pool = CandidatePool::new(2, 16);
        assert!(pool.insert(1.0, 0));
        assert!(pool.insert(2.0, 1));
        assert!(!pool.insert(3.0, 2));
        assert_eq!(pool.len(), 2);
    }

    #[test]
    fn eviction_tie_breaks_on_higher_id() {
        let mut pool = CandidatePool::new(2, 16);
        pool.insert(1.0, 3);
        pool.insert(1.0, 7);
        // equal distance, lower id wins the spot
        assert!(pool.insert(1.0, 1));
        let ids: Vec<u32> = pool.entries_by_distance().iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![1, 3]);
    }

    #[test]
    fn expansion_order_is_nearest_first_and_skips_stale() {
        let mut pool = CandidatePool::new(2, 16);
        pool.insert(5.0, 0);
        pool.insert(1.0, 1);
        pool.insert(2.0, 2); // evicts id 0, which is now stale
        assert_eq!(pool.pop_nearest_unexpanded().unwrap().id, 1);
        assert_eq!(pool.pop_nearest_unexpanded().unwrap().id, 2);
        assert!(pool.pop_nearest_unexpanded().is_none());
    }

    #[test]
    fn shrink_evicts_farthest() {
        let mut pool = CandidatePool::new(4, 16);
        for (d, id) in [(1.0, 0), (2.0, 1), (3.0, 2), (4.0, 3)] {
            pool.insert(d, id);
        }
        pool.shrink_capacity(2);
        assert_eq!(pool.len(), 2);
        assert_eq!(pool.capacity(), 2);
        let ids: Vec<u32> = pool.entries_by_distance().iter().map(|e| e.id).collect();
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn size_never_exceeds_capacity() {
        let mut pool = CandidatePool::new(8, 256);
        for id in 0..256u32 {
            let d = ((id * 37) % 101) as f32;
            pool.insert(d, id);
            assert!(pool.len() <= 8);
        }
    }
}
