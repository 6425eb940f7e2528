use std::collections::BTreeMap;

use crate::time::SimTime;

use super::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborEntry {
    pub node: NodeId,
    pub rank: usize,
    pub low_index: usize,
    pub expires_at: SimTime,
}

/// One-hop neighbor state learned from rank advertisements.
#[derive(Debug, Clone, Default)]
pub struct NeighborTable {
    entries: BTreeMap<NodeId, NeighborEntry>,
}

impl NeighborTable {
    pub fn upsert(&mut self, entry: NeighborEntry) {
        self.entries.insert(entry.node, entry);
    }

    /// Drops entries with `expires_at < now` and returns them.
    pub fn expire(&mut self, now: SimTime) -> Vec<NeighborEntry> {
        let dead: Vec<NodeId> = self.entries.values().filter(|e| e.expires_at < now).map(|e| e.node).collect();
        dead.iter().filter_map(|id| self.entries.remove(id)).collect()
    }

    pub fn get(&self, node: NodeId) -> Option<&NeighborEntry> {
        self.entries.get(&node)
    }

    pub fn iter(&self) -> impl Iterator<Item = &NeighborEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.entries.values().map(|e| e.rank).collect()
    }

    pub fn min_low_index(&self) -> Option<usize> {
        self.entries.values().map(|e| e.low_index).min()
    }

    pub fn earliest_expiry(&self) -> Option<SimTime> {
        self.entries.values().map(|e| e.expires_at).min()
    }

    pub fn all_at_least(&self, rank: usize) -> bool {
        self.entries.values().all(|e| e.rank >= rank)
    }
}
