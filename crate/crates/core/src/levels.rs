//! Level-network membership and per-node routing tables.
//!
//! A routing table holds the owner's direct links plus [`EdgeRecord`]s
//! received from neighbours. A record carries the node sequence through
//! which knowledge of the edge travelled; it starts with the two edge
//! endpoints and ends with the neighbour that delivered it. The owner itself
//! is the implicit next element, so the link `path.last() - owner` is part of
//! the transmission path.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::idspace::{LevelRef, NodeId};
use crate::topology::Link;

/// Members of the level network `prefix`, in identifier order.
pub fn level_members(nodes: impl IntoIterator<Item = NodeId>, prefix: LevelRef) -> BTreeSet<NodeId> {
    nodes.into_iter().filter(|&id| prefix.contains(id)).collect()
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct EdgeRecord {
    path: Vec<NodeId>,
}

// derived order compares the path, so slice lookups agree with it
impl std::borrow::Borrow<[NodeId]> for EdgeRecord {
    fn borrow(&self) -> &[NodeId] {
        &self.path
    }
}

impl EdgeRecord {
    /// `path` must hold at least the two edge endpoints, with no repeats.
    pub fn new(path: Vec<NodeId>) -> EdgeRecord {
        assert!(path.len() >= 2, "record path needs both edge endpoints");
        debug_assert!(
            path.iter().collect::<BTreeSet<_>>().len() == path.len(),
            "record path repeats a node: {path:?}"
        );
        EdgeRecord { path }
    }

    pub fn path(&self) -> &[NodeId] {
        &self.path
    }

    pub fn edge(&self) -> Link {
        Link::new(self.path[0], self.path[1])
    }

    /// The neighbour that delivered this record.
    pub fn sender(&self) -> NodeId {
        *self.path.last().unwrap()
    }

    /// The record as forwarded by `via` to one of its neighbours.
    pub fn extended(&self, via: NodeId) -> EdgeRecord {
        let mut path = Vec::with_capacity(self.path.len() + 1);
        path.extend_from_slice(&self.path);
        path.push(via);
        EdgeRecord { path }
    }

    pub fn mentions(&self, x: NodeId) -> bool {
        self.path.contains(&x)
    }

    /// True when `link` joins two consecutive members of the transmission
    /// path, including the final hop to `holder`.
    pub fn uses_link(&self, link: Link, holder: NodeId) -> bool {
        self.path.windows(2).any(|w| Link::new(w[0], w[1]) == link)
            || (self.sender() != holder && Link::new(self.sender(), holder) == link)
    }

    /// Shorter first, then lexicographic by identifier sequence.
    pub fn preference_key(&self) -> (usize, &[NodeId]) {
        (self.path.len(), &self.path)
    }

    pub fn dump_line(&self) -> String {
        let e = self.edge();
        let mut s = format!("edge={}-{} path=", e.lo(), e.hi());
        for (i, x) in self.path.iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{x}").unwrap();
        }
        s
    }
}

/// Added and removed records and neighbours, applied as set union/difference.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableUpdate {
    pub added: Vec<EdgeRecord>,
    pub removed: Vec<EdgeRecord>,
    pub added_neighbors: Vec<NodeId>,
    pub removed_neighbors: Vec<NodeId>,
}

impl TableUpdate {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.added_neighbors.is_empty() && self.removed_neighbors.is_empty()
    }
}

/// Removal notices produced by a purge, keyed by the neighbour to notify.
pub type Removals = BTreeMap<NodeId, Vec<EdgeRecord>>;

/// One node's view of one level network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingTable {
    owner: NodeId,
    level: LevelRef,
    neighbors: BTreeSet<NodeId>,
    // keyed by sender
    records: BTreeMap<NodeId, BTreeSet<EdgeRecord>>,
}

impl RoutingTable {
    pub fn new(owner: NodeId, level: LevelRef) -> Self {
        RoutingTable { owner, level, neighbors: BTreeSet::new(), records: BTreeMap::new() }
    }

    pub fn with_neighbors(owner: NodeId, level: LevelRef, neighbors: impl IntoIterator<Item = NodeId>) -> Self {
        let mut t = Self::new(owner, level);
        t.neighbors = neighbors.into_iter().collect();
        t
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn level(&self) -> LevelRef {
        self.level
    }

    pub fn neighbors(&self) -> &BTreeSet<NodeId> {
        &self.neighbors
    }

    pub fn records(&self) -> impl Iterator<Item = &EdgeRecord> {
        self.records.values().flatten()
    }

    pub fn records_from(&self, sender: NodeId) -> impl Iterator<Item = &EdgeRecord> {
        self.records.get(&sender).into_iter().flatten()
    }

    pub(crate) fn records_from_set(&self, sender: NodeId) -> Option<&BTreeSet<EdgeRecord>> {
        self.records.get(&sender)
    }

    pub fn record_count(&self) -> usize {
        self.records.values().map(BTreeSet::len).sum()
    }

    pub fn contains_record(&self, r: &EdgeRecord) -> bool {
        self.records.get(&r.sender()).is_some_and(|s| s.contains(r))
    }

    /// Record edges plus the owner's direct links.
    pub fn visible_edges(&self) -> BTreeSet<Link> {
        let mut edges: BTreeSet<Link> = self.records().map(EdgeRecord::edge).collect();
        edges.extend(self.neighbors.iter().map(|&n| Link::new(self.owner, n)));
        edges
    }

    /// Every identifier mentioned by a record or a direct link, plus the owner.
    pub fn visible_nodes(&self) -> BTreeSet<NodeId> {
        let mut nodes: BTreeSet<NodeId> = self.records().flat_map(|r| r.path().iter().copied()).collect();
        nodes.extend(self.neighbors.iter().copied());
        nodes.insert(self.owner);
        nodes
    }

    /// Adjacency of the table graph (visible edges only).
    pub fn graph(&self) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = BTreeMap::new();
        adj.entry(self.owner).or_default();
        for e in self.visible_edges() {
            adj.entry(e.lo()).or_default().insert(e.hi());
            adj.entry(e.hi()).or_default().insert(e.lo());
        }
        adj
    }

    pub fn insert_record(&mut self, r: EdgeRecord) -> bool {
        debug_assert!(!r.mentions(self.owner), "record {r:?} mentions its holder {}", self.owner);
        self.records.entry(r.sender()).or_default().insert(r)
    }

    pub fn remove_record(&mut self, r: &EdgeRecord) -> bool {
        let sender = r.sender();
        let Some(set) = self.records.get_mut(&sender) else {
            return false;
        };
        let hit = set.remove(r);
        if set.is_empty() {
            self.records.remove(&sender);
        }
        hit
    }

    /// Union/difference merge. Removing an absent record is a no-op.
    pub fn merge_update(&mut self, update: &TableUpdate) {
        for n in &update.removed_neighbors {
            self.neighbors.remove(n);
        }
        self.neighbors.extend(update.added_neighbors.iter().copied());
        for r in &update.removed {
            if !self.remove_record(r) {
                log::debug!("{}: ignoring removal of absent record {}", self.owner, r.dump_line());
            }
        }
        for r in &update.added {
            self.insert_record(r.clone());
        }
    }

    /// Drops every record whose transmission path crosses `broken` (or whose
    /// edge is `broken`). If the owner is an endpoint, the neighbour on the
    /// other side is disconnected and everything it sent is dropped too.
    ///
    /// Returns, per remaining neighbour, the forwarded forms of the dropped
    /// records so that downstream holders can drop their copies.
    pub fn purge_stale(&mut self, broken: Link) -> Removals {
        let owner = self.owner;
        let mut dropped = Vec::new();
        if let Some(other) = broken.other(owner) {
            if self.neighbors.remove(&other) {
                // our own direct link was advertised as the record [other, owner]
                dropped.push(EdgeRecord::new(vec![other, owner]));
            }
            if let Some(set) = self.records.remove(&other) {
                dropped.extend(set.into_iter().map(|r| r.extended(owner)));
            }
        }
        let mut kept = BTreeMap::new();
        for (sender, set) in std::mem::take(&mut self.records) {
            let (gone, stay): (BTreeSet<_>, BTreeSet<_>) = set.into_iter().partition(|r| r.uses_link(broken, owner));
            dropped.extend(gone.into_iter().map(|r| r.extended(owner)));
            if !stay.is_empty() {
                kept.insert(sender, stay);
            }
        }
        self.records = kept;
        self.notices(dropped)
    }

    /// Applies removal notices received from a neighbour and returns the
    /// notices to pass on. Records already absent produce nothing.
    pub fn cascade_removal(&mut self, removed: &[EdgeRecord]) -> Removals {
        let owner = self.owner;
        let dropped: Vec<EdgeRecord> =
            removed.iter().filter(|r| self.remove_record(r)).map(|r| r.extended(owner)).collect();
        self.notices(dropped)
    }

    fn notices(&self, dropped: Vec<EdgeRecord>) -> Removals {
        let mut out = Removals::new();
        if dropped.is_empty() {
            return out;
        }
        for &n in &self.neighbors {
            let list: Vec<EdgeRecord> = dropped.iter().filter(|r| !r.mentions(n)).cloned().collect();
            if !list.is_empty() {
                out.insert(n, list);
            }
        }
        out
    }

    /// Records whose transmission path uses a link outside `links`.
    pub fn stale_records<'a>(&'a self, links: &'a BTreeSet<Link>) -> impl Iterator<Item = &'a EdgeRecord> + 'a {
        self.records().filter(move |r| {
            r.path().windows(2).any(|w| !links.contains(&Link::new(w[0], w[1])))
                || !links.contains(&Link::new(r.sender(), self.owner))
        })
    }

    /// One line per record: `edge=<id>-<id> path=<id>,<id>,...`.
    pub fn dump(&self) -> String {
        let mut lines: Vec<String> = self.records().map(EdgeRecord::dump_line).collect();
        lines.sort();
        let mut s = String::new();
        for l in lines {
            s.push_str(&l);
            s.push('\n');
        }
        s
    }

    /// Drops records by index order; used for fault injection.
    pub fn retain_records(&mut self, mut keep: impl FnMut(&EdgeRecord) -> bool) {
        for set in self.records.values_mut() {
            set.retain(&mut keep);
        }
        self.records.retain(|_, s| !s.is_empty());
    }
}
