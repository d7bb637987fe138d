//! Route propagation: the per-neighbour outgoing subgraph and the
//! synchronous rounds that drive every table of a level network to a fixed
//! point.
//!
//! For a node `a` and neighbour `b`, `a` merges what it heard from everyone
//! except `b` (records that passed through `b` are left out too), adds its
//! direct links, and keeps every path `b - a - c1 .. ck - d` where `d` has
//! the other color, every `c_j` has `a`'s color, and no other-colored node is
//! strictly closer (hop distance in that graph) to some `c_j` than both path
//! ends are. Node `b` is then removed and the surviving edges are sent with
//! their shortest transmission paths.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::UNREACHED;
use crate::idspace::{LevelRef, NodeId};
use crate::levels::{EdgeRecord, RoutingTable, TableUpdate};
use crate::topology::Link;

pub const DEFAULT_MAX_PATH_HOPS: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationOptions {
    /// Longest `b .. d` path considered, in hops.
    pub max_path_hops: usize,
    /// Also advertise the sender's own links to every neighbour.
    pub send_direct_links: bool,
    /// Keep every delivered diff so a run can be replayed.
    pub record_log: bool,
    /// Also withdraw records a sender stops selecting. Selection is not
    /// monotone in what a node knows, so this can oscillate forever; without
    /// it tables only grow between link failures and always converge.
    pub withdraw: bool,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        PropagationOptions { max_path_hops: DEFAULT_MAX_PATH_HOPS, send_direct_links: true, record_log: false, withdraw: false }
    }
}

/// The graph `a` assembles when deciding what to send to `b`.
#[derive(Clone, Debug)]
pub struct NeighborGraph {
    center: NodeId,
    excluded: NodeId,
    edges: BTreeSet<Link>,
}

impl NeighborGraph {
    pub fn from_edges(center: NodeId, excluded: NodeId, edges: impl IntoIterator<Item = Link>) -> Self {
        NeighborGraph { center, excluded, edges: edges.into_iter().collect() }
    }

    pub fn center(&self) -> NodeId {
        self.center
    }

    pub fn excluded(&self) -> NodeId {
        self.excluded
    }

    pub fn nodes(&self) -> BTreeSet<NodeId> {
        let mut nodes: BTreeSet<NodeId> = self.edges.iter().flat_map(|e| [e.lo(), e.hi()]).collect();
        nodes.extend([self.center, self.excluded]);
        nodes
    }

    pub fn edges(&self) -> &BTreeSet<Link> {
        &self.edges
    }
}

/// Union of what `table`'s owner heard from neighbours other than `b`, plus
/// its direct links (including the one to `b`).
pub fn build_neighbor_graph(table: &RoutingTable, b: NodeId) -> NeighborGraph {
    let a = table.owner();
    let edges = table
        .records()
        .filter(|r| !r.mentions(b))
        .map(EdgeRecord::edge)
        .chain(table.neighbors().iter().map(|&x| Link::new(a, x)))
        .chain(std::iter::once(Link::new(a, b)));
    NeighborGraph::from_edges(a, b, edges)
}

/// Nodes and edges selected for one neighbour (with that neighbour removed).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PathSelection {
    pub nodes: BTreeSet<NodeId>,
    pub edges: BTreeSet<Link>,
    /// Path expansions cut off by the hop cap.
    pub truncated: usize,
}

/// Indexed adjacency with edge numbers, so edges can be masked per query.
struct Csr {
    ids: Vec<NodeId>,
    // (neighbour, edge), sorted by neighbour
    adj: Vec<Vec<(u32, u32)>>,
    edges: Vec<Link>,
}

impl Csr {
    /// `edges` must be sorted and free of duplicates.
    fn new(edges: Vec<Link>, extra: impl IntoIterator<Item = NodeId>) -> Csr {
        let mut ids: Vec<NodeId> = edges.iter().flat_map(|e| [e.lo(), e.hi()]).chain(extra).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut adj = vec![Vec::new(); ids.len()];
        for (k, e) in edges.iter().enumerate() {
            let u = ids.binary_search(&e.lo()).unwrap();
            let v = ids.binary_search(&e.hi()).unwrap();
            adj[u].push((v as u32, k as u32));
            adj[v].push((u as u32, k as u32));
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        Csr { ids, adj, edges }
    }

    fn index_of(&self, x: NodeId) -> Option<u32> {
        self.ids.binary_search(&x).ok().map(|i| i as u32)
    }
}

struct Search {
    nodes: Vec<bool>,
    edges: Vec<bool>,
    truncated: usize,
}

/// Depth-first walk from `a` over same-colored nodes, closing a path at
/// every other-colored neighbour. A node at position `j` on the path whose
/// nearest other-colored node is `delta` hops away rules out every path
/// with `k >= j + delta` interior nodes once `delta <= j`.
fn search(csr: &Csr, blocked: &[bool], a: u32, b: u32, level: u32, max_path_hops: usize) -> Search {
    let n = csr.ids.len();
    let own = csr.ids[a as usize].color(level);
    let other: Vec<bool> = csr.ids.iter().map(|x| x.color(level) != own).collect();

    let mut delta = vec![UNREACHED; n];
    let mut queue = VecDeque::new();
    for (i, &o) in other.iter().enumerate() {
        if o {
            delta[i] = 0;
            queue.push_back(i as u32);
        }
    }
    while let Some(u) = queue.pop_front() {
        let du = delta[u as usize];
        for &(v, e) in &csr.adj[u as usize] {
            if !blocked[e as usize] && delta[v as usize] == UNREACHED {
                delta[v as usize] = du + 1;
                queue.push_back(v);
            }
        }
    }

    let mut out = Search { nodes: vec![false; n], edges: vec![false; csr.edges.len()], truncated: 0 };
    let mut on_path = vec![false; n];
    on_path[a as usize] = true;
    on_path[b as usize] = true;
    // stack[0] = a, stack[j] = c_j; edge_stack[j - 1] joins them
    let mut stack: Vec<u32> = vec![a];
    let mut edge_stack: Vec<u32> = Vec::new();

    struct Frame {
        node: u32,
        next: usize,
        kmax: usize,
    }
    let mut frames = vec![Frame { node: a, next: 0, kmax: usize::MAX }];
    while let Some(top) = frames.last_mut() {
        let u = top.node;
        let list = &csr.adj[u as usize];
        if top.next >= list.len() {
            frames.pop();
            stack.pop();
            edge_stack.pop();
            if u != a {
                on_path[u as usize] = false;
            }
            continue;
        }
        let (v, e) = list[top.next];
        top.next += 1;
        let kmax = top.kmax;
        if blocked[e as usize] || on_path[v as usize] {
            continue;
        }
        if other[v as usize] {
            // v closes the path as d
            for &x in &edge_stack {
                out.edges[x as usize] = true;
            }
            out.edges[e as usize] = true;
            for &x in &stack {
                out.nodes[x as usize] = true;
            }
            out.nodes[v as usize] = true;
            continue;
        }
        // v would become c_j
        let j = stack.len();
        if j > kmax {
            continue;
        }
        if j + 2 > max_path_hops {
            out.truncated += 1;
            continue;
        }
        let d = delta[v as usize];
        if d == UNREACHED {
            // no other-colored node reachable: no d can close this path
            continue;
        }
        let d = d as usize;
        let kmax_v = if d <= j { j + d - 1 } else { usize::MAX };
        stack.push(v);
        edge_stack.push(e);
        on_path[v as usize] = true;
        frames.push(Frame { node: v, next: 0, kmax: kmax.min(kmax_v) });
    }
    out
}

/// The qualifying-path subset of `g` at level depth `level`.
pub fn compute_g_out(g: &NeighborGraph, level: u32, max_path_hops: usize) -> PathSelection {
    let csr = Csr::new(g.edges.iter().copied().collect(), [g.center, g.excluded]);
    let a = csr.index_of(g.center).unwrap();
    let b = csr.index_of(g.excluded).unwrap();
    let found = search(&csr, &vec![false; csr.edges.len()], a, b, level, max_path_hops);
    let mut sel = PathSelection { truncated: found.truncated, ..Default::default() };
    for (i, &inc) in found.nodes.iter().enumerate() {
        if inc && i as u32 != b {
            sel.nodes.insert(csr.ids[i]);
        }
    }
    for (k, &inc) in found.edges.iter().enumerate() {
        if inc && !csr.edges[k].contains(g.excluded) {
            sel.edges.insert(csr.edges[k]);
        }
    }
    sel
}

/// What `table`'s owner sends to neighbour `b`: the selected edges with the
/// shortest transmission path avoiding `b`, plus (optionally) the owner's
/// direct links other than the one to `b`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OutSet {
    pub recipient: Option<NodeId>,
    pub records: BTreeSet<EdgeRecord>,
    pub truncated: usize,
    /// Selected edges for which no record avoiding the recipient was held.
    pub unsendable: usize,
}

impl OutSet {
    pub fn edges(&self) -> BTreeSet<Link> {
        self.records.iter().map(EdgeRecord::edge).collect()
    }
}

/// A table indexed once and queried for every neighbour.
///
/// Every record of an edge mentions both endpoints, and an edge belongs to
/// `G_b` exactly when some record of it avoids `b` or it is a direct link.
/// So `G_b` is the full view with the edges whose every record mentions `b`
/// masked out.
struct TableView<'t> {
    table: &'t RoutingTable,
    csr: Csr,
    // per edge, best first
    records: Vec<Vec<&'t EdgeRecord>>,
    // per node, the edges it masks
    blockers: Vec<Vec<u32>>,
}

impl<'t> TableView<'t> {
    fn new(table: &'t RoutingTable) -> Self {
        let a = table.owner();
        let mut flat: Vec<(Link, &EdgeRecord)> = table.records().map(|r| (r.edge(), r)).collect();
        flat.sort_unstable_by(|x, y| x.0.cmp(&y.0).then_with(|| x.1.preference_key().cmp(&y.1.preference_key())));
        let mut edges: Vec<Link> = flat.iter().map(|p| p.0).collect();
        edges.extend(table.neighbors().iter().map(|&x| Link::new(a, x)));
        edges.sort_unstable();
        edges.dedup();
        let csr = Csr::new(edges, [a]);
        let mut blockers = vec![Vec::new(); csr.ids.len()];
        let mut records = vec![Vec::new(); csr.edges.len()];
        let mut rest = &flat[..];
        for (k, e) in csr.edges.iter().enumerate() {
            let n = rest.iter().take_while(|p| p.0 == *e).count();
            let (list, tail) = rest.split_at(n);
            rest = tail;
            let list: Vec<&EdgeRecord> = list.iter().map(|p| p.1).collect();
            let direct = e.other(a).is_some_and(|x| table.neighbors().contains(&x));
            if !direct && !list.is_empty() {
                let mut common: Vec<NodeId> = list[0].path().to_vec();
                for r in &list[1..] {
                    common.retain(|x| r.mentions(*x));
                }
                // relays outside the view are never recipients
                for i in common.into_iter().filter_map(|x| csr.index_of(x)) {
                    blockers[i as usize].push(k as u32);
                }
            }
            records[k] = list;
        }
        TableView { table, csr, records, blockers }
    }

    fn out_set(&self, b: NodeId, opts: &PropagationOptions) -> OutSet {
        let mut out = OutSet { recipient: Some(b), ..Default::default() };
        let (truncated, unsendable) = self.emit(b, opts, |p| {
            out.records.insert(EdgeRecord::new(p.to_vec()));
        });
        out.truncated = truncated;
        out.unsendable = unsendable;
        out
    }

    /// Feeds every path `a` sends to `b` to `sink`; returns the truncated and
    /// unsendable counts.
    fn emit(&self, b: NodeId, opts: &PropagationOptions, mut sink: impl FnMut(&[NodeId])) -> (usize, usize) {
        let a = self.table.owner();
        let ai = self.csr.index_of(a).unwrap();
        let bi = self.csr.index_of(b).expect("recipient is a direct neighbour");
        let mut blocked = vec![false; self.csr.edges.len()];
        for &k in &self.blockers[bi as usize] {
            blocked[k as usize] = true;
        }
        let found = search(&self.csr, &blocked, ai, bi, self.table.level().depth(), opts.max_path_hops);
        let mut unsendable = 0;
        let mut buf = Vec::new();
        for (k, &inc) in found.edges.iter().enumerate() {
            let e = self.csr.edges[k];
            if !inc || e.contains(b) {
                continue;
            }
            if let Some(x) = e.other(a) {
                sink(&[x, a]);
            } else if let Some(r) = self.records[k].iter().find(|r| !r.mentions(b)) {
                buf.clear();
                buf.extend_from_slice(r.path());
                buf.push(a);
                sink(&buf);
            } else {
                unsendable += 1;
            }
        }
        if opts.send_direct_links {
            for &x in self.table.neighbors() {
                if x != b {
                    sink(&[x, a]);
                }
            }
        }
        (found.truncated, unsendable)
    }
}

pub fn out_set(table: &RoutingTable, b: NodeId, opts: &PropagationOptions) -> OutSet {
    TableView::new(table).out_set(b, opts)
}

/// Members and links of one level network.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelNetwork {
    pub level: LevelRef,
    pub members: BTreeSet<NodeId>,
    pub links: BTreeSet<Link>,
}

impl LevelNetwork {
    pub fn adjacency(&self) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = self.members.iter().map(|&m| (m, BTreeSet::new())).collect();
        for l in &self.links {
            adj.entry(l.lo()).or_default().insert(l.hi());
            adj.entry(l.hi()).or_default().insert(l.lo());
        }
        adj
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationStats {
    pub rounds: usize,
    pub records_added: usize,
    pub records_removed: usize,
    pub truncated_paths: usize,
    pub unsendable_edges: usize,
}

/// Diffs delivered in one round, by recipient.
pub type RoundLog = Vec<(NodeId, TableUpdate)>;

/// Synchronous propagation engine for one level network.
#[derive(Clone, Debug)]
pub struct Propagator {
    net: LevelNetwork,
    opts: PropagationOptions,
    tables: BTreeMap<NodeId, RoutingTable>,
    dirty: BTreeSet<NodeId>,
    stats: PropagationStats,
    log: Vec<RoundLog>,
}

impl Propagator {
    pub fn new(net: LevelNetwork, opts: PropagationOptions) -> Self {
        let adj = net.adjacency();
        let tables: BTreeMap<NodeId, RoutingTable> = adj
            .into_iter()
            .map(|(m, nb)| (m, RoutingTable::with_neighbors(m, net.level, nb)))
            .collect();
        let dirty = tables.keys().copied().collect();
        Propagator { net, opts, tables, dirty, stats: PropagationStats::default(), log: Vec::new() }
    }

    pub fn network(&self) -> &LevelNetwork {
        &self.net
    }

    pub fn tables(&self) -> &BTreeMap<NodeId, RoutingTable> {
        &self.tables
    }

    pub fn into_tables(self) -> BTreeMap<NodeId, RoutingTable> {
        self.tables
    }

    pub fn stats(&self) -> &PropagationStats {
        &self.stats
    }

    pub fn log(&self) -> &[RoundLog] {
        &self.log
    }

    /// Every node whose table changed last round recomputes what it sends to
    /// each neighbour; the differences are delivered at the end of the round.
    /// Returns the number of records added and removed.
    pub fn round(&mut self) -> (usize, usize) {
        self.stats.rounds += 1;
        let mut updates: BTreeMap<NodeId, TableUpdate> = BTreeMap::new();
        for &a in &self.dirty {
            let table = &self.tables[&a];
            let view = TableView::new(table);
            for &b in table.neighbors() {
                let empty = BTreeSet::new();
                let current = self.tables.get(&b).and_then(|t| t.records_from_set(a)).unwrap_or(&empty);
                let mut added: Vec<EdgeRecord> = Vec::new();
                let mut removed: Vec<EdgeRecord> = Vec::new();
                let (truncated, unsendable) = if self.opts.withdraw {
                    let out = view.out_set(b, &self.opts);
                    added.extend(out.records.difference(current).cloned());
                    removed.extend(current.difference(&out.records).cloned());
                    (out.truncated, out.unsendable)
                } else {
                    view.emit(b, &self.opts, |p| {
                        if !current.contains(p) {
                            added.push(EdgeRecord::new(p.to_vec()));
                        }
                    })
                };
                added.sort();
                added.dedup();
                self.stats.truncated_paths += truncated;
                self.stats.unsendable_edges += unsendable;
                if !added.is_empty() || !removed.is_empty() {
                    let u = updates.entry(b).or_default();
                    u.added.extend(added);
                    u.removed.extend(removed);
                }
            }
        }
        let (mut added, mut removed) = (0, 0);
        self.dirty.clear();
        for (b, u) in &updates {
            added += u.added.len();
            removed += u.removed.len();
            self.tables.get_mut(b).expect("update for a member").merge_update(u);
            self.dirty.insert(*b);
        }
        self.stats.records_added += added;
        self.stats.records_removed += removed;
        if self.opts.record_log {
            self.log.push(updates.into_iter().collect());
        }
        (added, removed)
    }

    pub fn round_cap(&self) -> usize {
        4 * self.net.members.len().max(1)
    }

    /// Runs rounds until one changes nothing. The quiet round is counted.
    pub fn run(&mut self) -> Result<usize> {
        let start = self.stats.rounds;
        let cap = self.round_cap();
        loop {
            if self.stats.rounds - start >= cap {
                return Err(Error::NonConvergence {
                    level: self.net.level,
                    rounds: self.stats.rounds - start,
                    dump: self.diagnostic_dump(),
                });
            }
            let (added, removed) = self.round();
            if added == 0 && removed == 0 {
                return Ok(self.stats.rounds - start);
            }
        }
    }

    /// Removes links, purges stale records along every recorded path and
    /// leaves the engine ready to re-converge with [`Propagator::run`].
    pub fn remove_links(&mut self, links: &BTreeSet<Link>) {
        let mut queue: VecDeque<(NodeId, Vec<EdgeRecord>)> = VecDeque::new();
        for &l in links {
            if !self.net.links.remove(&l) {
                continue;
            }
            for x in [l.lo(), l.hi()] {
                if let Some(t) = self.tables.get_mut(&x) {
                    self.dirty.insert(x);
                    queue.extend(t.purge_stale(l));
                }
            }
        }
        // Other holders learn about the break only through the notices.
        while let Some((to, list)) = queue.pop_front() {
            if let Some(t) = self.tables.get_mut(&to) {
                let next = t.cascade_removal(&list);
                self.dirty.insert(to);
                queue.extend(next);
            }
        }
    }

    fn diagnostic_dump(&self) -> String {
        let mut s = String::new();
        for (id, t) in &self.tables {
            s.push_str(&format!("# {id} ({} records)\n", t.record_count()));
            s.push_str(&t.dump());
        }
        s
    }
}

/// Converged tables of one level network.
#[derive(Clone, Debug)]
pub struct Convergence {
    pub tables: BTreeMap<NodeId, RoutingTable>,
    pub stats: PropagationStats,
    pub log: Vec<RoundLog>,
}

pub fn run_to_fixed_point(net: &LevelNetwork, opts: &PropagationOptions) -> Result<Convergence> {
    let mut p = Propagator::new(net.clone(), opts.clone());
    p.run()?;
    Ok(Convergence { stats: p.stats.clone(), log: std::mem::take(&mut p.log), tables: p.tables })
}

/// Rebuilds tables by applying a delivery log to fresh tables.
pub fn replay(net: &LevelNetwork, log: &[RoundLog]) -> BTreeMap<NodeId, RoutingTable> {
    let mut tables = Propagator::new(net.clone(), PropagationOptions::default()).into_tables();
    for round in log {
        for (to, u) in round {
            tables.get_mut(to).expect("member").merge_update(u);
        }
    }
    tables
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(v: u64) -> NodeId {
        NodeId::new(v, 5).unwrap()
    }

    #[test]
    fn sole_neighbor_graph_is_one_edge() {
        let t = RoutingTable::with_neighbors(n(0), LevelRef::ROOT, [n(1)]);
        let g = build_neighbor_graph(&t, n(1));
        assert_eq!(g.edges(), &BTreeSet::from([Link::new(n(0), n(1))]));
    }

    #[test]
    fn monochrome_star_sends_nothing() {
        // center 00000 with white leaves: no black d anywhere
        let t = RoutingTable::with_neighbors(n(0), LevelRef::ROOT, [n(1), n(2), n(3)]);
        let g = build_neighbor_graph(&t, n(1));
        assert!(compute_g_out(&g, 0, 32).edges.is_empty());
    }

    #[test]
    fn single_node_converges_in_one_round() {
        let net = LevelNetwork { level: LevelRef::ROOT, members: [n(3)].into(), links: BTreeSet::new() };
        let c = run_to_fixed_point(&net, &PropagationOptions::default()).unwrap();
        assert_eq!(c.stats.rounds, 1);
        assert_eq!(c.tables[&n(3)].record_count(), 0);
    }
}
