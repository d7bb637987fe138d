//! Level ascent: which same-colored nodes each node links to on the next
//! level, and the recursive construction of every level network.
//!
//! With `a` the deciding node and "same color" meaning `a`'s color at the
//! current level, a node connects to
//!
//! 1. its same-colored direct neighbours;
//! 2. for every other-colored neighbour `w`, the targets produced by
//!    [`connect_inside`] over the same-colored neighbours of `w`;
//! 3. across every path `a - b - c1 .. ck - d` (k >= 1) through
//!    other-colored nodes, where the inner `c_j` have no same-colored
//!    neighbours and no same-colored node is strictly closer to a `c_j` than
//!    both path ends, the far side of the XOR-closest pair between the
//!    same-colored neighbours of `b` and of `ck`, when `a` is the near side.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{IndexedGraph, UNREACHED};
use crate::idspace::{LevelRef, NodeId};
use crate::levels::RoutingTable;
use crate::propagation::{LevelNetwork, PropagationOptions, PropagationStats, Propagator};
use crate::topology::{Link, PhysicalNetwork};

/// Which endpoint a long-range path connects `a` to.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ConnectTarget {
    /// The path's far end `d`.
    D,
    /// The XOR partner `e2` among the same-colored neighbours of `ck`.
    #[default]
    E2,
}

impl FromStr for ConnectTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "d" => Ok(ConnectTarget::D),
            "e2" => Ok(ConnectTarget::E2),
            _ => Err(Error::Config(format!("connect target must be `d` or `e2`, got `{s}`"))),
        }
    }
}

impl fmt::Display for ConnectTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConnectTarget::D => "d",
            ConnectTarget::E2 => "e2",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    pub propagation: PropagationOptions,
    pub connect_target: ConnectTarget,
    /// Extra nearest same-colored nodes each node links to on the next level.
    pub extra_k: usize,
    /// Deepest level to build; `None` builds until every network is a singleton.
    pub max_depth: Option<u32>,
    /// Keep converged routing tables (needed for routing).
    pub keep_tables: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            propagation: PropagationOptions::default(),
            connect_target: ConnectTarget::default(),
            extra_k: 0,
            max_depth: None,
            keep_tables: true,
        }
    }
}

/// XOR-closest cross pair; ties go to the smaller XOR, then the smaller pair.
pub fn closest_pair(left: &[NodeId], right: &[NodeId]) -> Option<(NodeId, NodeId)> {
    let mut best: Option<(u64, NodeId, NodeId)> = None;
    for &x in left {
        for &y in right {
            let key = (x.xor(y), x, y);
            if best.is_none_or(|b| key < b) {
                best = Some(key);
            }
        }
    }
    best.map(|(_, x, y)| (x, y))
}

/// Splits `nodes` on successive address bits below the level-`level` color
/// bit and links the XOR-closest pair across each split. Returns the nodes
/// `a` links to.
///
/// The first split uses bit `level + 1`; splitting at bit `level` itself would
/// put every input (all share the color bit) on one side. Bits on which all
/// remaining nodes agree are skipped, so the union over all members is a
/// spanning tree of `nodes`.
pub fn connect_inside(a: NodeId, nodes: &[NodeId], level: u32) -> BTreeSet<NodeId> {
    let mut out = BTreeSet::new();
    let mut current: Vec<NodeId> = nodes.to_vec();
    current.sort_unstable();
    current.dedup();
    let mut bit = level + 1;
    while bit < a.width() as u32 {
        if current.len() < 2 {
            break;
        }
        let (white, black): (Vec<NodeId>, Vec<NodeId>) = current.iter().partition(|x| x.bit(bit) == 0);
        let Some((w, b)) = closest_pair(&white, &black) else {
            // everyone agrees on this bit; stopping here would strand nodes
            // that differ only further down
            bit += 1;
            continue;
        };
        if a.bit(bit) == 0 {
            if w == a {
                out.insert(b);
            }
            current = white;
        } else {
            if b == a {
                out.insert(w);
            }
            current = black;
        }
        bit += 1;
    }
    out
}

/// Why a target was selected.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Reason {
    Neighbor,
    Inside,
    LongRange,
    Nearest,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub reason: Reason,
    /// Current-level path from the selecting node to the target.
    pub realization: Vec<NodeId>,
}

fn offer(out: &mut BTreeMap<NodeId, Selection>, target: NodeId, reason: Reason, realization: Vec<NodeId>) {
    use std::collections::btree_map::Entry;
    match out.entry(target) {
        Entry::Vacant(v) => {
            v.insert(Selection { reason, realization });
        }
        Entry::Occupied(mut o) => {
            let cur = o.get();
            if (realization.len(), &realization) < (cur.realization.len(), &cur.realization) {
                o.insert(Selection { reason: reason.min(cur.reason), realization });
            }
        }
    }
}

/// Next-level targets of `table`'s owner, each with the current-level path
/// that realizes the new link.
pub fn select_connections(table: &RoutingTable, opts: &BuildOptions) -> BTreeMap<NodeId, Selection> {
    let a = table.owner();
    let level = table.level().depth();
    let mut out = BTreeMap::new();
    if level >= a.width() as u32 {
        return out;
    }
    let own = a.color(level);
    let g = IndexedGraph::from_edges(table.visible_edges(), [a]);
    let same = |x: NodeId| x.color(level) == own;
    let same_neighbors = |x: NodeId| -> Vec<NodeId> { g.neighbors_of(x).filter(|&y| same(y)).collect() };

    for &x in table.neighbors() {
        if same(x) {
            offer(&mut out, x, Reason::Neighbor, vec![a, x]);
        } else {
            let s = same_neighbors(x);
            for t in connect_inside(a, &s, level) {
                offer(&mut out, t, Reason::Inside, vec![a, x, t]);
            }
        }
    }

    long_range(&g, a, level, opts, &mut out);

    if opts.extra_k > 0 {
        let ai = g.index_of(a).unwrap();
        let dist = g.bfs([ai]);
        let mut cands: Vec<(u32, u64, NodeId)> = (0..g.len() as u32)
            .filter(|&i| i != ai && dist[i as usize] != UNREACHED && same(g.id(i)))
            .map(|i| (dist[i as usize], g.id(i).xor(a), g.id(i)))
            .collect();
        cands.sort_unstable();
        for (_, _, t) in cands.into_iter().take(opts.extra_k) {
            if !out.contains_key(&t) {
                let path = g.shortest_path(a, t).expect("reachable");
                offer(&mut out, t, Reason::Nearest, path);
            }
        }
    }
    out
}

fn long_range(g: &IndexedGraph, a: NodeId, level: u32, opts: &BuildOptions, out: &mut BTreeMap<NodeId, Selection>) {
    let own = a.color(level);
    let same = |i: u32| g.id(i).color(level) == own;
    let ai = g.index_of(a).unwrap();
    let delta = g.bfs((0..g.len() as u32).filter(|&i| same(i)));
    let has_same_neighbor: Vec<bool> = (0..g.len() as u32).map(|i| g.adj(i).iter().any(|&j| same(j))).collect();
    let same_nbrs = |i: u32| -> Vec<NodeId> { g.adj(i).iter().filter(|&&j| same(j)).map(|&j| g.id(j)).collect() };
    let mut pair_cache: BTreeMap<(u32, u32), Option<(NodeId, NodeId)>> = BTreeMap::new();
    let max_hops = opts.propagation.max_path_hops;

    let mut on_path = vec![false; g.len()];
    on_path[ai as usize] = true;
    for &b in g.adj(ai) {
        if same(b) {
            continue;
        }
        // path = [a, b, c1, ...]; frames iterate the neighbours of the last node
        let mut path: Vec<u32> = vec![ai, b];
        on_path[b as usize] = true;
        let mut frames: Vec<(u32, usize, usize)> = vec![(b, 0, usize::MAX)];
        while let Some(top) = frames.last_mut() {
            let (u, next, kmax) = *top;
            if next >= g.adj(u).len() {
                frames.pop();
                path.pop();
                on_path[u as usize] = false;
                continue;
            }
            top.1 += 1;
            let v = g.adj(u)[next];
            if on_path[v as usize] {
                continue;
            }
            let k = path.len() - 2;
            if same(v) {
                if k == 0 {
                    // a - b - d is the inside-connection case
                    continue;
                }
                let e = *pair_cache.entry((b, u)).or_insert_with(|| closest_pair(&same_nbrs(b), &same_nbrs(u)));
                let Some((e1, e2)) = e else { continue };
                if e1 != a {
                    continue;
                }
                let mut realization: Vec<NodeId> = path.iter().map(|&i| g.id(i)).collect();
                match opts.connect_target {
                    ConnectTarget::D => {
                        realization.push(g.id(v));
                        offer(out, g.id(v), Reason::LongRange, realization);
                    }
                    ConnectTarget::E2 => {
                        if e2 != a {
                            realization.push(e2);
                            offer(out, e2, Reason::LongRange, realization);
                        }
                    }
                }
                continue;
            }
            // v becomes c_{k+1}; the current last node turns into an inner node
            if k >= 1 && has_same_neighbor[u as usize] {
                continue;
            }
            let j = k + 1;
            if j > kmax || j + 2 > max_hops {
                continue;
            }
            let dv = delta[v as usize];
            let kmax_v = if dv != UNREACHED && (dv as usize) <= j { j + dv as usize - 1 } else { usize::MAX };
            path.push(v);
            on_path[v as usize] = true;
            frames.push((v, 0, kmax.min(kmax_v)));
        }
        on_path[b as usize] = false;
    }
}

/// A next-level link and its realization one built level up.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VirtualLink {
    pub link: Link,
    /// Level network the link belongs to.
    pub level: LevelRef,
    /// Level network the realization runs through (`None` for physical links).
    pub via: Option<LevelRef>,
    /// Node sequence from `link.lo()` to `link.hi()`.
    pub realization: Vec<NodeId>,
}

impl VirtualLink {
    /// The realization oriented from `from`.
    pub fn path_from(&self, from: NodeId) -> Vec<NodeId> {
        if from == self.link.lo() {
            self.realization.clone()
        } else {
            self.realization.iter().rev().copied().collect()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelInfo {
    pub level: LevelRef,
    pub members: BTreeSet<NodeId>,
    pub links: BTreeMap<Link, VirtualLink>,
    pub tables: BTreeMap<NodeId, RoutingTable>,
    pub stats: PropagationStats,
}

impl LevelInfo {
    pub fn network(&self) -> LevelNetwork {
        LevelNetwork { level: self.level, members: self.members.clone(), links: self.links.keys().copied().collect() }
    }

    pub fn average_degree(&self) -> f64 {
        if self.members.is_empty() {
            0.0
        } else {
            2.0 * self.links.len() as f64 / self.members.len() as f64
        }
    }

    pub fn degree(&self, x: NodeId) -> usize {
        self.links.keys().filter(|l| l.contains(x)).count()
    }

    pub fn summary(&self) -> LevelSummary {
        LevelSummary {
            prefix: self.level.to_binary(),
            depth: self.level.depth(),
            members: self.members.len(),
            links: self.links.len(),
            average_degree: self.average_degree(),
            rounds: self.stats.rounds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSummary {
    pub prefix: String,
    pub depth: u32,
    pub members: usize,
    pub links: usize,
    pub average_degree: f64,
    pub rounds: usize,
}

/// Every level network built over a physical network.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MultiLevelNetwork {
    physical: PhysicalNetwork,
    levels: BTreeMap<LevelRef, LevelInfo>,
}

impl MultiLevelNetwork {
    /// Assembles a network from explicit level link sets. Each link is
    /// realized by the lexicographically smallest shortest path in the
    /// nearest present ancestor level, and each level's tables are converged.
    pub fn from_level_links(
        physical: PhysicalNetwork,
        level_links: BTreeMap<LevelRef, BTreeSet<Link>>,
        opts: &PropagationOptions,
    ) -> Result<Self> {
        let mut net = MultiLevelNetwork { physical, levels: BTreeMap::new() };
        let all: Vec<NodeId> = net.physical.ids().collect();
        let root_links = net.physical.links().clone();
        let mut specs = level_links;
        specs.insert(LevelRef::ROOT, root_links);
        for (level, links) in specs {
            let members: BTreeSet<NodeId> = all.iter().copied().filter(|&x| level.contains(x)).collect();
            let via = net.nearest_ancestor(level);
            let mut vlinks = BTreeMap::new();
            for l in links {
                if !members.contains(&l.lo()) || !members.contains(&l.hi()) {
                    return Err(Error::Internal(format!("link {l} leaves level {level}")));
                }
                let realization = match via {
                    None => vec![l.lo(), l.hi()],
                    Some(p) => {
                        let g = IndexedGraph::from_edges(net.levels[&p].links.keys().copied(), []);
                        g.shortest_path(l.lo(), l.hi())
                            .ok_or_else(|| Error::Internal(format!("{l} not realizable in {p}")))?
                    }
                };
                vlinks.insert(l, VirtualLink { link: l, level, via, realization });
            }
            let lnet = LevelNetwork { level, members: members.clone(), links: vlinks.keys().copied().collect() };
            let mut p = Propagator::new(lnet, opts.clone());
            p.run()?;
            let stats = p.stats().clone();
            net.levels.insert(level, LevelInfo { level, members, links: vlinks, tables: p.into_tables(), stats });
        }
        Ok(net)
    }

    pub fn physical(&self) -> &PhysicalNetwork {
        &self.physical
    }

    pub fn levels(&self) -> &BTreeMap<LevelRef, LevelInfo> {
        &self.levels
    }

    pub fn levels_mut(&mut self) -> &mut BTreeMap<LevelRef, LevelInfo> {
        &mut self.levels
    }

    pub fn level(&self, level: LevelRef) -> Option<&LevelInfo> {
        self.levels.get(&level)
    }

    /// Closest strict ancestor of `level` that has been built.
    pub fn nearest_ancestor(&self, level: LevelRef) -> Option<LevelRef> {
        let mut cur = level.parent();
        while let Some(p) = cur {
            if self.levels.contains_key(&p) {
                return Some(p);
            }
            cur = p.parent();
        }
        None
    }

    /// Deepest built level of depth at most `max_depth` that contains `x`.
    pub fn deepest_level(&self, x: NodeId, max_depth: u32) -> Option<LevelRef> {
        (0..=max_depth.min(x.width() as u32)).rev().map(|d| LevelRef::of(x, d)).find(|l| self.levels.contains_key(l))
    }

    pub fn max_depth(&self) -> u32 {
        self.levels.keys().map(|l| l.depth()).max().unwrap_or(0)
    }

    pub fn summaries(&self) -> Vec<LevelSummary> {
        self.levels.values().map(LevelInfo::summary).collect()
    }

    /// Mean degree over all members of all level networks at each depth.
    pub fn degree_by_depth(&self) -> BTreeMap<u32, (f64, usize)> {
        let mut acc: BTreeMap<u32, (usize, usize)> = BTreeMap::new();
        for info in self.levels.values() {
            let e = acc.entry(info.level.depth()).or_default();
            e.0 += 2 * info.links.len();
            e.1 += info.members.len();
        }
        acc.into_iter().map(|(d, (ends, m))| (d, (ends as f64 / m as f64, m))).collect()
    }
}

/// Symmetrized next-level links of both children of `level`, indexed by the
/// child's bit. When both ends select each other the shorter realization
/// wins, then the lexicographically smaller.
pub fn child_links(
    level: LevelRef,
    tables: &BTreeMap<NodeId, RoutingTable>,
    opts: &BuildOptions,
) -> [BTreeMap<Link, VirtualLink>; 2] {
    let depth = level.depth();
    let mut out: [BTreeMap<Link, VirtualLink>; 2] = [BTreeMap::new(), BTreeMap::new()];
    for (&a, table) in tables {
        let color = a.bit(depth) as usize;
        let child = level.child(color as u8);
        for (t, sel) in select_connections(table, opts) {
            let link = Link::new(a, t);
            let realization =
                if a == link.lo() { sel.realization } else { sel.realization.into_iter().rev().collect() };
            let entry = out[color].entry(link).or_insert_with(|| VirtualLink {
                link,
                level: child,
                via: Some(level),
                realization: realization.clone(),
            });
            if (realization.len(), &realization) < (entry.realization.len(), &entry.realization) {
                entry.realization = realization;
            }
        }
    }
    out
}

/// Builds every level network over a connected physical network.
pub fn build_multilevel(physical: &PhysicalNetwork, opts: &BuildOptions) -> Result<MultiLevelNetwork> {
    if physical.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let comps = physical.components().len();
    if comps > 1 {
        return Err(Error::Disconnected { components: comps });
    }
    let width = physical.width_bits() as u32;
    let mut net = MultiLevelNetwork { physical: physical.clone(), levels: BTreeMap::new() };

    let root_links: BTreeMap<Link, VirtualLink> = physical
        .links()
        .iter()
        .map(|&l| (l, VirtualLink { link: l, level: LevelRef::ROOT, via: None, realization: vec![l.lo(), l.hi()] }))
        .collect();
    let mut queue: VecDeque<(LevelRef, BTreeSet<NodeId>, BTreeMap<Link, VirtualLink>)> =
        VecDeque::from([(LevelRef::ROOT, physical.ids().collect(), root_links)]);

    while let Some((level, members, links)) = queue.pop_front() {
        let lnet = LevelNetwork { level, members: members.clone(), links: links.keys().copied().collect() };
        let started = Instant::now();
        let mut prop = Propagator::new(lnet, opts.propagation.clone());
        prop.run()?;
        let stats = prop.stats().clone();
        let tables = prop.into_tables();
        log::debug!(
            "level {level}: {} members, {} links, {} rounds, {} records, {:.2?}",
            members.len(),
            links.len(),
            stats.rounds,
            stats.records_added,
            started.elapsed()
        );

        let depth = level.depth();
        let terminal = members.len() <= 1 || depth >= width || opts.max_depth.is_some_and(|m| depth >= m);
        if !terminal {
            let started = Instant::now();
            let child_links = child_links(level, &tables, opts);
            log::debug!("level {level}: selection {:.2?}", started.elapsed());
            for (bit, links) in child_links.into_iter().enumerate() {
                let child = level.child(bit as u8);
                let child_members: BTreeSet<NodeId> = members.iter().copied().filter(|x| child.contains(*x)).collect();
                if !child_members.is_empty() {
                    queue.push_back((child, child_members, links));
                }
            }
        }
        let tables = if opts.keep_tables { tables } else { BTreeMap::new() };
        net.levels.insert(level, LevelInfo { level, members, links, tables, stats });
    }
    Ok(net)
}
