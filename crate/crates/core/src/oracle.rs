//! Brute-force references and the small hand-drawn networks used to check
//! the fast implementations. Exponential by design; never on the hot path.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use crate::ascent::{closest_pair, BuildOptions, ConnectTarget, MultiLevelNetwork};
use crate::error::{Error, Result};
use crate::idspace::{LevelRef, NodeId};
use crate::levels::{EdgeRecord, RoutingTable};
use crate::propagation::PropagationOptions;
use crate::topology::{Link, PhysicalNetwork};

pub const G_OUT_CAP: usize = 16;
pub const SELECT_CAP: usize = 12;

pub type Adjacency = BTreeMap<NodeId, BTreeSet<NodeId>>;

pub fn adjacency(edges: impl IntoIterator<Item = Link>, extra: impl IntoIterator<Item = NodeId>) -> Adjacency {
    let mut adj: Adjacency = extra.into_iter().map(|x| (x, BTreeSet::new())).collect();
    for e in edges {
        adj.entry(e.lo()).or_default().insert(e.hi());
        adj.entry(e.hi()).or_default().insert(e.lo());
    }
    adj
}

/// Hop count from `u` to `v`, `None` when unreachable.
pub fn bfs_distance(adj: &Adjacency, u: NodeId, v: NodeId) -> Option<usize> {
    bfs_all(adj, u).get(&v).copied()
}

fn bfs_all(adj: &Adjacency, u: NodeId) -> BTreeMap<NodeId, usize> {
    let mut dist = BTreeMap::from([(u, 0)]);
    let mut q = VecDeque::from([u]);
    while let Some(x) = q.pop_front() {
        let dx = dist[&x];
        for &y in adj.get(&x).into_iter().flatten() {
            if let std::collections::btree_map::Entry::Vacant(e) = dist.entry(y) {
                e.insert(dx + 1);
                q.push_back(y);
            }
        }
    }
    dist
}

fn all_pairs(adj: &Adjacency) -> BTreeMap<NodeId, BTreeMap<NodeId, usize>> {
    adj.keys().map(|&u| (u, bfs_all(adj, u))).collect()
}

/// Connected components, each sorted, ordered by smallest member.
pub fn brute_connectivity(adj: &Adjacency) -> Vec<Vec<NodeId>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &u in adj.keys() {
        if seen.contains(&u) {
            continue;
        }
        let comp: Vec<NodeId> = bfs_all(adj, u).into_keys().collect();
        seen.extend(comp.iter().copied());
        out.push(comp);
    }
    out
}

/// Every simple path starting with `prefix` that continues through nodes
/// accepted by `inner` and ends at a node accepted by `end`. The callback
/// sees each complete path.
fn enumerate_paths(
    adj: &Adjacency,
    prefix: Vec<NodeId>,
    inner: &dyn Fn(NodeId) -> bool,
    end: &dyn Fn(NodeId) -> bool,
    visit: &mut dyn FnMut(&[NodeId]),
) {
    let mut path = prefix;
    fn rec(
        adj: &Adjacency,
        path: &mut Vec<NodeId>,
        inner: &dyn Fn(NodeId) -> bool,
        end: &dyn Fn(NodeId) -> bool,
        visit: &mut dyn FnMut(&[NodeId]),
    ) {
        let u = *path.last().unwrap();
        for &v in &adj[&u] {
            if path.contains(&v) {
                continue;
            }
            path.push(v);
            if end(v) {
                visit(path);
            }
            if inner(v) {
                rec(adj, path, inner, end, visit);
            }
            path.pop();
        }
    }
    rec(adj, &mut path, inner, end, visit);
}

/// Reference for the outgoing selection: nodes and edges of every path
/// `b - a - c1 .. ck - d` in the graph given by `edges`, checked literally,
/// with `b` removed.
pub fn brute_g_out(
    a: NodeId,
    b: NodeId,
    edges: &BTreeSet<Link>,
    level: u32,
) -> Result<(BTreeSet<NodeId>, BTreeSet<Link>)> {
    let adj = adjacency(edges.iter().copied(), [a, b]);
    if adj.len() > G_OUT_CAP {
        return Err(Error::OracleCap { size: adj.len(), cap: G_OUT_CAP });
    }
    let own = a.color(level);
    let dist = all_pairs(&adj);
    let others: Vec<NodeId> = adj.keys().copied().filter(|x| x.color(level) != own).collect();
    let mut nodes = BTreeSet::new();
    let mut links = BTreeSet::new();
    let inner = |x: NodeId| x.color(level) == own;
    let end = |x: NodeId| x.color(level) != own;
    enumerate_paths(&adj, vec![b, a], &inner, &end, &mut |p: &[NodeId]| {
        // p = [b, a, c1, .., ck, d]
        let len = p.len();
        for (idx, &c) in p.iter().enumerate().take(len - 1).skip(2) {
            let to_d = len - 1 - idx;
            let to_b = idx;
            if others.iter().any(|&f| dist[&f].get(&c).is_some_and(|&x| x < to_d && x < to_b)) {
                return;
            }
        }
        nodes.extend(p[1..].iter().copied());
        links.extend(p[1..].windows(2).map(|w| Link::new(w[0], w[1])));
    });
    Ok((nodes, links))
}

/// Direct transcription of the recursive splitting procedure, splitting at
/// bit `level + 1 + l` and passing over bits that split nothing.
pub fn reference_connect_inside(a: NodeId, nodes: &BTreeSet<NodeId>, level: u32) -> BTreeSet<NodeId> {
    fn go(a: NodeId, nodes: &BTreeSet<NodeId>, l: u32, level: u32, out: &mut BTreeSet<NodeId>) {
        let bit = level + 1 + l;
        if bit >= a.width() as u32 {
            return;
        }
        let white: BTreeSet<NodeId> = nodes.iter().copied().filter(|x| x.bit(bit) == 0).collect();
        let black: BTreeSet<NodeId> = nodes.iter().copied().filter(|x| x.bit(bit) == 1).collect();
        if nodes.len() < 2 {
            return;
        }
        if white.is_empty() || black.is_empty() {
            return go(a, nodes, l + 1, level, out);
        }
        let mut best = None;
        for &x in &white {
            for &y in &black {
                let key = (x.xor(y), x, y);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        let (_, w, b) = best.unwrap();
        if a.bit(bit) == 0 {
            if w == a {
                out.insert(b);
            }
            go(a, &white, l + 1, level, out);
        } else {
            if b == a {
                out.insert(w);
            }
            go(a, &black, l + 1, level, out);
        }
    }
    let mut out = BTreeSet::new();
    go(a, nodes, 0, level, &mut out);
    out
}

/// Reference for the connection targets of `table`'s owner (without the
/// nearest-K extras): all three rules applied to every enumerated path.
pub fn reference_select_connections(table: &RoutingTable, target: ConnectTarget) -> Result<BTreeSet<NodeId>> {
    let a = table.owner();
    let level = table.level().depth();
    let adj = adjacency(table.visible_edges(), [a]);
    if adj.len() > SELECT_CAP {
        return Err(Error::OracleCap { size: adj.len(), cap: SELECT_CAP });
    }
    let own = a.color(level);
    let same = |x: NodeId| x.color(level) == own;
    let same_nbrs = |x: NodeId| -> Vec<NodeId> { adj[&x].iter().copied().filter(|&y| same(y)).collect() };
    let dist = all_pairs(&adj);
    let sames: Vec<NodeId> = adj.keys().copied().filter(|&x| same(x)).collect();

    let mut out = BTreeSet::new();
    for &w in table.neighbors() {
        if same(w) {
            out.insert(w);
        } else {
            let s: BTreeSet<NodeId> = same_nbrs(w).into_iter().collect();
            out.extend(reference_connect_inside(a, &s, level));
        }
    }
    let inner = |x: NodeId| !same(x);
    let end = |x: NodeId| same(x);
    // paths a - b - c1 .. ck - d, k >= 1
    let mut paths = Vec::new();
    enumerate_paths(&adj, vec![a], &inner, &end, &mut |p: &[NodeId]| paths.push(p.to_vec()));
    for p in paths {
        let len = p.len();
        if len < 4 || p[1..len - 1].iter().any(|&x| same(x)) {
            continue;
        }
        let k = len - 3;
        let cs = &p[2..len - 1];
        if cs[..k - 1].iter().any(|&c| !same_nbrs(c).is_empty()) {
            continue;
        }
        let blocked = cs.iter().enumerate().any(|(j0, &c)| {
            let j = j0 + 1;
            let (to_d, to_a) = (k + 1 - j, j + 1);
            sames.iter().any(|&f| dist[&f].get(&c).is_some_and(|&x| x < to_d && x < to_a))
        });
        if blocked {
            continue;
        }
        let Some((e1, e2)) = closest_pair(&same_nbrs(p[1]), &same_nbrs(cs[k - 1])) else {
            continue;
        };
        if e1 != a {
            continue;
        }
        match target {
            ConnectTarget::D => {
                out.insert(p[len - 1]);
            }
            ConnectTarget::E2 => {
                if e2 != a {
                    out.insert(e2);
                }
            }
        }
    }
    Ok(out)
}

/// Level networks of a build that fall apart into several components.
pub fn disconnected_levels(net: &MultiLevelNetwork) -> Vec<LevelRef> {
    net.levels()
        .values()
        .filter(|info| brute_connectivity(&adjacency(info.links.keys().copied(), info.members.iter().copied())).len() > 1)
        .map(|info| info.level)
        .collect()
}

/// Tables that see no node of the other color although their level holds
/// both colors. Needs a build that kept its tables.
pub fn blind_tables(net: &MultiLevelNetwork) -> Vec<(LevelRef, NodeId)> {
    let mut out = Vec::new();
    for info in net.levels().values() {
        let i = info.level.depth();
        let Some(first) = info.members.first() else { continue };
        if info.members.len() < 2 || info.members.iter().all(|m| m.color(i) == first.color(i)) {
            continue;
        }
        for (&a, t) in &info.tables {
            if !t.visible_nodes().iter().any(|x| x.color(i) != a.color(i)) {
                out.push((info.level, a));
            }
        }
    }
    out
}

/// The three drawn networks shipped with the crate.
pub mod fixtures {
    use super::*;

    pub const F2_NET: &str = include_str!("../fixtures/f2.net");
    pub const F3_NET: &str = include_str!("../fixtures/f3.net");
    pub const F4_NET: &str = include_str!("../fixtures/f4.net");

    fn load(text: &str, name: &str) -> PhysicalNetwork {
        PhysicalNetwork::from_text(text, Path::new(name)).expect("bundled fixture parses")
    }

    fn id5(v: u64) -> NodeId {
        NodeId::new(v, 5).unwrap()
    }

    /// 12-node propagation example; labels 4, 6 and 7 are black.
    pub fn f3() -> PhysicalNetwork {
        load(F3_NET, "f3.net")
    }

    pub fn f3_id(label: u64) -> NodeId {
        id5(if matches!(label, 4 | 6 | 7) { 16 + label } else { label })
    }

    pub fn f3_label(id: NodeId) -> u64 {
        id.value() & 15
    }

    /// Node 0's converged table edges, by label.
    pub const F3_TABLE_0: [(u64, u64); 8] = [(0, 1), (1, 2), (0, 4), (1, 5), (2, 6), (4, 5), (5, 6), (4, 8)];

    /// 16-node tree whose black nodes gain next-level links.
    pub fn f4() -> PhysicalNetwork {
        load(F4_NET, "f4.net")
    }

    const F4_IDS: [u64; 16] = [0, 16, 20, 29, 24, 5, 26, 23, 8, 31, 19, 11, 12, 27, 21, 18];

    pub fn f4_id(label: u64) -> NodeId {
        id5(F4_IDS[label as usize])
    }

    pub fn f4_label(id: NodeId) -> u64 {
        F4_IDS.iter().position(|&v| v == id.value()).expect("fixture node") as u64
    }

    /// Expected links among the black nodes, by label.
    pub const F4_BLACK_LINKS: [(u64, u64); 10] =
        [(1, 2), (3, 4), (4, 1), (4, 6), (6, 7), (7, 10), (9, 10), (2, 14), (14, 15), (15, 13)];

    pub fn f4_options() -> BuildOptions {
        BuildOptions { connect_target: ConnectTarget::E2, max_depth: Some(1), ..Default::default() }
    }

    /// 4x4 grid; grid index `i` sits at column `i % 4`, row `i / 4`.
    pub fn f2() -> PhysicalNetwork {
        load(F2_NET, "f2.net")
    }

    const F2_IDS: [&str; 16] = [
        "11100", "01100", "10010", "11001", "10001", "11111", "01010", "00110", "10110", "01011", "11010", "01001", "11011",
        "11000", "00111", "01000",
    ];

    pub fn f2_id(index: usize) -> NodeId {
        F2_IDS[index].parse().unwrap()
    }

    const F2_LEVEL1: [(usize, usize); 10] =
        [(1, 6), (1, 7), (1, 9), (6, 7), (6, 9), (7, 11), (9, 11), (9, 14), (11, 15), (14, 15)];
    const F2_LEVEL3: [(usize, usize); 5] = [(6, 9), (9, 15), (6, 11), (9, 11), (11, 15)];

    // the parts of three tables the routing walk-through relies on
    const F2_TABLE_0: [(usize, usize); 9] = [(0, 1), (1, 2), (4, 5), (5, 6), (8, 9), (0, 4), (1, 5), (4, 8), (5, 9)];
    const F2_TABLE_1: [(usize, usize); 8] = [(1, 6), (1, 7), (1, 9), (6, 7), (6, 9), (7, 11), (9, 11), (9, 14)];
    const F2_TABLE_6: [(usize, usize); 4] = [(6, 9), (6, 11), (9, 11), (9, 15)];

    fn links(pairs: &[(usize, usize)]) -> BTreeSet<Link> {
        pairs.iter().map(|&(a, b)| Link::new(f2_id(a), f2_id(b))).collect()
    }

    fn partial_table(owner: usize, level: LevelRef, pairs: &[(usize, usize)]) -> RoutingTable {
        let o = f2_id(owner);
        let edges = links(pairs);
        let mut t = RoutingTable::with_neighbors(o, level, edges.iter().filter_map(|l| l.other(o)));
        for l in edges.iter().filter(|l| !l.contains(o)) {
            t.insert_record(EdgeRecord::new(vec![l.lo(), l.hi()]));
        }
        t
    }

    /// The routing example: levels 0, `0` and `010` with links as drawn, and
    /// the three tables on the route replaced by their drawn contents.
    pub fn f2_multilevel() -> Result<MultiLevelNetwork> {
        let l1 = LevelRef::new(0b0, 1)?;
        let l3 = LevelRef::new(0b010, 3)?;
        let specs = BTreeMap::from([(l1, links(&F2_LEVEL1)), (l3, links(&F2_LEVEL3))]);
        let mut net = MultiLevelNetwork::from_level_links(f2(), specs, &PropagationOptions::default())?;
        let levels = net.levels_mut();
        for (level, owner, pairs) in
            [(LevelRef::ROOT, 0, &F2_TABLE_0[..]), (l1, 1, &F2_TABLE_1[..]), (l3, 6, &F2_TABLE_6[..])]
        {
            levels.get_mut(&level).unwrap().tables.insert(f2_id(owner), partial_table(owner, level, pairs));
        }
        Ok(net)
    }
}
