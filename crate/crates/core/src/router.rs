//! Greedy prefix routing with source-route expansion down to physical hops.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::ascent::{MultiLevelNetwork, VirtualLink};
use crate::error::{Error, Result};
use crate::graph::{IndexedGraph, UNREACHED};
use crate::idspace::{LevelRef, NodeId};
use crate::levels::RoutingTable;
use crate::topology::{stream_rng, Link, Stream};

/// One intra-level leg of a route.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub level: LevelRef,
    /// Level-network nodes from the leg's start to its target.
    pub path: Vec<NodeId>,
    /// The same leg in physical hops.
    pub physical: Vec<NodeId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteResult {
    /// Source, every prefix-improving hop, destination.
    pub logical_hops: Vec<NodeId>,
    pub physical_path: Vec<NodeId>,
    pub hop_count: usize,
    pub levels_used: Vec<u32>,
    pub segments: Vec<Segment>,
}

impl RouteResult {
    fn empty(s: NodeId) -> Self {
        RouteResult { logical_hops: vec![s], physical_path: vec![s], hop_count: 0, levels_used: Vec::new(), segments: Vec::new() }
    }
}

/// The table graph of `table` with the owner's hop distances.
fn table_graph(table: &RoutingTable) -> (IndexedGraph, Vec<u32>) {
    let g = IndexedGraph::from_edges(table.visible_edges(), [table.owner()]);
    let dist = g.bfs([g.index_of(table.owner()).unwrap()]);
    (g, dist)
}

fn pick(g: &IndexedGraph, dist: &[u32], x: NodeId, d: NodeId) -> Option<NodeId> {
    if g.index_of(d).is_some_and(|i| dist[i as usize] != UNREACHED) {
        return Some(d);
    }
    let base = x.prefix_len(d);
    (0..g.len() as u32)
        .filter(|&i| dist[i as usize] != UNREACHED && g.id(i).prefix_len(d) > base)
        .min_by_key(|&i| (dist[i as usize], g.id(i).xor(d), g.id(i)))
        .map(|i| g.id(i))
}

/// Where the owner of `table` forwards a packet for `d`: `d` itself when
/// visible, otherwise the nearest visible node sharing a longer prefix with
/// `d` (ties by XOR to `d`, then identifier).
pub fn next_hop(table: &RoutingTable, d: NodeId) -> Result<NodeId> {
    let x = table.owner();
    let (g, dist) = table_graph(table);
    pick(&g, &dist, x, d).ok_or(Error::RoutingFailure { node: x, dest: d, level: table.level().depth() })
}

/// Physical node sequence of `link`, starting at `from`.
pub fn expand_link(net: &MultiLevelNetwork, link: &VirtualLink, from: NodeId) -> Result<Vec<NodeId>> {
    let path = link.path_from(from);
    let Some(via) = link.via else {
        return Ok(path);
    };
    let parent = net.level(via).ok_or_else(|| Error::Internal(format!("level {via} missing")))?;
    let mut out = vec![from];
    for w in path.windows(2) {
        let l = Link::new(w[0], w[1]);
        let inner = parent
            .links
            .get(&l)
            .ok_or_else(|| Error::Internal(format!("{l} has no realization in {via}")))?;
        let seg = expand_link(net, inner, w[0])?;
        out.extend_from_slice(&seg[1..]);
    }
    Ok(out)
}

/// Routes from `s` to `d`, ascending one level per logical hop.
pub fn route(net: &MultiLevelNetwork, s: NodeId, d: NodeId) -> Result<RouteResult> {
    for x in [s, d] {
        if !net.physical().contains(x) {
            return Err(Error::UnknownNode(x));
        }
    }
    let mut res = RouteResult::empty(s);
    let mut cur = s;
    while cur != d {
        let j = cur.prefix_len(d);
        let level = net.deepest_level(cur, j).expect("root level is always built");
        let info = net.level(level).unwrap();
        let table = info.tables.get(&cur).ok_or_else(|| Error::Internal(format!("no table for {cur} at {level}")))?;
        let (g, dist) = table_graph(table);
        let b = pick(&g, &dist, cur, d).ok_or(Error::RoutingFailure { node: cur, dest: d, level: level.depth() })?;
        let path = g.shortest_path(cur, b).expect("picked nodes are reachable");
        let mut physical = vec![cur];
        for w in path.windows(2) {
            let l = Link::new(w[0], w[1]);
            let vl = info
                .links
                .get(&l)
                .ok_or_else(|| Error::Internal(format!("table of {cur} shows {l}, absent from {level}")))?;
            let seg = expand_link(net, vl, w[0])?;
            physical.extend_from_slice(&seg[1..]);
        }
        res.physical_path.extend_from_slice(&physical[1..]);
        res.logical_hops.push(b);
        res.levels_used.push(level.depth());
        res.segments.push(Segment { level, path, physical });
        cur = b;
    }
    res.hop_count = res.physical_path.len() - 1;
    Ok(res)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairStretch {
    pub src: NodeId,
    pub dst: NodeId,
    pub hops: usize,
    pub bfs: usize,
    pub stretch: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StretchReport {
    pub pairs: Vec<PairStretch>,
    pub failures: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
    pub mean_hops: f64,
}

/// `k` distinct ordered pairs of distinct members, uniformly, or all of them
/// when there are at most `k`.
pub fn sample_pairs(ids: &[NodeId], k: usize, seed: u64) -> Vec<(NodeId, NodeId)> {
    let n = ids.len();
    let total = n * n.saturating_sub(1);
    let pick = |i: usize| {
        let s = i / (n - 1);
        let mut t = i % (n - 1);
        if t >= s {
            t += 1;
        }
        (ids[s], ids[t])
    };
    if total <= k {
        return (0..total).map(pick).collect();
    }
    let mut rng = stream_rng(seed, Stream::PairSampling);
    let mut chosen = index::sample(&mut rng, total, k).into_vec();
    chosen.sort_unstable();
    chosen.into_iter().map(pick).collect()
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let idx = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[idx]
}

/// Routes sampled pairs and compares each with its physical shortest path.
pub fn measure_stretch(net: &MultiLevelNetwork, sample_size: usize, seed: u64) -> StretchReport {
    let ids: Vec<NodeId> = net.physical().ids().collect();
    let pairs = sample_pairs(&ids, sample_size, seed);
    let g = IndexedGraph::from_edges(net.physical().links().iter().copied(), ids.iter().copied());
    let mut by_src: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &(s, t) in &pairs {
        by_src.entry(s).or_default().push(t);
    }
    let mut report = StretchReport::default();
    for (s, dsts) in by_src {
        let dist = g.bfs([g.index_of(s).unwrap()]);
        for t in dsts {
            let bfs = dist[g.index_of(t).unwrap() as usize] as usize;
            match route(net, s, t) {
                Ok(r) => report.pairs.push(PairStretch {
                    src: s,
                    dst: t,
                    hops: r.hop_count,
                    bfs,
                    stretch: r.hop_count as f64 / bfs as f64,
                }),
                Err(e) => {
                    log::warn!("route {s} -> {t}: {e}");
                    report.failures += 1;
                }
            }
        }
    }
    if !report.pairs.is_empty() {
        let n = report.pairs.len() as f64;
        report.mean = report.pairs.iter().map(|p| p.stretch).sum::<f64>() / n;
        report.mean_hops = report.pairs.iter().map(|p| p.hops as f64).sum::<f64>() / n;
        let mut s: Vec<f64> = report.pairs.iter().map(|p| p.stretch).collect();
        s.sort_by(f64::total_cmp);
        report.median = quantile(&s, 0.5);
        report.p95 = quantile(&s, 0.95);
    }
    report
}

/// True when every consecutive pair of `path` is a physical link.
pub fn is_physical_walk(net: &MultiLevelNetwork, path: &[NodeId]) -> bool {
    let links: &BTreeSet<Link> = net.physical().links();
    path.windows(2).all(|w| w[0] != w[1] && links.contains(&Link::new(w[0], w[1])))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ascent::{build_multilevel, BuildOptions};
    use crate::topology::{Node, PhysicalNetwork};

    fn n(v: u64) -> NodeId {
        NodeId::new(v, 4).unwrap()
    }

    fn path_net(len: u64) -> PhysicalNetwork {
        let nodes = (0..len).map(|i| Node { id: n(i), x: i as f64, y: 0.0 }).collect();
        PhysicalNetwork::new(4, nodes, (1..len).map(|i| (n(i - 1), n(i)))).unwrap()
    }

    #[test]
    fn self_route_is_empty() {
        let m = build_multilevel(&path_net(4), &BuildOptions::default()).unwrap();
        let r = route(&m, n(2), n(2)).unwrap();
        assert_eq!(r.hop_count, 0);
        assert_eq!(r.physical_path, vec![n(2)]);
    }

    #[test]
    fn neighbours_route_directly() {
        let m = build_multilevel(&path_net(6), &BuildOptions::default()).unwrap();
        let r = route(&m, n(4), n(5)).unwrap();
        assert_eq!(r.physical_path, vec![n(4), n(5)]);
    }

    #[test]
    fn every_pair_delivers_on_a_path() {
        let m = build_multilevel(&path_net(16), &BuildOptions::default()).unwrap();
        let rep = measure_stretch(&m, 1000, 1);
        assert_eq!(rep.failures, 0);
        assert_eq!(rep.pairs.len(), 240);
        for p in &rep.pairs {
            assert!(p.stretch >= 1.0);
            let r = route(&m, p.src, p.dst).unwrap();
            assert!(is_physical_walk(&m, &r.physical_path));
            for w in r.logical_hops.windows(2) {
                assert!(w[1].prefix_len(p.dst) > w[0].prefix_len(p.dst));
            }
        }
    }

    #[test]
    fn sampling_is_deterministic_and_distinct() {
        let ids: Vec<NodeId> = (0..16).map(n).collect();
        let a = sample_pairs(&ids, 50, 9);
        assert_eq!(a, sample_pairs(&ids, 50, 9));
        assert_eq!(a.iter().collect::<BTreeSet<_>>().len(), 50);
        assert!(a.iter().all(|(s, t)| s != t));
    }
}
