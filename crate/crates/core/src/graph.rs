//! Small undirected graph over identifiers with dense indices, used for the
//! hop-distance queries in propagation, connection selection and routing.

use std::collections::{BTreeSet, VecDeque};

use crate::idspace::NodeId;
use crate::topology::Link;

pub const UNREACHED: u32 = u32::MAX;

#[derive(Clone, Debug, Default)]
pub struct IndexedGraph {
    ids: Vec<NodeId>,
    adj: Vec<Vec<u32>>,
}

impl IndexedGraph {
    /// `extra` nodes are added even when no edge touches them.
    pub fn from_edges(edges: impl IntoIterator<Item = Link>, extra: impl IntoIterator<Item = NodeId>) -> Self {
        let mut edges: Vec<Link> = edges.into_iter().collect();
        edges.sort_unstable();
        edges.dedup();
        let mut ids: Vec<NodeId> = edges.iter().flat_map(|e| [e.lo(), e.hi()]).chain(extra).collect();
        ids.sort_unstable();
        ids.dedup();
        let mut adj = vec![Vec::new(); ids.len()];
        for e in &edges {
            let u = ids.binary_search(&e.lo()).unwrap();
            let v = ids.binary_search(&e.hi()).unwrap();
            adj[u].push(v as u32);
            adj[v].push(u as u32);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        IndexedGraph { ids, adj }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[NodeId] {
        &self.ids
    }

    #[inline]
    pub fn id(&self, i: u32) -> NodeId {
        self.ids[i as usize]
    }

    pub fn index_of(&self, x: NodeId) -> Option<u32> {
        self.ids.binary_search(&x).ok().map(|i| i as u32)
    }

    #[inline]
    pub fn adj(&self, i: u32) -> &[u32] {
        &self.adj[i as usize]
    }

    pub fn neighbors_of(&self, x: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.index_of(x).into_iter().flat_map(move |i| self.adj[i as usize].iter().map(move |&j| self.ids[j as usize]))
    }

    pub fn edges(&self) -> BTreeSet<Link> {
        let mut out = BTreeSet::new();
        for (u, list) in self.adj.iter().enumerate() {
            for &v in list {
                if (u as u32) < v {
                    out.insert(Link::new(self.ids[u], self.ids[v as usize]));
                }
            }
        }
        out
    }

    /// Hop distance from the nearest source; `UNREACHED` elsewhere.
    pub fn bfs(&self, sources: impl IntoIterator<Item = u32>) -> Vec<u32> {
        let mut dist = vec![UNREACHED; self.ids.len()];
        let mut queue = VecDeque::new();
        for s in sources {
            if dist[s as usize] != 0 {
                dist[s as usize] = 0;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &v in &self.adj[u as usize] {
                if dist[v as usize] == UNREACHED {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// The lexicographically smallest shortest path from `from` to `to`.
    pub fn shortest_path(&self, from: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        let (s, t) = (self.index_of(from)?, self.index_of(to)?);
        let to_target = self.bfs([t]);
        if to_target[s as usize] == UNREACHED {
            return None;
        }
        let mut path = vec![from];
        let mut u = s;
        while u != t {
            // adjacency is sorted by index, and index order is identifier order
            u = *self.adj[u as usize]
                .iter()
                .find(|&&v| to_target[v as usize] == to_target[u as usize] - 1)
                .expect("bfs layer");
            path.push(self.ids[u as usize]);
        }
        Some(path)
    }

    /// Same, restricted to paths whose second node is `via`.
    pub fn shortest_path_via(&self, from: NodeId, via: NodeId, to: NodeId) -> Option<Vec<NodeId>> {
        let (s, w) = (self.index_of(from)?, self.index_of(via)?);
        if !self.adj[s as usize].contains(&w) {
            return None;
        }
        if via == to {
            return Some(vec![from, to]);
        }
        // the remainder must not come back through `from`
        let mut sub = self.clone();
        let si = s as usize;
        for v in std::mem::take(&mut sub.adj[si]) {
            sub.adj[v as usize].retain(|&x| x != s);
        }
        let mut rest = sub.shortest_path(via, to)?;
        rest.insert(0, from);
        Some(rest)
    }
}
