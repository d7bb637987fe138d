//! Physical (level-0) networks: generation, largest-component restriction
//! and the `bmlrp-net v1` text format.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::idspace::{NodeId, DEFAULT_WIDTH, MAX_WIDTH};

/// Mean physical degree the default radius aims for.
pub const DEFAULT_TARGET_DEGREE: f64 = 8.0;

/// Side of the square deployment area when none is given.
pub const DEFAULT_SIDE: f64 = 1000.0;

const LONG_RANGE_RETRIES: usize = 32;

/// Independent random substreams derived from one master seed.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Placement = 1,
    Ids = 2,
    LongRange = 3,
    PairSampling = 4,
    Faults = 5,
}

/// ChaCha8 keyed by `seed`, positioned on the substream for `purpose`.
pub fn stream_rng(seed: u64, purpose: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose as u64);
    rng
}

/// Unordered node pair, stored with the smaller identifier first.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct Link(NodeId, NodeId);

impl Link {
    /// Panics on a self-link.
    pub fn new(a: NodeId, b: NodeId) -> Link {
        assert_ne!(a, b, "self-link");
        if a < b {
            Link(a, b)
        } else {
            Link(b, a)
        }
    }

    pub fn lo(self) -> NodeId {
        self.0
    }

    pub fn hi(self) -> NodeId {
        self.1
    }

    pub fn contains(self, x: NodeId) -> bool {
        self.0 == x || self.1 == x
    }

    pub fn other(self, x: NodeId) -> Option<NodeId> {
        if self.0 == x {
            Some(self.1)
        } else if self.1 == x {
            Some(self.0)
        } else {
            None
        }
    }
}

impl std::fmt::Display for Link {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}", self.0, self.1)
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub nodes: usize,
    pub width_bits: u8,
    pub side: f64,
    pub radius: f64,
    pub random_link_fraction: f64,
    pub seed: u64,
}

impl GenConfig {
    /// Defaults: 16-bit identifiers, a 1000×1000 area and the radius that
    /// gives [`DEFAULT_TARGET_DEGREE`] expected neighbours.
    pub fn new(nodes: usize, seed: u64) -> Self {
        GenConfig {
            nodes,
            width_bits: DEFAULT_WIDTH,
            side: DEFAULT_SIDE,
            radius: default_radius(nodes, DEFAULT_SIDE),
            random_link_fraction: 0.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_bits == 0 || self.width_bits > MAX_WIDTH {
            return Err(Error::Config(format!("width {} out of range", self.width_bits)));
        }
        if self.width_bits < 64 && (self.nodes as u128) > (1u128 << self.width_bits) {
            return Err(Error::Config(format!(
                "{} nodes do not fit in a {}-bit identifier space",
                self.nodes, self.width_bits
            )));
        }
        if self.side.is_nan() || self.side <= 0.0 || self.radius.is_nan() || self.radius < 0.0 {
            return Err(Error::Config("side must be positive and radius non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.random_link_fraction) {
            return Err(Error::Config(format!(
                "random link fraction {} outside [0, 1]",
                self.random_link_fraction
            )));
        }
        Ok(())
    }
}

/// Radius giving an expected `DEFAULT_TARGET_DEGREE` neighbours per node for
/// uniform placement, ignoring border effects.
pub fn default_radius(nodes: usize, side: f64) -> f64 {
    radius_for_degree(nodes, side, DEFAULT_TARGET_DEGREE)
}

pub fn radius_for_degree(nodes: usize, side: f64, degree: f64) -> f64 {
    if nodes < 2 {
        return side * std::f64::consts::SQRT_2;
    }
    (degree * side * side / (std::f64::consts::PI * (nodes - 1) as f64)).sqrt()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhysicalNetwork {
    width_bits: u8,
    nodes: Vec<Node>,
    links: BTreeSet<Link>,
}

impl PhysicalNetwork {
    /// Nodes are kept sorted by identifier. Fails on duplicate identifiers,
    /// mixed widths, self-links or links to unknown nodes.
    pub fn new(width_bits: u8, mut nodes: Vec<Node>, links: impl IntoIterator<Item = (NodeId, NodeId)>) -> Result<Self> {
        nodes.sort_by_key(|n| n.id);
        for w in nodes.windows(2) {
            if w[0].id == w[1].id {
                return Err(Error::Config(format!("duplicate identifier {}", w[0].id)));
            }
        }
        if let Some(n) = nodes.iter().find(|n| n.id.width() != width_bits) {
            return Err(Error::Config(format!("identifier {} is not {} bits wide", n.id, width_bits)));
        }
        let mut net = PhysicalNetwork { width_bits, nodes, links: BTreeSet::new() };
        for (a, b) in links {
            if a == b {
                return Err(Error::Config(format!("self-link on {a}")));
            }
            for x in [a, b] {
                if !net.contains(x) {
                    return Err(Error::UnknownNode(x));
                }
            }
            net.links.insert(Link::new(a, b));
        }
        Ok(net)
    }

    pub fn width_bits(&self) -> u8 {
        self.width_bits
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.nodes.iter().map(|n| n.id)
    }

    pub fn links(&self) -> &BTreeSet<Link> {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, id: NodeId) -> bool {
        self.nodes.binary_search_by_key(&id, |n| n.id).is_ok()
    }

    pub fn node(&self, id: NodeId) -> Option<&Node> {
        self.nodes.binary_search_by_key(&id, |n| n.id).ok().map(|i| &self.nodes[i])
    }

    pub fn has_link(&self, a: NodeId, b: NodeId) -> bool {
        a != b && self.links.contains(&Link::new(a, b))
    }

    pub fn adjacency(&self) -> BTreeMap<NodeId, BTreeSet<NodeId>> {
        let mut adj: BTreeMap<NodeId, BTreeSet<NodeId>> = self.ids().map(|id| (id, BTreeSet::new())).collect();
        for l in &self.links {
            adj.get_mut(&l.lo()).unwrap().insert(l.hi());
            adj.get_mut(&l.hi()).unwrap().insert(l.lo());
        }
        adj
    }

    pub fn mean_degree(&self) -> f64 {
        if self.nodes.is_empty() {
            0.0
        } else {
            2.0 * self.links.len() as f64 / self.nodes.len() as f64
        }
    }

    /// Connected components, each sorted, ordered by their smallest member.
    pub fn components(&self) -> Vec<Vec<NodeId>> {
        let adj = self.adjacency();
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for &start in adj.keys() {
            if !seen.insert(start) {
                continue;
            }
            let mut comp = vec![start];
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[&u] {
                    if seen.insert(v) {
                        comp.push(v);
                        queue.push_back(v);
                    }
                }
            }
            comp.sort();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.components().len() <= 1
    }

    /// Subgraph induced by `keep`.
    pub fn induced(&self, keep: &BTreeSet<NodeId>) -> PhysicalNetwork {
        PhysicalNetwork {
            width_bits: self.width_bits,
            nodes: self.nodes.iter().filter(|n| keep.contains(&n.id)).copied().collect(),
            links: self
                .links
                .iter()
                .filter(|l| keep.contains(&l.lo()) && keep.contains(&l.hi()))
                .copied()
                .collect(),
        }
    }

    pub fn with_links_removed(&self, removed: &BTreeSet<Link>) -> PhysicalNetwork {
        let mut out = self.clone();
        out.links.retain(|l| !removed.contains(l));
        out
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "bmlrp-net v1 {} {}", self.nodes.len(), self.width_bits).unwrap();
        for n in &self.nodes {
            writeln!(s, "{} {} {}", n.id, n.x, n.y).unwrap();
        }
        s.push_str("#links\n");
        for l in &self.links {
            writeln!(s, "{} {}", l.lo(), l.hi()).unwrap();
        }
        s
    }

    /// Parses the `bmlrp-net v1` format. `origin` only labels errors.
    pub fn from_text(text: &str, origin: &Path) -> Result<Self> {
        let perr = |line: usize, msg: String| Error::Parse { path: origin.to_path_buf(), line, msg };
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        let (hline, header) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 4 || fields[0] != "bmlrp-net" || fields[1] != "v1" {
            return Err(perr(hline, format!("bad header `{header}`")));
        }
        let count: usize = fields[2].parse().map_err(|_| perr(hline, "bad node count".into()))?;
        let width: u8 = fields[3].parse().map_err(|_| perr(hline, "bad width".into()))?;

        let mut nodes = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, line) = lines.next().ok_or_else(|| perr(hline, format!("expected {count} node lines")))?;
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 3 {
                return Err(perr(ln, format!("expected `<id> <x> <y>`, got `{line}`")));
            }
            let id = NodeId::parse_binary(f[0]).map_err(|e| perr(ln, e.to_string()))?;
            if id.width() != width {
                return Err(perr(ln, format!("identifier {} is not {width} bits", f[0])));
            }
            let x: f64 = f[1].parse().map_err(|_| perr(ln, format!("bad x `{}`", f[1])))?;
            let y: f64 = f[2].parse().map_err(|_| perr(ln, format!("bad y `{}`", f[2])))?;
            nodes.push(Node { id, x, y });
        }
        let (ln, marker) = lines.next().ok_or_else(|| perr(hline, "missing `#links`".into()))?;
        if marker != "#links" {
            return Err(perr(ln, format!("expected `#links`, got `{marker}`")));
        }
        let mut links = Vec::new();
        for (ln, line) in lines {
            if line.is_empty() {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 2 {
                return Err(perr(ln, format!("expected `<id> <id>`, got `{line}`")));
            }
            let a = NodeId::parse_binary(f[0]).map_err(|e| perr(ln, e.to_string()))?;
            let b = NodeId::parse_binary(f[1]).map_err(|e| perr(ln, e.to_string()))?;
            links.push((ln, a, b));
        }
        let mut net = PhysicalNetwork::new(width, nodes, std::iter::empty()).map_err(|e| perr(hline, e.to_string()))?;
        for (ln, a, b) in links {
            if a == b || !net.contains(a) || !net.contains(b) {
                return Err(perr(ln, format!("invalid link {a} {b}")));
            }
            net.links.insert(Link::new(a, b));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, path)
    }
}

fn draw_ids(rng: &mut ChaCha8Rng, count: usize, width: u8) -> Vec<NodeId> {
    let space: u128 = 1u128 << width;
    let values: Vec<u64> = if space <= 1 << 24 {
        index::sample(rng, space as usize, count).into_iter().map(|v| v as u64).collect()
    } else {
        let mut seen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        let top = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        while out.len() < count {
            let v = rng.gen_range(0..=top);
            if seen.insert(v) {
                out.push(v);
            }
        }
        out
    };
    values.into_iter().map(|v| NodeId::new(v, width).expect("drawn inside the space")).collect()
}

/// Uniform random geometric graph: every pair within `radius` is linked.
pub fn generate_geometric(cfg: &GenConfig) -> Result<PhysicalNetwork> {
    cfg.validate()?;
    let mut placement = stream_rng(cfg.seed, Stream::Placement);
    let coords: Vec<(f64, f64)> =
        (0..cfg.nodes).map(|_| (placement.gen::<f64>() * cfg.side, placement.gen::<f64>() * cfg.side)).collect();
    let ids = draw_ids(&mut stream_rng(cfg.seed, Stream::Ids), cfg.nodes, cfg.width_bits);

    // Bucket into radius-sized cells so only neighbouring cells are compared.
    let cell = if cfg.radius > 0.0 { cfg.radius } else { cfg.side };
    let cells_per_side = ((cfg.side / cell).ceil() as i64).max(1);
    let cell_of = |x: f64| ((x / cell) as i64).clamp(0, cells_per_side - 1);
    let mut grid: BTreeMap<(i64, i64), Vec<usize>> = BTreeMap::new();
    for (i, &(x, y)) in coords.iter().enumerate() {
        grid.entry((cell_of(x), cell_of(y))).or_default().push(i);
    }
    let r2 = cfg.radius * cfg.radius;
    let mut links = Vec::new();
    for (i, &(x, y)) in coords.iter().enumerate() {
        let (cx, cy) = (cell_of(x), cell_of(y));
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(bucket) = grid.get(&(cx + dx, cy + dy)) {
                    for &j in bucket {
                        if j > i {
                            let (ox, oy) = coords[j];
                            if (x - ox).powi(2) + (y - oy).powi(2) <= r2 {
                                links.push((ids[i], ids[j]));
                            }
                        }
                    }
                }
            }
        }
    }
    let nodes = ids.iter().zip(&coords).map(|(&id, &(x, y))| Node { id, x, y }).collect();
    PhysicalNetwork::new(cfg.width_bits, nodes, links)
}

/// Geometric graph plus the configured fraction of long-range links.
pub fn generate(cfg: &GenConfig) -> Result<PhysicalNetwork> {
    let net = generate_geometric(cfg)?;
    add_random_links(&net, cfg.random_link_fraction, cfg.seed)
}

/// Picks `floor(fraction * N)` distinct nodes and links each to a uniformly
/// chosen partner regardless of position. A pair that is already linked is
/// redrawn a bounded number of times, then skipped.
pub fn add_random_links(net: &PhysicalNetwork, fraction: f64, seed: u64) -> Result<PhysicalNetwork> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("random link fraction {fraction} outside [0, 1]")));
    }
    let n = net.len();
    let count = (fraction * n as f64).floor() as usize;
    let mut out = net.clone();
    if count == 0 || n < 2 {
        return Ok(out);
    }
    let mut rng = stream_rng(seed, Stream::LongRange);
    let chosen = index::sample(&mut rng, n, count);
    for i in chosen {
        let a = net.nodes[i].id;
        for _ in 0..LONG_RANGE_RETRIES {
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let link = Link::new(a, net.nodes[j].id);
            if out.links.insert(link) {
                break;
            }
        }
    }
    Ok(out)
}

/// Induced subgraph of the largest connected component; ties go to the
/// component holding the smallest identifier.
pub fn restrict_largest_component(net: &PhysicalNetwork) -> Result<PhysicalNetwork> {
    if net.is_empty() {
        return Err(Error::EmptyNetwork);
    }
    let comps = net.components();
    // components() is ordered by smallest member, so max_by keeps the first on ties.
    let best = comps
        .iter()
        .enumerate()
        .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))
        .map(|(_, c)| c)
        .unwrap();
    if best.len() == net.len() {
        return Ok(net.clone());
    }
    Ok(net.induced(&best.iter().copied().collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn id(s: &str) -> NodeId {
        s.parse().unwrap()
    }

    fn line_net(ids: &[&str], links: &[(&str, &str)]) -> PhysicalNetwork {
        let nodes = ids.iter().enumerate().map(|(i, s)| Node { id: id(s), x: i as f64, y: 0.0 }).collect();
        PhysicalNetwork::new(ids[0].len() as u8, nodes, links.iter().map(|(a, b)| (id(a), id(b)))).unwrap()
    }

    #[test]
    fn single_node_has_no_links() {
        let net = generate_geometric(&GenConfig { radius: 50.0, ..GenConfig::new(1, 3) }).unwrap();
        assert_eq!(net.len(), 1);
        assert!(net.links().is_empty());
    }

    #[test]
    fn two_nodes_within_range_are_linked() {
        let cfg = GenConfig { radius: DEFAULT_SIDE * 1.5, ..GenConfig::new(2, 11) };
        let net = generate_geometric(&cfg).unwrap();
        assert_eq!(net.links().len(), 1);
    }

    #[test]
    fn id_space_too_small() {
        let cfg = GenConfig { width_bits: 3, ..GenConfig::new(9, 0) };
        assert!(matches!(generate_geometric(&cfg), Err(Error::Config(_))));
        let cfg = GenConfig { width_bits: 3, ..GenConfig::new(8, 0) };
        assert_eq!(generate_geometric(&cfg).unwrap().len(), 8);
    }

    #[test]
    fn generation_is_deterministic_and_geometric() {
        let cfg = GenConfig::new(300, 42);
        let a = generate_geometric(&cfg).unwrap();
        let b = generate_geometric(&cfg).unwrap();
        assert_eq!(a.to_text(), b.to_text());
        for l in a.links() {
            let (p, q) = (a.node(l.lo()).unwrap(), a.node(l.hi()).unwrap());
            assert!(((p.x - q.x).powi(2) + (p.y - q.y).powi(2)).sqrt() <= cfg.radius);
        }
        // brute-force pair check agrees with the grid
        let mut count = 0;
        for (i, p) in a.nodes().iter().enumerate() {
            for q in &a.nodes()[i + 1..] {
                if (p.x - q.x).powi(2) + (p.y - q.y).powi(2) <= cfg.radius * cfg.radius {
                    count += 1;
                }
            }
        }
        assert_eq!(count, a.links().len());
        let c = generate_geometric(&GenConfig::new(300, 43)).unwrap();
        assert_ne!(a.to_text(), c.to_text());
    }

    #[test]
    fn random_links_zero_fraction_is_identity() {
        let net = generate_geometric(&GenConfig::new(100, 5)).unwrap();
        assert_eq!(add_random_links(&net, 0.0, 9).unwrap(), net);
        assert!(add_random_links(&net, 1.5, 9).is_err());
    }

    #[test]
    fn random_links_count() {
        // Zero radius: no geometric links, so every drawn pairing is new unless
        // two chosen nodes draw each other.
        let cfg = GenConfig { radius: 0.0, ..GenConfig::new(100, 5) };
        let net = generate_geometric(&cfg).unwrap();
        assert!(net.links().is_empty());
        for seed in 0..20 {
            let out = add_random_links(&net, 0.1, seed).unwrap();
            assert_eq!(out.links().len(), 10, "seed {seed}");
        }
    }

    #[test]
    fn random_links_full_fraction_on_four_nodes() {
        // Four isolated nodes, every node draws a partner. Each draw adds a new
        // link unless all three partners are already taken, so the result has
        // between 2 and 4 links and every node is touched.
        let net = line_net(&["00", "01", "10", "11"], &[]);
        for seed in 0..50 {
            let out = add_random_links(&net, 1.0, seed).unwrap();
            let n = out.links().len();
            assert!((2..=4).contains(&n), "seed {seed}: {n}");
            for x in net.ids() {
                assert!(out.links().iter().any(|l| l.contains(x)));
            }
        }
    }

    #[test]
    fn largest_component_selection() {
        let net = line_net(&["000", "001", "010", "011", "100"], &[("000", "001"), ("001", "010"), ("011", "100")]);
        let out = restrict_largest_component(&net).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), vec![id("000"), id("001"), id("010")]);

        let tie = line_net(&["000", "001", "010", "011"], &[("000", "011"), ("001", "010")]);
        let out = restrict_largest_component(&tie).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), vec![id("000"), id("011")]);

        let connected = line_net(&["00", "01"], &[("00", "01")]);
        assert_eq!(restrict_largest_component(&connected).unwrap(), connected);
        assert!(matches!(restrict_largest_component(&PhysicalNetwork::default()), Err(Error::EmptyNetwork)));
    }

    #[test]
    fn text_roundtrip_and_errors() {
        let net = line_net(&["00", "01", "10"], &[]);
        let back = PhysicalNetwork::from_text(&net.to_text(), Path::new("x")).unwrap();
        assert_eq!(back, net);

        let gen = generate_geometric(&GenConfig::new(1024, 1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.net");
        gen.save(&p).unwrap();
        assert_eq!(PhysicalNetwork::load(&p).unwrap(), gen);

        let bad = "bmlrp-net v1 2 2\n00 0 0\n01 1 x\n#links\n";
        match PhysicalNetwork::from_text(bad, Path::new("bad.net")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad = "bmlrp-net v1 2 2\n00 0 0\n01 1 1\n#links\n00 11\n";
        assert!(matches!(PhysicalNetwork::from_text(bad, Path::new("b")), Err(Error::Parse { line: 5, .. })));
    }
}
