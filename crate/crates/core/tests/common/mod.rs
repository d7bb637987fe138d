#![allow(dead_code)]

use std::collections::BTreeSet;

use bmlrp::propagation::{run_to_fixed_point, Convergence, LevelNetwork, PropagationOptions};
use bmlrp::topology::{generate, restrict_largest_component, GenConfig, Node};
use bmlrp::{LevelRef, Link, NodeId, PhysicalNetwork};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Largest component of a default-radius geometric network.
pub fn geometric(nodes: usize, width: u8, seed: u64) -> PhysicalNetwork {
    let cfg = GenConfig { width_bits: width, ..GenConfig::new(nodes, seed) };
    restrict_largest_component(&generate(&cfg).unwrap()).unwrap()
}

/// Erdos-Renyi graph on `n` distinct identifiers, restricted to its
/// largest component.
pub fn random_graph(seed: u64, n: usize, width: u8, p: f64) -> PhysicalNetwork {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<NodeId> = index::sample(&mut rng, 1 << width, n)
        .into_iter()
        .map(|v| NodeId::new(v as u64, width).unwrap())
        .collect();
    let mut links = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.gen_bool(p) {
                links.push((ids[i], ids[j]));
            }
        }
    }
    let nodes = ids.iter().map(|&id| Node { id, x: 0.0, y: 0.0 }).collect();
    restrict_largest_component(&PhysicalNetwork::new(width, nodes, links).unwrap()).unwrap()
}

pub fn root_level(net: &PhysicalNetwork) -> LevelNetwork {
    LevelNetwork { level: LevelRef::ROOT, members: net.ids().collect(), links: net.links().clone() }
}

pub fn converge(net: &PhysicalNetwork) -> Convergence {
    run_to_fixed_point(&root_level(net), &PropagationOptions::default()).unwrap()
}

pub fn links_of(pairs: &[(NodeId, NodeId)]) -> BTreeSet<Link> {
    pairs.iter().map(|&(a, b)| Link::new(a, b)).collect()
}
