//! Build every level network over a random network and route a few packets.
//!
//! cargo run --release --example build_and_route -- [nodes] [seed]

use bmlrp::router::sample_pairs;
use bmlrp::topology::{generate, restrict_largest_component, GenConfig};
use bmlrp::{build_multilevel, route, BuildOptions, NodeId};

fn main() -> bmlrp::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let nodes = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(512);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);

    let phys = restrict_largest_component(&generate(&GenConfig::new(nodes, seed))?)?;
    let net = build_multilevel(&phys, &BuildOptions::default())?;
    println!("{} level networks, deepest at depth {}", net.levels().len(), net.max_depth());
    for (depth, (deg, members)) in net.degree_by_depth() {
        println!("  depth {depth:>2}: {members:>5} members, mean degree {deg:.2}");
    }

    let ids: Vec<NodeId> = phys.ids().collect();
    for (s, d) in sample_pairs(&ids, 5, seed) {
        let r = route(&net, s, d)?;
        println!("{s} -> {d}: {} logical hops, {} physical, levels {:?}", r.logical_hops.len() - 1, r.hop_count, r.levels_used);
    }
    Ok(())
}
