//! Generate a geometric network, save it, load it back.
//!
//! cargo run --example generate_network -- [nodes] [seed]

use bmlrp::topology::{generate, restrict_largest_component, GenConfig};
use bmlrp::PhysicalNetwork;

fn main() -> bmlrp::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let nodes = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(512);
    let seed = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(7);

    let cfg = GenConfig { random_link_fraction: 0.05, ..GenConfig::new(nodes, seed) };
    let net = generate(&cfg)?;
    let sizes: Vec<usize> = net.components().iter().map(Vec::len).collect();
    println!("{} nodes, {} links, mean degree {:.2}", net.len(), net.links().len(), net.mean_degree());
    println!("radius {:.1}, components {:?}", cfg.radius, &sizes[..sizes.len().min(8)]);

    let main = restrict_largest_component(&net)?;
    let dir = std::env::temp_dir().join("bmlrp-example");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("network.net");
    main.save(&path)?;
    let back = PhysicalNetwork::load(&path)?;
    assert_eq!(back, main);
    println!("largest component ({} nodes) saved to {}", main.len(), path.display());
    Ok(())
}
