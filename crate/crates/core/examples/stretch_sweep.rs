//! Mean hop count and stretch as the network grows, with a power-law fit.
//!
//! cargo run --release --example stretch_sweep -- [seeds]

use bmlrp::experiments::{stretch_experiment, ExperimentConfig};

fn main() -> bmlrp::Result<()> {
    let seeds = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let cfg = ExperimentConfig { sizes: vec![128, 256, 512, 1024], repetitions: seeds, stretch_samples: 500, ..Default::default() };
    let (sweep, _) = stretch_experiment(&cfg)?;
    for s in &sweep.sizes {
        println!("N={:<5} hops {:6.2}  stretch {:.3} (median {:.3}, p95 {:.3})", s.nodes, s.mean_hops, s.mean_stretch, s.median_stretch, s.p95_stretch);
    }
    println!("hops grow like N^{:.2}", sweep.slope);
    Ok(())
}
