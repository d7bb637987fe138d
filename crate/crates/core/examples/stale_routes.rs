//! Break some links after convergence and check that no table still holds
//! a record whose path crosses one of them.

use std::collections::BTreeSet;

use bmlrp::propagation::{LevelNetwork, PropagationOptions, Propagator};
use bmlrp::topology::{generate, restrict_largest_component, stream_rng, GenConfig, Stream};
use bmlrp::{LevelRef, Link};
use rand::seq::IteratorRandom;

fn main() -> bmlrp::Result<()> {
    let seed = 11;
    let phys = restrict_largest_component(&generate(&GenConfig::new(150, seed))?)?;
    let net = LevelNetwork { level: LevelRef::ROOT, members: phys.ids().collect(), links: phys.links().clone() };
    let mut p = Propagator::new(net, PropagationOptions::default());
    p.run()?;
    let before: usize = p.tables().values().map(|t| t.record_count()).sum();

    let mut rng = stream_rng(seed, Stream::Faults);
    let k = phys.links().len() / 20;
    let removed: BTreeSet<Link> = phys.links().iter().copied().choose_multiple(&mut rng, k).into_iter().collect();
    p.remove_links(&removed);
    let rounds = p.run()?;
    let after: usize = p.tables().values().map(|t| t.record_count()).sum();
    let live = &p.network().links;
    let stale: usize = p.tables().values().map(|t| t.stale_records(live).count()).sum();
    println!("removed {k} links; records {before} -> {after}; re-converged in {rounds} rounds; stale {stale}");
    Ok(())
}
