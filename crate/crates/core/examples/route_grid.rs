//! Greedy prefix routing on the 4x4 grid example, one segment per level.

use bmlrp::oracle::fixtures::{f2_id, f2_multilevel};
use bmlrp::route;

fn main() -> bmlrp::Result<()> {
    let m = f2_multilevel()?;
    let r = route(&m, f2_id(0), f2_id(15))?;
    let hops: Vec<String> = r.logical_hops.iter().map(|x| x.to_string()).collect();
    println!("logical hops: {}", hops.join(" -> "));
    for s in &r.segments {
        let path: Vec<String> = s.physical.iter().map(|x| x.to_string()).collect();
        println!("level {} [{}]: {}", s.level.depth(), s.level.to_binary(), path.join(" "));
    }
    println!("{} physical hops", r.hop_count);
    Ok(())
}
