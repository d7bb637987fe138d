//! Which same-colored nodes each node of the 16-node example picks for its
//! child network, and why.

use bmlrp::ascent::{build_multilevel, select_connections};
use bmlrp::oracle::fixtures::{f4, f4_label, f4_options};
use bmlrp::LevelRef;

fn main() -> bmlrp::Result<()> {
    let opts = f4_options();
    let m = build_multilevel(&f4(), &opts)?;
    for (a, t) in &m.level(LevelRef::ROOT).unwrap().tables {
        for (x, sel) in select_connections(t, &opts) {
            let via: Vec<u64> = sel.realization.iter().map(|&v| f4_label(v)).collect();
            println!("{:>2} -> {:>2}  {:?} via {:?}", f4_label(*a), f4_label(x), sel.reason, via);
        }
    }
    for (lvl, info) in m.levels() {
        if lvl.depth() == 1 {
            let links: Vec<String> =
                info.links.keys().map(|l| format!("{}-{}", f4_label(l.lo()), f4_label(l.hi()))).collect();
            println!("level {}: {}", lvl.to_binary(), links.join(" "));
        }
    }
    Ok(())
}
