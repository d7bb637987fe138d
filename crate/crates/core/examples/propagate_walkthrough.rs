//! Table propagation on the 12-node walkthrough network: what node 1 and
//! node 4 send to node 0, and node 0's table once nothing changes.

use bmlrp::oracle::fixtures::{f3, f3_id, f3_label};
use bmlrp::propagation::{build_neighbor_graph, compute_g_out, run_to_fixed_point, LevelNetwork, PropagationOptions};
use bmlrp::LevelRef;

fn main() -> bmlrp::Result<()> {
    let net = f3();
    let level = LevelNetwork { level: LevelRef::ROOT, members: net.ids().collect(), links: net.links().clone() };
    let done = run_to_fixed_point(&level, &PropagationOptions::default())?;
    println!("converged after {} rounds, {} records delivered", done.stats.rounds, done.stats.records_added);

    let zero = f3_id(0);
    for sender in [1, 4] {
        let g = build_neighbor_graph(&done.tables[&f3_id(sender)], zero);
        let out = compute_g_out(&g, 0, 32);
        let edges: Vec<String> =
            out.edges.iter().map(|l| format!("{}-{}", f3_label(l.lo()), f3_label(l.hi()))).collect();
        println!("{sender} -> 0: {}", edges.join(" "));
    }

    let t = &done.tables[&zero];
    let nodes: Vec<u64> = t.visible_nodes().into_iter().map(f3_label).collect();
    println!("node 0 sees {nodes:?}");
    print!("{}", t.dump());
    Ok(())
}
