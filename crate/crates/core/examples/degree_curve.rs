//! Average level degree by depth for several random-link fractions.
//!
//! cargo run --release --example degree_curve -- [nodes] [seeds]

use bmlrp::experiments::{curve_shape, degree_experiment, ExperimentConfig};

fn main() -> bmlrp::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let cfg = ExperimentConfig {
        nodes: args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1024),
        repetitions: args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3),
        ..Default::default()
    };
    let report = degree_experiment(&cfg)?;
    for &f in &cfg.fractions {
        let rows: Vec<_> = report.rows.iter().filter(|r| r.fraction == f).cloned().collect();
        let curve: Vec<String> = rows.iter().map(|r| format!("{:.2}", r.avg_degree)).collect();
        println!("fraction {f:.2}: {}", curve.join(" "));
        if let Some(s) = curve_shape(&rows) {
            println!("  plateau {:.2}, max {:.2}, tail non-increasing {}", s.plateau, s.max_degree, s.tail_non_increasing);
        }
    }
    Ok(())
}
