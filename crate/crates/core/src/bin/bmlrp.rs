use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bmlrp::ascent::{build_multilevel, ConnectTarget, MultiLevelNetwork};
use bmlrp::experiments::{
    curve_shape, degree_experiment, degree_rows, degrees_csv, delivery_check, network_for, stretch_csv,
    stretch_experiment, summary_json, write_file, ExperimentConfig, DEFAULT_FRACTIONS, DEFAULT_SIZES,
};
use bmlrp::{route, NodeId, PhysicalNetwork, Result};

#[derive(Parser)]
#[command(name = "bmlrp", version, about = "Multi-level prefix routing: build, route and measure")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a random geometric network and save it.
    Generate(Common),
    /// Build all level networks and print a per-level summary.
    Build {
        #[command(flatten)]
        common: Common,
        /// Write one table dump per node and level into this directory.
        #[arg(long)]
        dump_tables: Option<PathBuf>,
    },
    /// Route one packet and print the logical and physical paths.
    Route {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        from: NodeId,
        #[arg(long)]
        to: NodeId,
    },
    /// Average level degree for several random-link fractions.
    Degrees {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_FRACTIONS)]
        fractions: Vec<f64>,
    },
    /// Hop counts and stretch against network size.
    Stretch {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
        sizes: Vec<usize>,
        /// Sampled pairs per build.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Route many pairs and count failures and non-monotone routes.
    Check {
        #[command(flatten)]
        common: Common,
        /// Drop this fraction of table records before routing.
        #[arg(long, default_value_t = 0.0)]
        faults: f64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1024)]
    nodes: usize,
    #[arg(long, default_value_t = bmlrp::idspace::DEFAULT_WIDTH)]
    bits: u8,
    /// Link radius in a 1000x1000 area; defaults to about 8 expected neighbours.
    #[arg(long)]
    radius: Option<f64>,
    /// Extra random links as a fraction of the node count.
    #[arg(long, default_value_t = 0.0)]
    random_links: f64,
    #[arg(long, default_value_t = 0)]
    extra_k: usize,
    #[arg(long, default_value_t = ConnectTarget::default())]
    connect_target: ConnectTarget,
    #[arg(long)]
    levels_max: Option<u32>,
    /// Seeds used by the sweeps, counting up from --seed.
    #[arg(long, default_value_t = 10)]
    repetitions: usize,
    /// Load the physical network from a file instead of generating it.
    #[arg(long)]
    net: Option<PathBuf>,
    /// JSON experiment config; overrides the generation flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        if let Some(p) = &self.config {
            return ExperimentConfig::load(p);
        }
        Ok(ExperimentConfig {
            nodes: self.nodes,
            width_bits: self.bits,
            radius: self.radius,
            random_link_fraction: self.random_links,
            levels_max: self.levels_max,
            extra_k: self.extra_k,
            connect_target: self.connect_target,
            seed: self.seed,
            repetitions: self.repetitions,
            ..Default::default()
        })
    }

    fn network(&self, cfg: &ExperimentConfig) -> Result<PhysicalNetwork> {
        match &self.net {
            Some(p) => PhysicalNetwork::load(p),
            None => network_for(cfg, cfg.nodes, cfg.random_link_fraction, cfg.seed),
        }
    }

    fn build(&self, cfg: &ExperimentConfig) -> Result<MultiLevelNetwork> {
        build_multilevel(&self.network(cfg)?, &cfg.build_options(true))
    }
}

fn dump_tables(net: &MultiLevelNetwork, dir: &Path) -> Result<()> {
    for info in net.levels().values() {
        let sub = dir.join(if info.level.depth() == 0 { "root".to_string() } else { info.level.to_binary() });
        for (id, t) in &info.tables {
            write_file(&sub.join(format!("{id}.txt")), &t.dump())?;
        }
    }
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Generate(c) => {
            let cfg = c.config()?;
            let net = c.network(&cfg)?;
            let path = c.out.join("network.net");
            write_file(&path, &net.to_text())?;
            println!("{} nodes, {} links, mean degree {:.2} -> {}", net.len(), net.links().len(), net.mean_degree(), path.display());
        }
        Cmd::Build { common, dump_tables: dump } => {
            let cfg = common.config()?;
            let net = common.build(&cfg)?;
            if let Some(dir) = dump {
                dump_tables(&net, &dir)?;
            }
            let text = serde_json::to_string_pretty(&net.summaries())?;
            write_file(&common.out.join("levels.json"), &(text.clone() + "\n"))?;
            println!("{text}");
        }
        Cmd::Route { common, from, to } => {
            let cfg = common.config()?;
            let net = common.build(&cfg)?;
            let r = route(&net, from, to)?;
            let join = |v: &[NodeId]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
            println!("logical: {}", join(&r.logical_hops));
            println!("physical: {}", join(&r.physical_path));
            println!("hops: {}", r.hop_count);
            for s in &r.segments {
                println!("  level {} {}: {}", s.level.depth(), s.level.to_binary(), join(&s.physical));
            }
        }
        Cmd::Degrees { common, fractions } => {
            let mut cfg = common.config()?;
            if common.config.is_none() {
                cfg.fractions = fractions;
            }
            let report = degree_experiment(&cfg)?;
            write_file(&common.out.join("degrees.csv"), &degrees_csv(&cfg, &report.rows)?)?;
            let shapes: Vec<_> = cfg
                .fractions
                .iter()
                .map(|&f| {
                    let rows: Vec<_> = report.rows.iter().filter(|r| r.fraction == f).cloned().collect();
                    (f, curve_shape(&rows))
                })
                .collect();
            let body = serde_json::json!({ "builds": report.builds, "failed": report.failed, "shapes": shapes });
            write_file(&common.out.join("summary.json"), &summary_json(&cfg, body)?)?;
            for r in &report.rows {
                println!("{:.2} {:>2} {:8.3} {:10.1}", r.fraction, r.level, r.avg_degree, r.members);
            }
        }
        Cmd::Stretch { common, sizes, samples } => {
            let mut cfg = common.config()?;
            if common.config.is_none() {
                cfg.sizes = sizes;
                cfg.stretch_samples = samples;
            }
            let (summary, builds) = stretch_experiment(&cfg)?;
            write_file(&common.out.join("stretch.csv"), &stretch_csv(&cfg, &builds)?)?;
            let body = serde_json::json!({ "sweep": summary, "degrees": degree_rows(&builds) });
            write_file(&common.out.join("summary.json"), &summary_json(&cfg, body)?)?;
            for s in &summary.sizes {
                println!(
                    "N={:<6} hops {:7.2} stretch mean {:.3} median {:.3} p95 {:.3} failures {}",
                    s.nodes, s.mean_hops, s.mean_stretch, s.median_stretch, s.p95_stretch, s.failures
                );
            }
            println!("slope {:.3}", summary.slope);
        }
        Cmd::Check { common, faults } => {
            let cfg = common.config()?;
            let net = common.build(&cfg)?;
            let rep = delivery_check(&net, cfg.seed, faults);
            write_file(&common.out.join("summary.json"), &summary_json(&cfg, serde_json::to_value(&rep)?)?)?;
            println!("pairs {} failures {} loop violations {}", rep.pairs_tested, rep.failures, rep.loop_violations);
            return Ok(rep.failures == 0 && rep.loop_violations == 0);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
